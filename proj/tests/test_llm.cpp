#include <filesystem>

#include "doctest.h"

#include "criteria.hpp"
#include "llm.hpp"
#include "util.hpp"

using namespace cohortsieve;

namespace {

Criterion abdominal() { return default_registry().at("ABDOMINAL"); }
Criterion english() { return default_registry().at("ENGLISH"); }

BackendConfig live_config() {
    BackendConfig config;
    config.kind = "live";
    config.base_url = "https://api.example.test/v1";
    config.model_name = "gpt-4";
    config.max_retries = 3;
    config.backoff_initial_ms = 500;
    return config;
}

std::string ok_body(const std::string& content) {
    return std::string(R"({"choices":[{"message":{"role":"assistant","content":")") + content +
           R"("}}]})";
}

std::filesystem::path scratch_dir() {
    auto dir = std::filesystem::temp_directory_path() / "cohortsieve_llm_test";
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("compose wraps the summary in a backtick fence") {
    Criterion c = abdominal();
    Prompt prompt = compose(c, "Record date: 2093-10-27\nHad surgery.", "gpt-4");
    CHECK(prompt.criterion_id == "ABDOMINAL");
    CHECK(prompt.text ==
          c.prompt_question +
              " The text is delimited with triple backticks."
              "\n\ntext: ```Record date: 2093-10-27\nHad surgery.```");
    CHECK(prompt.content_hash == content_hash("gpt-4", prompt.text));
}

TEST_CASE("compose neutralizes backtick runs inside the summary") {
    Prompt prompt = compose(abdominal(), "fence ``` breaker ``````", "gpt-4");
    CHECK(prompt.text.find("``` breaker") == std::string::npos);
    CHECK(prompt.text.find("fence ''' breaker ''''''") != std::string::npos);
    // The only backticks left are the fence itself.
    CHECK(prompt.text.find("```") == prompt.text.find(kFenceIntro) + kFenceIntro.size() - 3);
}

TEST_CASE("compose refuses empty summaries") {
    CHECK_THROWS_AS(compose(abdominal(), "", "gpt-4"), Error);
}

TEST_CASE("prompt hashes differ across criteria, summaries and models") {
    std::string summary = "Record date: unknown\nx";
    Prompt a = compose(abdominal(), summary, "gpt-4");
    Prompt b = compose(english(), summary, "gpt-4");
    Prompt c = compose(abdominal(), summary + "y", "gpt-4");
    Prompt d = compose(abdominal(), summary, "other-model");
    CHECK(a.content_hash != b.content_hash);
    CHECK(a.content_hash != c.content_hash);
    CHECK(a.content_hash != d.content_hash);
}

TEST_CASE("parse_answer reads the first token, forgiving punctuation and case") {
    CHECK(parse_answer("yes") == Parsed::yes);
    CHECK(parse_answer("Yes.") == Parsed::yes);
    CHECK(parse_answer("  YES, the patient qualifies") == Parsed::yes);
    CHECK(parse_answer("\"No\"") == Parsed::no);
    CHECK(parse_answer("no.") == Parsed::no);
    CHECK(parse_answer("No, never") == Parsed::no);
    CHECK(parse_answer("maybe") == Parsed::unparseable);
    CHECK(parse_answer("The answer is yes") == Parsed::unparseable);
    CHECK(parse_answer("") == Parsed::unparseable);
    CHECK(parse_answer("yesterday") == Parsed::unparseable);
    CHECK(parse_answer("...") == Parsed::unparseable);
}

TEST_CASE("classify maps answers through criterion polarity") {
    CHECK(classify(Parsed::yes, abdominal()) == Label::met);
    CHECK(classify(Parsed::no, abdominal()) == Label::not_met);
    CHECK(classify(Parsed::yes, english()) == Label::not_met);
    CHECK(classify(Parsed::no, english()) == Label::met);
    CHECK_THROWS_AS(classify(Parsed::unparseable, abdominal()), Error);
}

TEST_CASE("mock backend resolves hash overrides, then rules, then the default") {
    Prompt prompt = compose(abdominal(), "Record date: unknown\nHad abdominal surgery.", "m");
    MockBackend by_hash({{prompt.content_hash, "Yes."}}, {}, std::string("No."), "m");
    CHECK(by_hash.complete(prompt) == "Yes.");
    CHECK(by_hash.calls() == 1);

    MockBackend ruled({}, {{"history of abdominal surgery", "abdominal surgery", "Yes."}},
                      std::string("No."), "m");
    CHECK(ruled.complete(prompt) == "Yes.");
    Prompt other = compose(abdominal(), "Record date: unknown\nNothing relevant.", "m");
    CHECK(ruled.complete(other) == "No.");

    MockBackend bare({}, {}, std::nullopt, "m");
    CHECK_THROWS_AS(bare.complete(prompt), Error);
}

TEST_CASE("mock rules match the question head and fenced body independently") {
    // The question itself contains the word "abdominal": a rule keying on body
    // text must not fire off the question alone.
    Prompt no_evidence = compose(abdominal(), "Record date: unknown\nClear lungs.", "m");
    MockBackend mock({}, {{"", "abdominal", "Yes."}}, std::string("No."), "m");
    CHECK(mock.complete(no_evidence) == "No.");

    Prompt with_evidence =
        compose(abdominal(), "Record date: unknown\nmajor ABDOMINAL repair", "m");
    CHECK(mock.complete(with_evidence) == "Yes.");  // case-insensitive body match
}

TEST_CASE("mock script parses from JSON") {
    MockBackend mock = MockBackend::from_json_text(R"({
        "model": "scripted-mock",
        "default": "No.",
        "rules": [{"question_contains": "", "text_contains": "surgery", "answer": "Yes."}],
        "by_hash": {}
    })");
    CHECK(mock.model() == "scripted-mock");
    Prompt prompt = compose(abdominal(), "Record date: unknown\nsurgery done", "scripted-mock");
    CHECK(mock.complete(prompt) == "Yes.");
    CHECK_THROWS_AS(MockBackend::from_json_text("{oops"), Error);
    CHECK_THROWS_AS(MockBackend::from_json_text(R"({"rules":[{"text_contains":"x"}]})"), Error);
}

TEST_CASE("live backend sends a chat request and reads the first choice") {
    std::vector<std::string> urls;
    std::vector<std::string> bodies;
    std::vector<std::vector<std::pair<std::string, std::string>>> header_sets;
    auto transport = [&](const std::string& url, const auto& headers, const std::string& body,
                         double) -> HttpResponse {
        urls.push_back(url);
        bodies.push_back(body);
        header_sets.push_back(headers);
        return {200, ok_body("Yes."), ""};
    };
    LiveBackend backend(live_config(), "secret-key", transport, [](int) {});
    Prompt prompt = compose(abdominal(), "Record date: unknown\nx", "gpt-4");
    CHECK(backend.complete(prompt) == "Yes.");
    REQUIRE(urls.size() == 1);
    CHECK(urls[0] == "https://api.example.test/v1/chat/completions");
    CHECK(bodies[0].find("\"model\":\"gpt-4\"") != std::string::npos);
    CHECK(bodies[0].find("\"temperature\":0.0") != std::string::npos);
    CHECK(bodies[0].find("\"role\":\"user\"") != std::string::npos);
    bool authorized = false;
    for (const auto& [key, value] : header_sets[0]) {
        if (key == "Authorization" && value == "Bearer secret-key") authorized = true;
    }
    CHECK(authorized);
}

TEST_CASE("live backend retries retryable failures with doubling backoff") {
    int attempts = 0;
    std::vector<int> sleeps;
    auto transport = [&](const std::string&, const auto&, const std::string&,
                         double) -> HttpResponse {
        ++attempts;
        if (attempts == 1) return {0, "", "connection reset"};
        if (attempts == 2) return {429, "slow down", ""};
        return {200, ok_body("No."), ""};
    };
    LiveBackend backend(live_config(), "k", transport, [&](int ms) { sleeps.push_back(ms); });
    Prompt prompt = compose(abdominal(), "Record date: unknown\nx", "gpt-4");
    CHECK(backend.complete(prompt) == "No.");
    CHECK(attempts == 3);
    CHECK(sleeps == std::vector<int>{500, 1000});
}

TEST_CASE("max_retries bounds the total attempt count") {
    int attempts = 0;
    auto transport = [&](const std::string&, const auto&, const std::string&,
                         double) -> HttpResponse {
        ++attempts;
        return {503, "unavailable", ""};
    };
    LiveBackend backend(live_config(), "k", transport, [](int) {});
    Prompt prompt = compose(abdominal(), "Record date: unknown\nx", "gpt-4");
    try {
        backend.complete(prompt);
        FAIL("unreachable");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::transport);
        std::string what = e.what();
        CHECK(what.find("after 3 attempts") != std::string::npos);
        CHECK(what.find("503") != std::string::npos);
    }
    CHECK(attempts == 3);
}

TEST_CASE("authentication failures and other 4xx do not retry") {
    for (int status : {401, 403, 404, 422}) {
        int attempts = 0;
        auto transport = [&](const std::string&, const auto&, const std::string&,
                             double) -> HttpResponse {
            ++attempts;
            return {status, "denied", ""};
        };
        LiveBackend backend(live_config(), "k", transport, [](int) {});
        Prompt prompt = compose(abdominal(), "Record date: unknown\nx", "gpt-4");
        try {
            backend.complete(prompt);
            FAIL("unreachable");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::transport);
            if (status == 401 || status == 403) {
                CHECK(std::string(e.what()).find("authentication failed") !=
                      std::string::npos);
            }
        }
        CHECK(attempts == 1);
    }
}

TEST_CASE("malformed 200 bodies are a non-retryable transport error") {
    int attempts = 0;
    auto transport = [&](const std::string&, const auto&, const std::string&,
                         double) -> HttpResponse {
        ++attempts;
        return {200, R"({"unexpected":true})", ""};
    };
    LiveBackend backend(live_config(), "k", transport, [](int) {});
    Prompt prompt = compose(abdominal(), "Record date: unknown\nx", "gpt-4");
    CHECK_THROWS_AS(backend.complete(prompt), Error);
    CHECK(attempts == 1);
}

TEST_CASE("live backend requires an API key") {
    try {
        LiveBackend backend(live_config(), "");
        FAIL("unreachable");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::usage);
        CHECK(std::string(e.what()).find("COHORT_SIEVE_API_KEY") != std::string::npos);
    }
}

TEST_CASE("cache-only backend reports every miss as a transport error") {
    CacheOnlyBackend backend("gpt-4");
    Prompt prompt = compose(abdominal(), "Record date: unknown\nx", "gpt-4");
    try {
        backend.complete(prompt);
        FAIL("unreachable");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::transport);
        CHECK(std::string(e.what()).find(prompt.content_hash) != std::string::npos);
    }
}

TEST_CASE("response cache persists answers and verifies prompt text on lookup") {
    auto dir = scratch_dir();
    auto file = dir / "cache.jsonl";
    std::filesystem::remove(file);

    Prompt prompt = compose(abdominal(), "Record date: unknown\nx", "gpt-4");
    {
        ResponseCache cache(file);
        CHECK_FALSE(cache.lookup(prompt).has_value());
        cache.store(prompt, "gpt-4", "Yes.");
        CHECK(cache.lookup(prompt) == "Yes.");
        cache.store(prompt, "gpt-4", "changed");  // duplicate stores are dropped
        CHECK(cache.lookup(prompt) == "Yes.");
    }
    ResponseCache reloaded(file);
    CHECK(reloaded.size() == 1);
    CHECK(reloaded.lookup(prompt) == "Yes.");

    // A colliding hash with different prompt text must miss.
    Prompt collider = prompt;
    collider.text += " tampered";
    CHECK_FALSE(reloaded.lookup(collider).has_value());

    std::filesystem::remove(file);
}

TEST_CASE("corrupt cache lines are skipped with a warning") {
    auto dir = scratch_dir();
    auto file = dir / "corrupt.jsonl";
    Prompt prompt = compose(abdominal(), "Record date: unknown\nx", "gpt-4");
    {
        ResponseCache cache(file);
        cache.store(prompt, "gpt-4", "Yes.");
    }
    std::string bytes = read_file(file);
    write_file(file, "this is not json\n" + bytes + "{\"content_hash\":\"zz\"}\n");
    Warnings warnings;
    ResponseCache cache(file, &warnings);
    CHECK(cache.size() == 1);
    CHECK(cache.lookup(prompt) == "Yes.");
    CHECK(warnings.size() == 2);
    std::filesystem::remove(file);
}

TEST_CASE("query consults the cache before the backend and stores new answers") {
    auto dir = scratch_dir();
    auto file = dir / "query.jsonl";
    std::filesystem::remove(file);
    ResponseCache cache(file);
    MockBackend mock({}, {}, std::string("Yes."), "m");
    Prompt prompt = compose(abdominal(), "Record date: unknown\nx", "m");

    QueryResult first = query(mock, &cache, prompt);
    CHECK(first.raw == "Yes.");
    CHECK(first.source == AnswerSource::mock);
    CHECK(mock.calls() == 1);

    QueryResult second = query(mock, &cache, prompt);
    CHECK(second.raw == "Yes.");
    CHECK(second.source == AnswerSource::cache);
    CHECK(mock.calls() == 1);  // no second backend call
    std::filesystem::remove(file);
}

TEST_CASE("decide takes the no-evidence default on empty summaries") {
    MockBackend mock({}, {}, std::nullopt, "m");  // would throw if consulted
    AnswerRecord record = decide("p1", abdominal(), "", mock, nullptr);
    CHECK(record.label == Label::not_met);
    CHECK(record.source == AnswerSource::no_evidence_default);
    CHECK(record.raw_answer.empty());
    CHECK(mock.calls() == 0);

    AnswerRecord inverted = decide("p1", english(), "", mock, nullptr);
    CHECK(inverted.label == Label::met);
}

TEST_CASE("decide retries an unparseable answer with a strict instruction") {
    Criterion c = abdominal();
    Prompt first = compose(c, "Record date: unknown\nHad surgery.", "m");
    Prompt retry;
    retry.text = first.text + "\n\nAnswer with exactly one word: yes or no.";
    retry.content_hash = content_hash("m", retry.text);

    MockBackend mock({{first.content_hash, "It is likely."}, {retry.content_hash, "Yes."}},
                     {}, std::nullopt, "m");
    AnswerRecord record = decide("p1", c, "Record date: unknown\nHad surgery.", mock, nullptr);
    CHECK(record.parsed == Parsed::yes);
    CHECK(record.label == Label::met);
    CHECK(record.raw_answer == "Yes.");
    CHECK(record.prompt_hash == retry.content_hash);
    CHECK(mock.calls() == 2);
}

TEST_CASE("decide falls back to the criterion default when the retry stays unparseable") {
    MockBackend mock({}, {}, std::string("The patient definitely qualifies."), "m");
    AnswerRecord record =
        decide("p1", abdominal(), "Record date: unknown\nHad surgery.", mock, nullptr);
    CHECK(record.parsed == Parsed::unparseable);
    CHECK(record.label == Label::not_met);  // ABDOMINAL no-evidence default
    CHECK(mock.calls() == 2);

    AnswerRecord inverted =
        decide("p1", english(), "Record date: unknown\nSpeaks another language.", mock, nullptr);
    CHECK(inverted.label == Label::met);  // ENGLISH default
}

TEST_CASE("answer records serialize with a stable key order") {
    AnswerRecord record;
    record.patient_id = "p1";
    record.criterion_id = "ABDOMINAL";
    record.prompt_hash = "abc";
    record.raw_answer = "Yes.";
    record.parsed = Parsed::yes;
    record.label = Label::met;
    record.source = AnswerSource::mock;
    CHECK(answer_record_to_json(record) ==
          R"({"patient_id":"p1","criterion_id":"ABDOMINAL","prompt_hash":"abc",)"
          R"("raw_answer":"Yes.","parsed":"yes","label":"met","source":"mock"})");
}
