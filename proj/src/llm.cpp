#include "llm.hpp"

#include <cctype>
#include <chrono>
#include <fstream>
#include <thread>

#include "json.hpp"

#ifdef COHORTSIEVE_HAVE_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include "httplib.h"

namespace cohortsieve {

Prompt compose(const Criterion& criterion, std::string_view rendered_summary,
               std::string_view model_name) {
    if (rendered_summary.empty()) {
        raise_data("criterion " + criterion.id +
                   ": refusing to compose a prompt over an empty summary");
    }
    std::string body = replace_all(rendered_summary, "```", "'''");
    std::string text;
    text.reserve(criterion.prompt_question.size() + body.size() + 64);
    text += criterion.prompt_question;
    text += " The text is delimited with triple backticks.";
    text += "\n\ntext: ```";
    text += body;
    text += "```";
    Prompt prompt;
    prompt.criterion_id = criterion.id;
    prompt.content_hash = content_hash(model_name, text);
    prompt.text = std::move(text);
    return prompt;
}

Parsed parse_answer(std::string_view raw_reply) {
    std::size_t begin = 0, end = raw_reply.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(raw_reply[begin]))) ++begin;
    std::size_t token_end = begin;
    while (token_end < end &&
           !std::isspace(static_cast<unsigned char>(raw_reply[token_end]))) {
        ++token_end;
    }
    std::string_view token = raw_reply.substr(begin, token_end - begin);
    while (!token.empty() && std::ispunct(static_cast<unsigned char>(token.front()))) {
        token.remove_prefix(1);
    }
    while (!token.empty() && std::ispunct(static_cast<unsigned char>(token.back()))) {
        token.remove_suffix(1);
    }
    std::string lowered = to_lower(token);
    if (lowered == "yes") return Parsed::yes;
    if (lowered == "no") return Parsed::no;
    return Parsed::unparseable;
}

Label classify(Parsed parsed, const Criterion& criterion) {
    switch (parsed) {
        case Parsed::yes: return criterion.yes_means;
        case Parsed::no: return flip(criterion.yes_means);
        case Parsed::unparseable: break;
    }
    raise_data("criterion " + criterion.id + ": cannot classify an unparseable answer");
}

std::string_view answer_source_text(AnswerSource source) {
    switch (source) {
        case AnswerSource::live: return "live";
        case AnswerSource::cache: return "cache";
        case AnswerSource::mock: return "mock";
        case AnswerSource::no_evidence_default: return "no-evidence-default";
    }
    return "unknown";
}

namespace {

std::string_view parsed_text(Parsed parsed) {
    switch (parsed) {
        case Parsed::yes: return "yes";
        case Parsed::no: return "no";
        case Parsed::unparseable: break;
    }
    return "unparseable";
}

}  // namespace

std::string answer_record_to_json(const AnswerRecord& record) {
    nlohmann::ordered_json doc;
    doc["patient_id"] = record.patient_id;
    doc["criterion_id"] = record.criterion_id;
    doc["prompt_hash"] = record.prompt_hash;
    doc["raw_answer"] = record.raw_answer;
    doc["parsed"] = std::string(parsed_text(record.parsed));
    doc["label"] = std::string(label_text(record.label));
    doc["source"] = std::string(answer_source_text(record.source));
    return doc.dump();
}

MockBackend::MockBackend(std::map<std::string, std::string> by_hash, std::vector<Rule> rules,
                         std::optional<std::string> default_answer, std::string model_name)
    : by_hash_(std::move(by_hash)),
      rules_(std::move(rules)),
      default_answer_(std::move(default_answer)),
      model_(std::move(model_name)) {}

MockBackend::MockBackend(MockBackend&& other) noexcept
    : by_hash_(std::move(other.by_hash_)),
      rules_(std::move(other.rules_)),
      default_answer_(std::move(other.default_answer_)),
      model_(std::move(other.model_)),
      calls_(other.calls_.load()) {}

MockBackend MockBackend::from_file(const std::filesystem::path& script) {
    return from_json_text(read_file(script));
}

MockBackend MockBackend::from_json_text(std::string_view json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        raise_usage(std::string("bad mock script JSON: ") + e.what());
    }
    std::map<std::string, std::string> by_hash;
    if (doc.contains("by_hash")) {
        for (const auto& [hash, answer] : doc["by_hash"].items()) {
            by_hash[hash] = answer.get<std::string>();
        }
    }
    std::vector<Rule> rules;
    if (doc.contains("rules")) {
        for (const auto& entry : doc["rules"]) {
            Rule rule;
            rule.question_contains = entry.value("question_contains", "");
            rule.text_contains = entry.value("text_contains", "");
            if (!entry.contains("answer")) raise_usage("mock rule without an answer");
            rule.answer = entry["answer"].get<std::string>();
            rules.push_back(std::move(rule));
        }
    }
    std::optional<std::string> default_answer;
    if (doc.contains("default")) default_answer = doc["default"].get<std::string>();
    std::string model = doc.value("model", "scripted-mock");
    return MockBackend(std::move(by_hash), std::move(rules), std::move(default_answer),
                       std::move(model));
}

std::string MockBackend::complete(const Prompt& prompt) {
    calls_.fetch_add(1);
    auto hit = by_hash_.find(prompt.content_hash);
    if (hit != by_hash_.end()) return hit->second;

    std::string_view head = prompt.text;
    std::string_view body = prompt.text;
    std::size_t fence = prompt.text.find(kFenceIntro);
    if (fence != std::string::npos) {
        head = std::string_view(prompt.text).substr(0, fence);
        body = std::string_view(prompt.text).substr(fence + kFenceIntro.size());
    }
    for (const Rule& rule : rules_) {
        if (contains_ci(head, rule.question_contains) &&
            contains_ci(body, rule.text_contains)) {
            return rule.answer;
        }
    }
    if (default_answer_) return *default_answer_;
    raise_transport("mock script has no answer for prompt " + prompt.content_hash);
}

namespace {

struct ParsedUrl {
    std::string origin;       // scheme://host[:port]
    std::string path_prefix;  // possibly empty, no trailing slash
};

ParsedUrl parse_base_url(const std::string& base_url) {
    std::size_t scheme = base_url.find("://");
    if (scheme == std::string::npos) {
        raise_usage("backend base_url must start with http:// or https://");
    }
    std::size_t path = base_url.find('/', scheme + 3);
    ParsedUrl out;
    if (path == std::string::npos) {
        out.origin = base_url;
    } else {
        out.origin = base_url.substr(0, path);
        out.path_prefix = base_url.substr(path);
        while (!out.path_prefix.empty() && out.path_prefix.back() == '/') {
            out.path_prefix.pop_back();
        }
    }
    return out;
}

HttpResponse default_transport(const std::string& url,
                               const std::vector<std::pair<std::string, std::string>>& headers,
                               const std::string& body, double timeout_seconds) {
    ParsedUrl parsed = parse_base_url(url);
    // url arrives as origin + full path; re-split to feed httplib.
    httplib::Client client(parsed.origin);
    client.set_connection_timeout(std::chrono::milliseconds(
        static_cast<long>(timeout_seconds * 1000)));
    client.set_read_timeout(std::chrono::milliseconds(static_cast<long>(timeout_seconds * 1000)));
    client.set_write_timeout(std::chrono::milliseconds(static_cast<long>(timeout_seconds * 1000)));
    httplib::Headers request_headers;
    for (const auto& [key, value] : headers) request_headers.emplace(key, value);
    auto result = client.Post(parsed.path_prefix.empty() ? "/" : parsed.path_prefix,
                              request_headers, body, "application/json");
    HttpResponse response;
    if (!result) {
        response.status = 0;
        response.error = httplib::to_string(result.error());
        return response;
    }
    response.status = result->status;
    response.body = result->body;
    return response;
}

bool retryable(const HttpResponse& response) {
    return response.status == 0 || response.status == 408 || response.status == 429 ||
           response.status >= 500;
}

std::string status_summary(const HttpResponse& response) {
    if (response.status == 0) {
        return "transport failure: " + (response.error.empty() ? "unknown" : response.error);
    }
    std::string summary = "HTTP " + std::to_string(response.status);
    if (!response.body.empty()) {
        summary += ": " + response.body.substr(0, 200);
    }
    return summary;
}

}  // namespace

LiveBackend::LiveBackend(BackendConfig config, std::string api_key)
    : LiveBackend(std::move(config), std::move(api_key), nullptr, nullptr) {}

LiveBackend::LiveBackend(BackendConfig config, std::string api_key, TransportFn transport,
                         SleepFn sleep)
    : config_(std::move(config)), api_key_(std::move(api_key)),
      transport_(std::move(transport)), sleep_(std::move(sleep)) {
    if (api_key_.empty()) {
        raise_usage("COHORT_SIEVE_API_KEY is not set; the live backend needs an API key");
    }
    if (config_.max_retries < 1) raise_usage("backend max_retries must be at least 1");
    if (!transport_) transport_ = default_transport;
    if (!sleep_) {
        sleep_ = [](int ms) { std::this_thread::sleep_for(std::chrono::milliseconds(ms)); };
    }
}

std::string LiveBackend::complete(const Prompt& prompt) {
    nlohmann::ordered_json request;
    request["model"] = config_.model_name;
    request["temperature"] = config_.temperature;
    request["messages"] = nlohmann::ordered_json::array(
        {nlohmann::ordered_json{{"role", "user"}, {"content", prompt.text}}});
    std::string body = request.dump();

    ParsedUrl parsed = parse_base_url(config_.base_url);
    std::string url = parsed.origin + parsed.path_prefix + "/chat/completions";
    std::vector<std::pair<std::string, std::string>> headers = {
        {"Authorization", "Bearer " + api_key_},
    };

    int delay_ms = config_.backoff_initial_ms;
    std::string last_failure;
    for (int attempt = 1; attempt <= config_.max_retries; ++attempt) {
        HttpResponse response = transport_(url, headers, body, config_.timeout_seconds);
        if (response.status == 200) {
            try {
                auto doc = nlohmann::json::parse(response.body);
                return doc.at("choices").at(0).at("message").at("content").get<std::string>();
            } catch (const nlohmann::json::exception& e) {
                raise_transport(std::string("malformed completion response: ") + e.what());
            }
        }
        if (response.status == 401 || response.status == 403) {
            raise_transport("authentication failed (" + status_summary(response) + ")");
        }
        if (!retryable(response)) {
            raise_transport("request failed (" + status_summary(response) + ")");
        }
        last_failure = status_summary(response);
        if (attempt < config_.max_retries) {
            sleep_(delay_ms);
            delay_ms *= 2;
        }
    }
    raise_transport("request failed after " + std::to_string(config_.max_retries) +
                    " attempts; last error: " + last_failure);
}

std::string CacheOnlyBackend::complete(const Prompt& prompt) {
    raise_transport("cache miss for prompt " + prompt.content_hash +
                    " (backend is cache-only)");
}

ResponseCache::ResponseCache(std::filesystem::path file, Warnings* warnings)
    : file_(std::move(file)) {
    std::ifstream in(file_, std::ios::binary);
    if (!in) return;  // first run: the file appears on the first store
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            auto doc = nlohmann::json::parse(line);
            Entry entry{doc.at("prompt").get<std::string>(),
                        doc.at("answer").get<std::string>()};
            entries_[doc.at("content_hash").get<std::string>()] = std::move(entry);
        } catch (const nlohmann::json::exception&) {
            warn(warnings, "skipping corrupt cache line " + std::to_string(line_no) + " in " +
                               file_.string());
        }
    }
}

std::optional<std::string> ResponseCache::lookup(const Prompt& prompt) const {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(prompt.content_hash);
    if (it == entries_.end()) return std::nullopt;
    if (it->second.prompt != prompt.text) return std::nullopt;  // collision guard
    return it->second.answer;
}

void ResponseCache::store(const Prompt& prompt, std::string_view model,
                          std::string_view answer) {
    if (file_.empty()) return;
    std::lock_guard lock(mutex_);
    if (entries_.count(prompt.content_hash)) return;
    entries_[prompt.content_hash] = Entry{prompt.text, std::string(answer)};
    nlohmann::ordered_json doc;
    doc["content_hash"] = prompt.content_hash;
    doc["model"] = std::string(model);
    doc["prompt"] = prompt.text;
    doc["answer"] = std::string(answer);
    doc["timestamp"] = utc_timestamp();
    if (file_.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(file_.parent_path(), ec);
    }
    std::ofstream out(file_, std::ios::binary | std::ios::app);
    if (!out) raise_data("cannot append to response cache: " + file_.string());
    out << doc.dump() << "\n";
    out.flush();
}

std::size_t ResponseCache::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

QueryResult query(Backend& backend, ResponseCache* cache, const Prompt& prompt) {
    if (cache) {
        if (auto cached = cache->lookup(prompt)) {
            return QueryResult{*cached, AnswerSource::cache};
        }
    }
    std::string answer = backend.complete(prompt);
    if (cache) cache->store(prompt, backend.model(), answer);
    return QueryResult{std::move(answer), backend.source()};
}

AnswerRecord decide(const std::string& patient_id, const Criterion& criterion,
                    std::string_view rendered_summary, Backend& backend,
                    ResponseCache* cache) {
    AnswerRecord record;
    record.patient_id = patient_id;
    record.criterion_id = criterion.id;

    if (rendered_summary.empty()) {
        record.label = criterion.no_evidence_default;
        record.source = AnswerSource::no_evidence_default;
        return record;
    }

    Prompt prompt = compose(criterion, rendered_summary, backend.model());
    QueryResult first = query(backend, cache, prompt);
    record.prompt_hash = prompt.content_hash;
    record.raw_answer = first.raw;
    record.parsed = parse_answer(first.raw);
    record.source = first.source;
    if (record.parsed != Parsed::unparseable) {
        record.label = classify(record.parsed, criterion);
        return record;
    }

    // One strict retry with an explicit one-word instruction.
    Prompt retry;
    retry.criterion_id = criterion.id;
    retry.text = prompt.text + "\n\nAnswer with exactly one word: yes or no.";
    retry.content_hash = content_hash(backend.model(), retry.text);
    QueryResult second = query(backend, cache, retry);
    record.prompt_hash = retry.content_hash;
    record.raw_answer = second.raw;
    record.parsed = parse_answer(second.raw);
    record.source = second.source;
    if (record.parsed != Parsed::unparseable) {
        record.label = classify(record.parsed, criterion);
        return record;
    }
    record.label = criterion.no_evidence_default;
    return record;
}

}  // namespace cohortsieve
