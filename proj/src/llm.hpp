#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "criteria.hpp"
#include "util.hpp"

namespace cohortsieve {

inline constexpr std::string_view kFenceIntro = "\n\ntext: ```";

struct Prompt {
    std::string criterion_id;
    std::string text;
    std::string content_hash;  // keyed by model + text
};

// Question + fenced summary. Backtick runs inside the summary are replaced
// with ''' so the fence cannot be broken. Empty summaries are an error; the
// no-evidence path must be taken before composing.
Prompt compose(const Criterion& criterion, std::string_view rendered_summary,
               std::string_view model_name);

enum class Parsed { yes, no, unparseable };

// First whitespace token of the reply, surrounding punctuation stripped,
// case-insensitive comparison against yes/no.
Parsed parse_answer(std::string_view raw_reply);

// Maps a parsed answer through the criterion's polarity.
Label classify(Parsed parsed, const Criterion& criterion);

enum class AnswerSource { live, cache, mock, no_evidence_default };
std::string_view answer_source_text(AnswerSource source);

struct AnswerRecord {
    std::string patient_id;
    std::string criterion_id;
    std::string prompt_hash;
    std::string raw_answer;
    Parsed parsed = Parsed::unparseable;
    Label label = Label::not_met;
    AnswerSource source = AnswerSource::no_evidence_default;
};

std::string answer_record_to_json(const AnswerRecord& record);

struct BackendConfig {
    std::string kind = "mock";  // mock | live | cache-only
    std::string base_url = "https://api.openai.com/v1";
    std::string model_name = "gpt-4";
    double temperature = 0.0;  // pinned; anything else is a config error
    int max_retries = 3;       // total attempts
    double timeout_seconds = 60.0;
    int request_concurrency_limit = 4;
    int backoff_initial_ms = 500;
    std::filesystem::path mock_script;
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string complete(const Prompt& prompt) = 0;
    virtual AnswerSource source() const = 0;
    virtual const std::string& model() const = 0;
};

// Scripted mock. Resolution order: exact content-hash answers, then the first
// rule whose question/text substrings both occur (case-insensitively) in the
// prompt head / fenced body, then the default answer.
class MockBackend : public Backend {
public:
    struct Rule {
        std::string question_contains;
        std::string text_contains;
        std::string answer;
    };

    MockBackend(std::map<std::string, std::string> by_hash, std::vector<Rule> rules,
                std::optional<std::string> default_answer,
                std::string model_name = "scripted-mock");
    MockBackend(MockBackend&& other) noexcept;  // the call counter is carried over
    static MockBackend from_file(const std::filesystem::path& script);
    static MockBackend from_json_text(std::string_view json_text);

    std::string complete(const Prompt& prompt) override;
    AnswerSource source() const override { return AnswerSource::mock; }
    const std::string& model() const override { return model_; }
    int calls() const { return calls_.load(); }

private:
    std::map<std::string, std::string> by_hash_;
    std::vector<Rule> rules_;
    std::optional<std::string> default_answer_;
    std::string model_;
    std::atomic<int> calls_{0};
};

struct HttpResponse {
    int status = 0;  // 0 = transport-level failure
    std::string body;
    std::string error;
};

using TransportFn = std::function<HttpResponse(
    const std::string& url, const std::vector<std::pair<std::string, std::string>>& headers,
    const std::string& body, double timeout_seconds)>;
using SleepFn = std::function<void(int milliseconds)>;

// Chat-completions client. Retries timeouts, 408/429 and 5xx with exponential
// backoff; authentication failures and other 4xx are non-retryable.
class LiveBackend : public Backend {
public:
    LiveBackend(BackendConfig config, std::string api_key);
    LiveBackend(BackendConfig config, std::string api_key, TransportFn transport,
                SleepFn sleep);

    std::string complete(const Prompt& prompt) override;
    AnswerSource source() const override { return AnswerSource::live; }
    const std::string& model() const override { return config_.model_name; }

private:
    BackendConfig config_;
    std::string api_key_;
    TransportFn transport_;
    SleepFn sleep_;
};

// Replays a warm cache; any miss is a transport error.
class CacheOnlyBackend : public Backend {
public:
    explicit CacheOnlyBackend(std::string model_name) : model_(std::move(model_name)) {}
    std::string complete(const Prompt& prompt) override;
    AnswerSource source() const override { return AnswerSource::cache; }
    const std::string& model() const override { return model_; }

private:
    std::string model_;
};

// Append-only JSONL keyed by content hash. Lookups verify the stored prompt
// text so hash collisions cannot replay a wrong answer.
class ResponseCache {
public:
    ResponseCache() = default;  // detached: lookups miss, stores are dropped
    explicit ResponseCache(std::filesystem::path file, Warnings* warnings = nullptr);

    std::optional<std::string> lookup(const Prompt& prompt) const;
    void store(const Prompt& prompt, std::string_view model, std::string_view answer);
    std::size_t size() const;

private:
    struct Entry {
        std::string prompt;
        std::string answer;
    };
    mutable std::mutex mutex_;
    std::filesystem::path file_;
    std::map<std::string, Entry> entries_;
};

struct QueryResult {
    std::string raw;
    AnswerSource source = AnswerSource::live;
};

// Cache-first single query; backend answers are appended to the cache.
QueryResult query(Backend& backend, ResponseCache* cache, const Prompt& prompt);

// Full decision for one (patient, criterion): no-evidence default on empty
// summaries, one re-query with an explicit one-word instruction on an
// unparseable reply, then the criterion's default as a last resort.
AnswerRecord decide(const std::string& patient_id, const Criterion& criterion,
                    std::string_view rendered_summary, Backend& backend,
                    ResponseCache* cache);

}  // namespace cohortsieve
