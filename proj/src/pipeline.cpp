#include "pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <thread>

#include "json.hpp"

#include "annotate.hpp"
#include "corpus.hpp"
#include "criteria.hpp"
#include "eval.hpp"
#include "ontology.hpp"
#include "summarize.hpp"

namespace cohortsieve {

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, std::string_view value) {
    std::filesystem::path p{std::string(value)};
    if (p.empty() || p.is_absolute()) return p;
    return base / p;
}

std::string path_or_empty(const std::filesystem::path& p) { return p.string(); }

void require(bool condition, const std::string& message) {
    if (!condition) raise_usage(message);
}

std::filesystem::path codelist_path(const RunConfig& config, std::string_view criterion_id) {
    return config.run_dir / ("codelist_" + std::string(criterion_id) + ".json");
}

void snapshot_config(const RunConfig& config) {
    std::filesystem::create_directories(config.run_dir);
    write_file(config.run_dir / "config.json", config.to_json());
}

ConceptGraph load_graph(const RunConfig& config) {
    if (config.ontology_format == "simple") {
        return load_simple(config.ontology_simple);
    }
    if (config.ontology_format == "rf2") {
        return load_rf2(config.rf2_concepts, config.rf2_descriptions,
                        config.rf2_relationships);
    }
    raise_usage("no ontology configured; set ontology.format to 'simple' or 'rf2'");
}

std::vector<std::filesystem::path> split_dirs(const RunConfig& config) {
    if (config.split == "all") {
        return {config.data_dir / "train", config.data_dir / "test"};
    }
    return {config.data_dir / config.split};
}

std::vector<PatientRecord> load_records(const std::vector<std::filesystem::path>& dirs) {
    std::vector<PatientRecord> records;
    for (const auto& dir : dirs) {
        for (const auto& file : list_patient_files(dir)) {
            records.push_back(load_patient_file(file));
        }
    }
    std::sort(records.begin(), records.end(),
              [](const PatientRecord& a, const PatientRecord& b) {
                  return a.patient_id < b.patient_id;
              });
    return records;
}

std::unique_ptr<Backend> make_backend(const RunConfig& config) {
    const BackendConfig& b = config.backend;
    if (b.kind == "mock") {
        require(!b.mock_script.empty(), "mock backend needs backend.mock_script");
        return std::make_unique<MockBackend>(MockBackend::from_file(b.mock_script));
    }
    if (b.kind == "cache-only") {
        return std::make_unique<CacheOnlyBackend>(b.model_name);
    }
    if (b.kind == "live") {
        const char* key = std::getenv("COHORT_SIEVE_API_KEY");
        return std::make_unique<LiveBackend>(b, key ? key : "");
    }
    raise_usage("unknown backend kind '" + b.kind + "'");
}

std::string annotation_json(std::string_view patient_id, const Annotation& a) {
    nlohmann::ordered_json doc;
    doc["patient_id"] = std::string(patient_id);
    doc["note_index"] = a.note_index;
    doc["sentence_index"] = a.sentence_index;
    doc["start"] = a.start;
    doc["end"] = a.end;
    doc["concept_id"] = std::to_string(a.concept_id);
    doc["matched_term"] = a.matched_term;
    return doc.dump();
}

}  // namespace

RunConfig RunConfig::load(const std::filesystem::path& config_path,
                          const std::filesystem::path& run_dir_override) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file(config_path));
    } catch (const nlohmann::json::exception& e) {
        raise_usage("bad run config " + config_path.string() + ": " + e.what());
    }
    std::filesystem::path base = std::filesystem::absolute(config_path).parent_path();

    RunConfig config;
    auto path_field = [&](const char* key) -> std::filesystem::path {
        if (!doc.contains(key) || doc[key].is_null()) return {};
        return resolve(base, doc[key].get<std::string>());
    };
    config.data_dir = path_field("data_dir");
    config.criteria_config = path_field("criteria_config");
    config.run_dir = path_field("run_dir");

    if (doc.contains("ontology") && !doc["ontology"].is_null()) {
        const auto& onto = doc["ontology"];
        config.ontology_format = onto.value("format", "");
        if (config.ontology_format == "simple") {
            if (onto.contains("path")) {
                config.ontology_simple = resolve(base, onto["path"].get<std::string>());
            }
            require(!config.ontology_simple.empty(), "ontology.path is required for simple format");
        } else if (config.ontology_format == "rf2") {
            for (const char* key : {"concepts", "descriptions", "relationships"}) {
                require(onto.contains(key), std::string("ontology.") + key + " is required");
            }
            config.rf2_concepts = resolve(base, onto["concepts"].get<std::string>());
            config.rf2_descriptions = resolve(base, onto["descriptions"].get<std::string>());
            config.rf2_relationships = resolve(base, onto["relationships"].get<std::string>());
        } else {
            raise_usage("ontology.format must be 'simple' or 'rf2'");
        }
    }

    config.scenario = doc.value("scenario", "summarize");
    require(config.scenario == "summarize" || config.scenario == "truncate-only",
            "scenario must be 'summarize' or 'truncate-only'");
    config.hard_temporal_filter = doc.value("hard_temporal_filter", false);
    config.dump_annotations = doc.value("dump_annotations", false);
    if (doc.contains("max_words")) {
        long words = doc["max_words"].get<long>();
        require(words > 0, "max_words must be positive");
        config.max_words = static_cast<std::size_t>(words);
    }
    config.split = doc.value("split", "test");
    require(config.split == "train" || config.split == "test" || config.split == "all",
            "split must be 'train', 'test' or 'all'");

    if (doc.contains("backend")) {
        const auto& backend = doc["backend"];
        config.backend.kind = backend.value("kind", config.backend.kind);
        config.backend.base_url = backend.value("base_url", config.backend.base_url);
        config.backend.model_name = backend.value("model_name", config.backend.model_name);
        config.backend.temperature = backend.value("temperature", 0.0);
        config.backend.max_retries = backend.value("max_retries", config.backend.max_retries);
        config.backend.timeout_seconds =
            backend.value("timeout_seconds", config.backend.timeout_seconds);
        config.backend.request_concurrency_limit =
            backend.value("request_concurrency_limit", config.backend.request_concurrency_limit);
        config.backend.backoff_initial_ms =
            backend.value("backoff_initial_ms", config.backend.backoff_initial_ms);
        if (backend.contains("mock_script")) {
            config.backend.mock_script = resolve(base, backend["mock_script"].get<std::string>());
        }
    }
    require(config.backend.temperature == 0.0,
            "backend.temperature must be 0 (runs are deterministic by contract)");
    require(config.backend.kind == "mock" || config.backend.kind == "live" ||
                config.backend.kind == "cache-only",
            "backend.kind must be 'mock', 'live' or 'cache-only'");
    require(config.backend.max_retries >= 1, "backend.max_retries must be at least 1");
    require(config.backend.request_concurrency_limit >= 1,
            "backend.request_concurrency_limit must be at least 1");

    if (!run_dir_override.empty()) config.run_dir = run_dir_override;
    require(!config.run_dir.empty(), "run_dir is required (config key or --run-dir)");
    return config;
}

std::string RunConfig::to_json() const {
    nlohmann::ordered_json doc;
    doc["data_dir"] = path_or_empty(data_dir);
    nlohmann::ordered_json onto;
    onto["format"] = ontology_format;
    if (ontology_format == "simple") {
        onto["path"] = path_or_empty(ontology_simple);
    } else if (ontology_format == "rf2") {
        onto["concepts"] = path_or_empty(rf2_concepts);
        onto["descriptions"] = path_or_empty(rf2_descriptions);
        onto["relationships"] = path_or_empty(rf2_relationships);
    }
    doc["ontology"] = std::move(onto);
    doc["criteria_config"] = path_or_empty(criteria_config);
    doc["run_dir"] = path_or_empty(run_dir);
    doc["scenario"] = scenario;
    doc["hard_temporal_filter"] = hard_temporal_filter;
    doc["dump_annotations"] = dump_annotations;
    doc["max_words"] = max_words;
    doc["split"] = split;
    nlohmann::ordered_json b;
    b["kind"] = backend.kind;
    b["base_url"] = backend.base_url;
    b["model_name"] = backend.model_name;
    b["temperature"] = backend.temperature;
    b["max_retries"] = backend.max_retries;
    b["timeout_seconds"] = backend.timeout_seconds;
    b["request_concurrency_limit"] = backend.request_concurrency_limit;
    b["backoff_initial_ms"] = backend.backoff_initial_ms;
    b["mock_script"] = path_or_empty(backend.mock_script);
    doc["backend"] = std::move(b);
    return doc.dump(2) + "\n";
}

void cmd_ontology_build(const RunConfig& config) {
    require(!config.criteria_config.empty(), "criteria_config is required");
    snapshot_config(config);

    Warnings warnings;
    CriteriaRegistry registry = load_registry(config.criteria_config, &warnings);
    ConceptGraph graph = load_graph(config);
    for (const auto& w : validate_seeds(registry, graph)) warnings.push_back(w);
    for (const auto& w : warnings) log_warn(w);

    for (const Criterion& criterion : registry.all()) {
        CodeList list;
        if (criterion.seed_concepts.empty()) {
            list.criterion_id = criterion.id;  // empty list; decided by defaults downstream
        } else {
            list = build_code_list(graph, criterion.id, criterion.seed_concepts);
        }
        write_file(codelist_path(config, criterion.id), code_list_to_json(list));
    }
}

void cmd_classify(const RunConfig& config) {
    require(!config.criteria_config.empty(), "criteria_config is required");
    require(!config.data_dir.empty(), "data_dir is required");
    snapshot_config(config);

    Warnings registry_warnings;
    CriteriaRegistry registry = load_registry(config.criteria_config, &registry_warnings);
    for (const auto& w : registry_warnings) log_warn(w);

    std::vector<PatientRecord> records = load_records(split_dirs(config));
    if (records.empty()) raise_data("no patient records found for split '" + config.split + "'");

    const bool summarizing = config.scenario == "summarize";
    std::map<std::string, TermMatcher> matchers;
    std::map<std::string, CodeList> code_lists;
    if (summarizing) {
        ConceptGraph graph = load_graph(config);
        for (const Criterion& criterion : registry.all()) {
            auto path = codelist_path(config, criterion.id);
            if (!std::filesystem::exists(path)) {
                raise_data("missing " + path.string() + "; run 'ontology build' first");
            }
            CodeList list = code_list_from_json(read_file(path));
            if (!list.codes.empty()) {
                matchers.emplace(criterion.id, TermMatcher(term_index(graph, list)));
            } else {
                matchers.emplace(criterion.id, TermMatcher());
            }
            code_lists.emplace(criterion.id, std::move(list));
        }
    }

    std::filesystem::create_directories(config.run_dir / "summaries");
    std::string annotations_dump;

    // Phase 1 (serial): summaries per (patient, criterion), reusing cached files.
    struct Task {
        const PatientRecord* record;
        const Criterion* criterion;
        std::string rendered;
    };
    std::vector<Task> tasks;
    for (const PatientRecord& record : records) {
        std::vector<std::vector<Sentence>> sentences_by_note;
        std::string full_text;
        if (summarizing) {
            sentences_by_note.resize(record.notes.size());
            for (const Note& note : record.notes) {
                sentences_by_note[note.index] = segment(note.text, note.index);
            }
        } else {
            full_text = truncate_words(render(full_text_summary(record)), config.max_words);
        }

        for (const Criterion& criterion : registry.all()) {
            Task task{&record, &criterion, {}};
            if (!summarizing) {
                task.rendered = full_text;
                tasks.push_back(std::move(task));
                continue;
            }

            auto summary_path =
                config.run_dir / "summaries" / (record.patient_id + "__" + criterion.id + ".json");
            Summary summary;
            if (std::filesystem::exists(summary_path)) {
                summary = summary_from_json(read_file(summary_path));
            } else {
                std::vector<Annotation> annotations;
                const TermMatcher& matcher = matchers.at(criterion.id);
                for (const auto& sentences : sentences_by_note) {
                    auto batch = matcher.annotate(sentences);
                    annotations.insert(annotations.end(),
                                       std::make_move_iterator(batch.begin()),
                                       std::make_move_iterator(batch.end()));
                }
                if (config.dump_annotations) {
                    for (const Annotation& a : annotations) {
                        annotations_dump += annotation_json(record.patient_id, a) + "\n";
                    }
                }
                summary = extract(record, sentences_by_note, annotations,
                                  code_lists.at(criterion.id));
                write_file(summary_path, summary_to_json(summary));
            }

            if (config.hard_temporal_filter && criterion.temporal_window_days) {
                try {
                    Date current = current_time(record);
                    summary = temporal_filter(summary, current, *criterion.temporal_window_days);
                } catch (const Error&) {
                    log_warn("record " + record.patient_id +
                             " has no dated notes; skipping the temporal filter for " +
                             criterion.id);
                }
            }
            task.rendered = truncate_words(render(summary), config.max_words);
            tasks.push_back(std::move(task));
        }
    }
    if (config.dump_annotations) {
        write_file(config.run_dir / "annotations.jsonl", annotations_dump);
    }

    // Phase 2 (parallel): backend queries with a shared response cache.
    std::unique_ptr<Backend> backend = make_backend(config);
    ResponseCache cache(config.run_dir / "llm_cache.jsonl");

    std::vector<AnswerRecord> answers(tasks.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&] {
        while (!failed.load()) {
            std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            try {
                answers[i] = decide(tasks[i].record->patient_id, *tasks[i].criterion,
                                    tasks[i].rendered, *backend, &cache);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                failed.store(true);
                return;
            }
        }
    };
    std::size_t worker_count = std::min<std::size_t>(
        static_cast<std::size_t>(config.backend.request_concurrency_limit), tasks.size());
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < worker_count; ++i) pool.emplace_back(worker);
    for (auto& thread : pool) thread.join();
    if (first_error) std::rethrow_exception(first_error);

    // Tasks were built in (patient_id, criterion_id) order already.
    std::string answers_jsonl;
    std::string predictions_csv = "patient_id,criterion,label\n";
    for (const AnswerRecord& record : answers) {
        if (record.parsed == Parsed::unparseable &&
            record.source != AnswerSource::no_evidence_default) {
            log_warn("unparseable answer for " + record.patient_id + "/" +
                     record.criterion_id + " after retry; using the no-evidence default");
        }
        answers_jsonl += answer_record_to_json(record) + "\n";
        predictions_csv += record.patient_id + "," + record.criterion_id + "," +
                           std::string(label_text(record.label)) + "\n";
    }
    write_file(config.run_dir / "answers.jsonl", answers_jsonl);
    write_file(config.run_dir / "predictions.csv", predictions_csv);
}

std::string cmd_evaluate(const RunConfig& config,
                         const std::filesystem::path& gold_dir_override) {
    auto predictions_path = config.run_dir / "predictions.csv";
    if (!std::filesystem::exists(predictions_path)) {
        raise_data("missing " + predictions_path.string() + "; run 'classify' first");
    }

    // criterion -> patient -> label
    std::map<std::string, std::map<std::string, Label>> predictions;
    {
        std::string csv = read_file(predictions_path);
        std::size_t pos = 0;
        bool header = true;
        std::size_t line_no = 0;
        while (pos < csv.size()) {
            std::size_t end = csv.find('\n', pos);
            if (end == std::string::npos) end = csv.size();
            std::string_view line(csv.data() + pos, end - pos);
            pos = end + 1;
            ++line_no;
            if (line.empty()) continue;
            if (header) {
                header = false;
                continue;
            }
            std::size_t first = line.find(',');
            std::size_t second = first == std::string_view::npos
                                     ? std::string_view::npos
                                     : line.find(',', first + 1);
            if (second == std::string_view::npos) {
                raise_data("predictions.csv line " + std::to_string(line_no) +
                           " is not patient,criterion,label");
            }
            std::string patient(line.substr(0, first));
            std::string criterion(line.substr(first + 1, second - first - 1));
            auto label = label_from_text(line.substr(second + 1));
            if (!label) {
                raise_data("predictions.csv line " + std::to_string(line_no) +
                           " has an unknown label");
            }
            predictions[criterion][patient] = *label;
        }
    }

    std::vector<std::filesystem::path> dirs;
    if (!gold_dir_override.empty()) {
        dirs = {gold_dir_override};
    } else {
        require(!config.data_dir.empty(), "data_dir is required to locate gold records");
        dirs = split_dirs(config);
    }
    std::map<std::string, std::map<std::string, Label>> gold;  // criterion -> patient -> label
    std::size_t labeled = 0;
    for (const auto& dir : dirs) {
        for (const auto& file : list_patient_files(dir)) {
            PatientRecord record = load_patient_file(file);
            if (!record.gold_labels) {
                log_warn("record " + record.patient_id + " carries no gold labels; skipping");
                continue;
            }
            ++labeled;
            for (const auto& [criterion, label] : *record.gold_labels) {
                gold[criterion][record.patient_id] = label;
            }
        }
    }
    if (labeled == 0) raise_data("no labeled records found to evaluate against");

    std::vector<std::pair<std::string, ConfusionCounts>> counts;
    for (std::string_view id : kCriterionIds) {
        std::string criterion(id);
        counts.emplace_back(criterion,
                            confusion(gold[criterion], predictions[criterion], criterion));
    }
    AggregateReport report = aggregate(counts);
    std::string table = render_report(report);
    write_file(config.run_dir / "report.txt", table);
    write_file(config.run_dir / "report.tsv", report_to_tsv(report));
    return table;
}

std::string compare_runs(const std::filesystem::path& run_a,
                         const std::filesystem::path& run_b) {
    auto load_rows = [](const std::filesystem::path& run_dir) {
        auto path = run_dir / "report.tsv";
        if (!std::filesystem::exists(path)) {
            raise_data("missing " + path.string() + "; run 'evaluate' first");
        }
        return parse_report_tsv(read_file(path));
    };
    auto rows_a = load_rows(run_a);
    auto rows_b = load_rows(run_b);

    std::map<std::string, double> overall_b;
    constexpr std::size_t kOverallColumn = 7;  // overall_f position in kReportColumns
    for (const auto& row : rows_b) overall_b[row.criterion_id] = row.values[kOverallColumn];

    std::set<std::string> names_a, names_b;
    for (const auto& row : rows_a) names_a.insert(row.criterion_id);
    for (const auto& row : rows_b) names_b.insert(row.criterion_id);
    if (names_a != names_b) {
        raise_data("runs report different criteria sets; cannot compare");
    }

    std::string out;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-17s %9s %9s %9s\n", "criterion", "run_a", "run_b",
                  "delta");
    out += buf;
    for (const auto& row : rows_a) {
        double a = row.values[kOverallColumn];
        double b = overall_b[row.criterion_id];
        long delta_scaled = std::llround((b - a) * 10000.0);
        char delta_buf[32];
        if (delta_scaled == 0) {
            std::snprintf(delta_buf, sizeof(delta_buf), "0.0000");
        } else {
            std::snprintf(delta_buf, sizeof(delta_buf), "%+.4f",
                          static_cast<double>(delta_scaled) / 10000.0);
        }
        std::snprintf(buf, sizeof(buf), "%-17s %9s %9s %9s\n", row.criterion_id.c_str(),
                      format_metric(a).c_str(), format_metric(b).c_str(), delta_buf);
        out += buf;
    }
    return out;
}

}  // namespace cohortsieve
