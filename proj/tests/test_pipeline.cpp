#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "doctest.h"
#include "json.hpp"

#include "criteria.hpp"
#include "fixtures.hpp"
#include "ontology.hpp"
#include "pipeline.hpp"
#include "util.hpp"

using namespace cohortsieve;

namespace {

struct Workspace {
    std::filesystem::path root;

    Workspace() {
        root = std::filesystem::temp_directory_path() / "cohortsieve_pipeline_test";
        std::filesystem::remove_all(root);
        FixtureSpec spec;
        spec.patients = 8;
        spec.seed = 9;
        spec.train_fraction = 0.25;
        generate_fixtures(root, spec);
        set_log_sink([](std::string_view) {});  // keep test output quiet
    }
    ~Workspace() {
        set_log_sink(nullptr);
        std::filesystem::remove_all(root);
    }

    std::filesystem::path write_config(const std::string& name, const std::string& scenario,
                                       bool hard_filter) {
        nlohmann::ordered_json doc;
        doc["data_dir"] = ".";
        doc["ontology"] = {{"format", "simple"}, {"path", "ontology.tsv"}};
        doc["criteria_config"] = "criteria.json";
        doc["run_dir"] = name;
        doc["scenario"] = scenario;
        doc["hard_temporal_filter"] = hard_filter;
        doc["split"] = "test";
        doc["backend"] = {{"kind", "mock"}, {"mock_script", "mock_script.json"}};
        auto path = root / (name + ".json");
        write_file(path, doc.dump(2));
        return path;
    }
};

std::map<std::string, int> source_counts(const std::filesystem::path& answers) {
    std::map<std::string, int> counts;
    for (const auto& line : split(read_file(answers), '\n')) {
        if (trim(line).empty()) continue;
        counts[nlohmann::json::parse(line).at("source").get<std::string>()]++;
    }
    return counts;
}

}  // namespace

TEST_CASE("run config loads with relative paths resolved against the file") {
    Workspace ws;
    auto path = ws.write_config("run1", "summarize", true);
    RunConfig config = RunConfig::load(path);
    CHECK(config.data_dir == ws.root / ".");
    CHECK(config.ontology_format == "simple");
    CHECK(config.ontology_simple == ws.root / "ontology.tsv");
    CHECK(config.run_dir == ws.root / "run1");
    CHECK(config.scenario == "summarize");
    CHECK(config.hard_temporal_filter);
    CHECK(config.max_words == 4000);
    CHECK(config.split == "test");
    CHECK(config.backend.kind == "mock");
    CHECK(config.backend.temperature == 0.0);

    RunConfig overridden = RunConfig::load(path, "/elsewhere/run");
    CHECK(overridden.run_dir == std::filesystem::path("/elsewhere/run"));
}

TEST_CASE("run config rejects bad values") {
    Workspace ws;
    auto bad = [&](const std::string& body) {
        auto path = ws.root / "bad.json";
        write_file(path, body);
        CHECK_THROWS_AS(RunConfig::load(path), Error);
    };
    bad("{not json");
    bad(R"({"run_dir":"r","scenario":"expand"})");
    bad(R"({"run_dir":"r","split":"validation"})");
    bad(R"({"run_dir":"r","backend":{"kind":"psychic"}})");
    bad(R"({"run_dir":"r","backend":{"temperature":0.7}})");
    bad(R"({"run_dir":"r","backend":{"max_retries":0}})");
    bad(R"({"run_dir":"r","max_words":0})");
    bad(R"({"run_dir":"r","ontology":{"format":"simple"}})");
    bad(R"({"scenario":"summarize"})");  // no run_dir anywhere
}

TEST_CASE("config snapshot round-trips through to_json") {
    Workspace ws;
    auto path = ws.write_config("run2", "truncate-only", false);
    RunConfig config = RunConfig::load(path);
    std::string snapshot = config.to_json();
    auto doc = nlohmann::json::parse(snapshot);
    CHECK(doc["scenario"] == "truncate-only");
    CHECK(doc["backend"]["kind"] == "mock");
    CHECK(doc["max_words"] == 4000);
}

TEST_CASE("ontology build writes one code list per criterion") {
    Workspace ws;
    RunConfig config = RunConfig::load(ws.write_config("run3", "summarize", true));
    cmd_ontology_build(config);
    for (std::string_view id : kCriterionIds) {
        auto path = config.run_dir / ("codelist_" + std::string(id) + ".json");
        REQUIRE_MESSAGE(std::filesystem::exists(path), std::string(id));
        CodeList list = code_list_from_json(read_file(path));
        CHECK(list.criterion_id == id);
        CHECK(list.codes.size() >= 4);  // toy seed + evidence + blind + deep
    }
    CHECK(std::filesystem::exists(config.run_dir / "config.json"));
}

TEST_CASE("classify requires code lists in summarize mode") {
    Workspace ws;
    RunConfig config = RunConfig::load(ws.write_config("run4", "summarize", true));
    try {
        cmd_classify(config);
        FAIL("unreachable");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("ontology build") != std::string::npos);
    }
}

TEST_CASE("classify then evaluate produces predictions matching the manifest") {
    Workspace ws;
    RunConfig config = RunConfig::load(ws.write_config("run5", "summarize", true));
    cmd_ontology_build(config);
    cmd_classify(config);

    auto answers = config.run_dir / "answers.jsonl";
    auto predictions = config.run_dir / "predictions.csv";
    REQUIRE(std::filesystem::exists(answers));
    REQUIRE(std::filesystem::exists(predictions));

    // First run answers come from the mock or the no-evidence default only.
    auto counts = source_counts(answers);
    CHECK(counts.count("cache") == 0);
    CHECK(counts["mock"] > 0);
    CHECK(counts["no-evidence-default"] > 0);

    // Expected outcomes derive from the manifest: evidence and blind plants mean
    // the condition holds; the scripted mock sees keywords only for evidence.
    auto manifest = nlohmann::json::parse(read_file(ws.root / "manifest.json"));
    std::map<std::pair<std::string, std::string>, std::string> predicted;
    {
        auto lines = split(read_file(predictions), '\n');
        for (std::size_t i = 1; i < lines.size(); ++i) {
            if (trim(lines[i]).empty()) continue;
            auto fields = split(lines[i], ',');
            REQUIRE(fields.size() == 3);
            predicted[{fields[0], fields[1]}] = fields[2];
        }
    }
    int checked = 0;
    for (const auto& patient : manifest["patients"]) {
        if (patient["split"] != "test") continue;
        std::string pid = patient["patient_id"];
        for (const auto& [criterion, situation] : patient["situations"].items()) {
            bool inverted = criterion == "ENGLISH" || criterion == "MAKES-DECISIONS";
            std::string expected;
            std::string s = situation.get<std::string>();
            // Scenario B with the hard filter: only in-window evidence reads as
            // "condition present"; blind plants flip the answer the wrong way.
            bool says_yes = s == "evidence";
            bool condition = inverted ? !says_yes : says_yes;
            expected = condition ? "met" : "not met";
            if (s == "blind") {
                // Extracted but keyword-free: the mock answers no, so the
                // prediction lands on the says-no side for either polarity.
                expected = inverted ? "met" : "not met";
            }
            auto cell = predicted.find(std::make_pair(pid, criterion));
            REQUIRE(cell != predicted.end());
            CHECK_MESSAGE(cell->second == expected, pid, "/", criterion, " situation=", s);
            ++checked;
        }
    }
    CHECK(checked == 13 * 6);  // 6 of 8 patients are test split

    std::string table = cmd_evaluate(config);
    CHECK(table.find("Overall (micro)") != std::string::npos);
    CHECK(std::filesystem::exists(config.run_dir / "report.tsv"));
    CHECK(std::filesystem::exists(config.run_dir / "report.txt"));
}

TEST_CASE("a second classify run is served from the cache and is byte-identical") {
    Workspace ws;
    RunConfig config = RunConfig::load(ws.write_config("run6", "summarize", true));
    cmd_ontology_build(config);
    cmd_classify(config);
    std::string first = read_file(config.run_dir / "predictions.csv");
    std::string first_answers = read_file(config.run_dir / "answers.jsonl");

    cmd_classify(config);
    CHECK(read_file(config.run_dir / "predictions.csv") == first);

    auto counts = source_counts(config.run_dir / "answers.jsonl");
    CHECK(counts.count("mock") == 0);  // nothing reached the backend
    CHECK(counts["cache"] > 0);

    // Labels do not depend on the answer source.
    auto strip_sources = [](const std::string& text) {
        std::string out;
        for (const auto& line : split(text, '\n')) {
            if (trim(line).empty()) continue;
            auto doc = nlohmann::json::parse(line);
            doc.erase("source");
            out += doc.dump() + "\n";
        }
        return out;
    };
    CHECK(strip_sources(read_file(config.run_dir / "answers.jsonl")) ==
          strip_sources(first_answers));
}

TEST_CASE("cache-only backend replays a warm run without a mock script") {
    Workspace ws;
    RunConfig config = RunConfig::load(ws.write_config("run7", "summarize", true));
    cmd_ontology_build(config);
    cmd_classify(config);
    std::string first = read_file(config.run_dir / "predictions.csv");

    RunConfig replay = config;
    replay.backend.kind = "cache-only";
    replay.backend.mock_script.clear();
    // Cache keys include the model name, so the replay must use the one the
    // scripted run stored under.
    replay.backend.model_name = "scripted-mock";
    cmd_classify(replay);
    CHECK(read_file(config.run_dir / "predictions.csv") == first);

    // A cold cache-only run fails with a transport error.
    RunConfig cold = replay;
    cold.run_dir = ws.root / "run7_cold";
    cmd_ontology_build(cold);
    try {
        cmd_classify(cold);
        FAIL("unreachable");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::transport);
        CHECK(std::string(e.what()).find("cache miss") != std::string::npos);
    }
}

TEST_CASE("truncate-only scenario classifies from full text without an ontology") {
    Workspace ws;
    RunConfig config = RunConfig::load(ws.write_config("run8", "truncate-only", false));
    cmd_classify(config);  // no ontology build needed
    CHECK(std::filesystem::exists(config.run_dir / "predictions.csv"));
    auto counts = source_counts(config.run_dir / "answers.jsonl");
    // Full text is never empty, so every answer reaches the backend.
    CHECK(counts.count("no-evidence-default") == 0);
    CHECK(counts["mock"] == 13 * 6);
}

TEST_CASE("evaluate errors without predictions and compare needs both reports") {
    Workspace ws;
    RunConfig config = RunConfig::load(ws.write_config("run9", "summarize", true));
    CHECK_THROWS_AS(cmd_evaluate(config), Error);
    CHECK_THROWS_AS(compare_runs(ws.root / "run9", ws.root / "nowhere"), Error);
}

TEST_CASE("compare reports per-criterion overall F deltas") {
    Workspace ws;
    RunConfig summarize = RunConfig::load(ws.write_config("runS", "summarize", true));
    cmd_ontology_build(summarize);
    cmd_classify(summarize);
    cmd_evaluate(summarize);

    RunConfig full = RunConfig::load(ws.write_config("runF", "truncate-only", false));
    cmd_classify(full);
    cmd_evaluate(full);

    std::string table = compare_runs(full.run_dir, summarize.run_dir);
    CHECK(table.find("criterion") == 0);
    CHECK(table.find("ABDOMINAL") != std::string::npos);
    CHECK(table.find("micro") != std::string::npos);
    CHECK(table.find("macro") != std::string::npos);
    // Deltas are signed; identical runs compare as exact zero.
    std::string self = compare_runs(summarize.run_dir, summarize.run_dir);
    CHECK(self.find("+") == std::string::npos);
    CHECK(self.find("-0.") == std::string::npos);
    CHECK(self.find("0.0000") != std::string::npos);
}

TEST_CASE("gold directory override scores against explicit labels") {
    Workspace ws;
    RunConfig config = RunConfig::load(ws.write_config("run10", "summarize", true));
    config.split = "train";
    cmd_ontology_build(config);
    cmd_classify(config);
    std::string table = cmd_evaluate(config, ws.root / "train");
    CHECK(table.find("Overall (micro)") != std::string::npos);
}
