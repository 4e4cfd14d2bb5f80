#pragma once

#include <filesystem>
#include <string>

#include "llm.hpp"
#include "util.hpp"

namespace cohortsieve {

// Effective run configuration. Relative paths in the config file resolve
// against the file's own directory.
struct RunConfig {
    std::filesystem::path data_dir;
    std::string ontology_format;  // "simple" | "rf2" | "" (no ontology configured)
    std::filesystem::path ontology_simple;
    std::filesystem::path rf2_concepts;
    std::filesystem::path rf2_descriptions;
    std::filesystem::path rf2_relationships;
    std::filesystem::path criteria_config;
    std::filesystem::path run_dir;
    std::string scenario = "summarize";  // summarize | truncate-only
    bool hard_temporal_filter = false;
    bool dump_annotations = false;
    std::size_t max_words = 4000;
    std::string split = "test";  // train | test | all
    BackendConfig backend;

    static RunConfig load(const std::filesystem::path& config_path,
                          const std::filesystem::path& run_dir_override = {});
    std::string to_json() const;  // effective snapshot, stable key order
};

// Builds per-criterion code lists (codelist_<ID>.json) in the run directory.
// Criteria without seeds produce empty lists with a warning.
void cmd_ontology_build(const RunConfig& config);

// Summarizes (or truncates) every record of the selected split and asks the
// configured backend one yes/no question per (patient, criterion). Writes
// answers.jsonl and predictions.csv; appends to llm_cache.jsonl.
void cmd_classify(const RunConfig& config);

// Scores predictions.csv against labeled records; writes report.txt and
// report.tsv into the run directory and returns the rendered table.
std::string cmd_evaluate(const RunConfig& config,
                         const std::filesystem::path& gold_dir_override = {});

// Per-criterion overall-F delta table between two completed runs.
std::string compare_runs(const std::filesystem::path& run_a,
                         const std::filesystem::path& run_b);

}  // namespace cohortsieve
