#include "cohortsieve/cohortsieve.h"

#include <cstring>
#include <memory>
#include <new>
#include <string>

#include "criteria.hpp"
#include "fixtures.hpp"
#include "ontology.hpp"
#include "pipeline.hpp"
#include "util.hpp"

using namespace cohortsieve;

namespace {

thread_local std::string g_last_error;

cs_status fail(cs_status status, const std::string& message) {
    g_last_error = message;
    return status;
}

cs_status fail_usage(const std::string& message) { return fail(CS_ERR_USAGE, message); }

cs_status from_kind(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::usage: return CS_ERR_USAGE;
        case ErrorKind::data: return CS_ERR_DATA;
        case ErrorKind::transport: return CS_ERR_TRANSPORT;
    }
    return CS_ERR_INTERNAL;
}

template <typename Fn>
cs_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return CS_OK;
    } catch (const Error& e) {
        return fail(from_kind(e.kind()), e.what());
    } catch (const std::exception& e) {
        return fail(CS_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(CS_ERR_INTERNAL, "unknown failure");
    }
}

char* copy_text(const std::string& text) {
    char* out = new char[text.size() + 1];
    std::memcpy(out, text.c_str(), text.size() + 1);
    return out;
}

}  // namespace

struct cs_graph {
    ConceptGraph graph;
};

struct cs_registry {
    CriteriaRegistry registry;
};

struct cs_run {
    RunConfig config;
    std::string run_dir;  // backing storage for cs_run_dir
};

extern "C" {

const char* cs_version(void) { return "0.1.0"; }

const char* cs_last_error(void) { return g_last_error.c_str(); }

cs_status cs_graph_load_simple(const char* tsv_path, cs_graph** out) {
    if (!tsv_path || !out) return fail_usage("cs_graph_load_simple: NULL argument");
    return guarded([&] {
        auto handle = std::make_unique<cs_graph>();
        handle->graph = load_simple(tsv_path);
        *out = handle.release();
    });
}

cs_status cs_graph_load_rf2(const char* concepts_path, const char* descriptions_path,
                            const char* relationships_path, cs_graph** out) {
    if (!concepts_path || !descriptions_path || !relationships_path || !out) {
        return fail_usage("cs_graph_load_rf2: NULL argument");
    }
    return guarded([&] {
        auto handle = std::make_unique<cs_graph>();
        handle->graph = load_rf2(concepts_path, descriptions_path, relationships_path);
        *out = handle.release();
    });
}

void cs_graph_free(cs_graph* graph) { delete graph; }

size_t cs_graph_concept_count(const cs_graph* graph) {
    return graph ? graph->graph.size() : 0;
}

int cs_graph_contains(const cs_graph* graph, int64_t concept_id) {
    return graph && graph->graph.contains(concept_id) ? 1 : 0;
}

cs_status cs_graph_descendants(const cs_graph* graph, int64_t root, int64_t** out_ids,
                               size_t* out_count) {
    if (!graph || !out_ids || !out_count) {
        return fail_usage("cs_graph_descendants: NULL argument");
    }
    return guarded([&] {
        auto closure = graph->graph.descendants(root);
        auto* ids = new int64_t[closure.empty() ? 1 : closure.size()];
        size_t i = 0;
        for (ConceptId id : closure) ids[i++] = id;  // std::set iterates ascending
        *out_ids = ids;
        *out_count = closure.size();
    });
}

void cs_ids_free(int64_t* ids) { delete[] ids; }

cs_status cs_registry_load(const char* json_path, cs_registry** out) {
    if (!json_path || !out) return fail_usage("cs_registry_load: NULL argument");
    return guarded([&] {
        auto handle = std::make_unique<cs_registry>();
        handle->registry = load_registry(json_path);
        *out = handle.release();
    });
}

void cs_registry_free(cs_registry* registry) { delete registry; }

size_t cs_registry_count(const cs_registry* registry) {
    return registry ? registry->registry.size() : 0;
}

cs_status cs_run_open(const char* config_path, const char* run_dir_override, cs_run** out) {
    if (!config_path || !out) return fail_usage("cs_run_open: NULL argument");
    return guarded([&] {
        auto handle = std::make_unique<cs_run>();
        std::filesystem::path override_path =
            run_dir_override ? std::filesystem::path(run_dir_override) : std::filesystem::path();
        handle->config = RunConfig::load(config_path, override_path);
        handle->run_dir = handle->config.run_dir.string();
        *out = handle.release();
    });
}

void cs_run_free(cs_run* run) { delete run; }

const char* cs_run_dir(const cs_run* run) { return run ? run->run_dir.c_str() : ""; }

cs_status cs_run_build_ontology(cs_run* run) {
    if (!run) return fail_usage("cs_run_build_ontology: NULL run");
    return guarded([&] { cmd_ontology_build(run->config); });
}

cs_status cs_run_classify(cs_run* run) {
    if (!run) return fail_usage("cs_run_classify: NULL run");
    return guarded([&] { cmd_classify(run->config); });
}

cs_status cs_run_evaluate(cs_run* run, const char* gold_dir, char** out_report) {
    if (!run || !out_report) return fail_usage("cs_run_evaluate: NULL argument");
    return guarded([&] {
        std::filesystem::path gold =
            gold_dir ? std::filesystem::path(gold_dir) : std::filesystem::path();
        *out_report = copy_text(cmd_evaluate(run->config, gold));
    });
}

cs_status cs_compare_runs(const char* run_a, const char* run_b, char** out_text) {
    if (!run_a || !run_b || !out_text) return fail_usage("cs_compare_runs: NULL argument");
    return guarded([&] { *out_text = copy_text(compare_runs(run_a, run_b)); });
}

void cs_text_free(char* text) { delete[] text; }

cs_status cs_fixtures_generate(const char* out_dir, int patients, uint64_t seed,
                               double train_fraction) {
    if (!out_dir) return fail_usage("cs_fixtures_generate: NULL out_dir");
    return guarded([&] {
        FixtureSpec spec;
        spec.patients = patients;
        spec.seed = seed;
        spec.train_fraction = train_fraction;
        generate_fixtures(out_dir, spec);
    });
}

}  // extern "C"
