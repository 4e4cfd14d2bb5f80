// Command-line front end. Deliberately speaks only the C API so the shared
// library surface stays exercised end to end.
#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>

#include "CLI11.hpp"

#include "cohortsieve/cohortsieve.h"

namespace {

int report_failure(cs_status status) {
    std::fprintf(stderr, "error: %s\n", cs_last_error());
    return static_cast<int>(status);
}

struct RunHandle {
    cs_run* run = nullptr;
    ~RunHandle() { cs_run_free(run); }
};

int open_run(const std::string& config, const std::string& run_dir, RunHandle& handle) {
    cs_status status =
        cs_run_open(config.c_str(), run_dir.empty() ? nullptr : run_dir.c_str(), &handle.run);
    if (status != CS_OK) return report_failure(status);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cohortsieve: prompt-based clinical trial cohort selection"};
    app.set_version_flag("--version", std::string(cs_version()));
    app.require_subcommand(1);

    std::string config_path;
    std::string run_dir;
    std::string gold_dir;
    std::string compare_a, compare_b;
    std::string fixtures_out;
    int fixture_patients = 12;
    std::uint64_t fixture_seed = 42;
    double fixture_train_fraction = 0.2;

    auto add_run_options = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "run config JSON")->required();
        cmd->add_option("--run-dir", run_dir, "output directory (overrides the config)");
    };

    CLI::App* ontology = app.add_subcommand("ontology", "ontology operations");
    ontology->require_subcommand(1);
    CLI::App* ontology_build =
        ontology->add_subcommand("build", "derive per-criterion code lists");
    add_run_options(ontology_build);

    CLI::App* classify =
        app.add_subcommand("classify", "summarize records and query the backend");
    add_run_options(classify);

    CLI::App* evaluate = app.add_subcommand("evaluate", "score predictions against gold labels");
    add_run_options(evaluate);
    evaluate->add_option("--gold", gold_dir, "directory of labeled records");

    CLI::App* compare = app.add_subcommand("compare", "overall-F delta between two runs");
    compare->add_option("run_a", compare_a, "baseline run directory")->required();
    compare->add_option("run_b", compare_b, "comparison run directory")->required();

    CLI::App* fixtures = app.add_subcommand("fixtures", "synthetic data operations");
    fixtures->require_subcommand(1);
    CLI::App* fixtures_generate =
        fixtures->add_subcommand("generate", "write a seeded synthetic dataset");
    fixtures_generate->add_option("--out", fixtures_out, "output directory")->required();
    fixtures_generate->add_option("--patients", fixture_patients, "patient count");
    fixtures_generate->add_option("--seed", fixture_seed, "RNG seed");
    fixtures_generate->add_option("--train-fraction", fixture_train_fraction,
                                  "fraction of patients in train/");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(CS_ERR_USAGE);
    }

    if (ontology_build->parsed()) {
        RunHandle handle;
        if (int code = open_run(config_path, run_dir, handle); code != 0) return code;
        cs_status status = cs_run_build_ontology(handle.run);
        if (status != CS_OK) return report_failure(status);
        std::printf("code lists written to %s\n", cs_run_dir(handle.run));
        return 0;
    }

    if (classify->parsed()) {
        RunHandle handle;
        if (int code = open_run(config_path, run_dir, handle); code != 0) return code;
        cs_status status = cs_run_classify(handle.run);
        if (status != CS_OK) return report_failure(status);
        std::printf("predictions written to %s\n", cs_run_dir(handle.run));
        return 0;
    }

    if (evaluate->parsed()) {
        RunHandle handle;
        if (int code = open_run(config_path, run_dir, handle); code != 0) return code;
        char* report = nullptr;
        cs_status status = cs_run_evaluate(handle.run,
                                           gold_dir.empty() ? nullptr : gold_dir.c_str(),
                                           &report);
        if (status != CS_OK) return report_failure(status);
        std::fputs(report, stdout);
        cs_text_free(report);
        return 0;
    }

    if (compare->parsed()) {
        char* table = nullptr;
        cs_status status = cs_compare_runs(compare_a.c_str(), compare_b.c_str(), &table);
        if (status != CS_OK) return report_failure(status);
        std::fputs(table, stdout);
        cs_text_free(table);
        return 0;
    }

    if (fixtures_generate->parsed()) {
        cs_status status = cs_fixtures_generate(fixtures_out.c_str(), fixture_patients,
                                                fixture_seed, fixture_train_fraction);
        if (status != CS_OK) return report_failure(status);
        std::printf("fixtures written to %s\n", fixtures_out.c_str());
        return 0;
    }

    return static_cast<int>(CS_ERR_USAGE);
}
