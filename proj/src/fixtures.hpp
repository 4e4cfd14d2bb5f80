#pragma once

#include <cstdint>
#include <filesystem>

namespace cohortsieve {

struct FixtureSpec {
    int patients = 12;
    std::uint64_t seed = 42;
    double train_fraction = 0.2;
};

// Seeded synthetic dataset: toy ontology (ontology.tsv), criteria.json with toy
// seed codes, train/ and test/ patient XMLs with planted evidence, a scripted
// mock (mock_script.json) keyed on planted keywords, and manifest.json
// recording every plant so tests can derive expected outcomes independently.
//
// Plant kinds per (patient, criterion):
//   evidence                 ontology term + keyword, in-window
//   evidence_out_of_window   same, dated outside the temporal window
//   distractor               keyword without any ontology term
//   blind                    ontology term the mock has no rule for
//   none
void generate_fixtures(const std::filesystem::path& out_dir, const FixtureSpec& spec);

}  // namespace cohortsieve
