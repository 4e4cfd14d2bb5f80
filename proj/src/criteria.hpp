#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ontology.hpp"
#include "util.hpp"

namespace cohortsieve {

enum class Label { met, not_met };

std::string_view label_text(Label label);                       // "met" / "not met"
std::optional<Label> label_from_text(std::string_view text);
inline Label flip(Label label) { return label == Label::met ? Label::not_met : Label::met; }

// Canonical criterion order; also lexicographic.
inline constexpr std::array<std::string_view, 13> kCriterionIds = {
    "ABDOMINAL",      "ADVANCED-CAD",  "ALCOHOL-ABUSE",   "ASP-FOR-MI", "CREATININE",
    "DIETSUPP-2MOS",  "DRUG-ABUSE",    "ENGLISH",         "HBA1C",      "KETO-1YR",
    "MAJOR-DIABETES", "MAKES-DECISIONS", "MI-6MOS",
};

bool is_criterion_id(std::string_view id);

struct Criterion {
    std::string id;
    std::string definition;
    std::string prompt_question;
    std::vector<ConceptId> seed_concepts;
    Label yes_means = Label::met;
    std::optional<int> temporal_window_days;
    Label no_evidence_default = Label::not_met;

    bool operator==(const Criterion&) const = default;
};

class CriteriaRegistry {
public:
    CriteriaRegistry() = default;
    explicit CriteriaRegistry(std::vector<Criterion> criteria);  // validates

    const std::vector<Criterion>& all() const { return criteria_; }  // canonical order
    const Criterion& at(std::string_view id) const;
    std::size_t size() const { return criteria_.size(); }

    bool operator==(const CriteriaRegistry&) const = default;

private:
    std::vector<Criterion> criteria_;
};

// Registry shipped with the repo: published prompt set plus curated seed codes.
CriteriaRegistry default_registry();

// Emits one warning per criterion whose prompt lacks an explicit one-word
// answer instruction (the retry path restores the guarantee at query time).
CriteriaRegistry load_registry(const std::filesystem::path& json_file,
                               Warnings* warnings = nullptr);
void save_registry(const CriteriaRegistry& registry, const std::filesystem::path& json_file);
std::string registry_to_json(const CriteriaRegistry& registry);
CriteriaRegistry registry_from_json(std::string_view json_text, Warnings* warnings = nullptr);

// Seed sanity against a loaded graph: unknown seeds and empty seed lists warn.
Warnings validate_seeds(const CriteriaRegistry& registry, const ConceptGraph& graph);

}  // namespace cohortsieve
