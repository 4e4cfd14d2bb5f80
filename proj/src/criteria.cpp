#include "criteria.hpp"

#include <algorithm>
#include <map>

#include "json.hpp"

namespace cohortsieve {

std::string_view label_text(Label label) {
    return label == Label::met ? "met" : "not met";
}

std::optional<Label> label_from_text(std::string_view text) {
    if (text == "met") return Label::met;
    if (text == "not met") return Label::not_met;
    return std::nullopt;
}

bool is_criterion_id(std::string_view id) {
    return std::find(kCriterionIds.begin(), kCriterionIds.end(), id) != kCriterionIds.end();
}

namespace {

int canonical_rank(std::string_view id) {
    auto it = std::find(kCriterionIds.begin(), kCriterionIds.end(), id);
    return static_cast<int>(it - kCriterionIds.begin());
}

// Criteria whose clock anchors to the record timeline, with their window sizes.
const std::map<std::string_view, int> kTemporalWindows = {
    {"DIETSUPP-2MOS", 61},
    {"MI-6MOS", 183},
    {"KETO-1YR", 365},
};

void validate(const std::vector<Criterion>& criteria) {
    std::vector<std::string> problems;
    std::vector<std::string_view> seen;
    for (const auto& c : criteria) {
        if (!is_criterion_id(c.id)) {
            problems.push_back("unknown criterion id '" + c.id + "'");
            continue;
        }
        if (std::find(seen.begin(), seen.end(), c.id) != seen.end()) {
            problems.push_back("duplicate criterion '" + c.id + "'");
            continue;
        }
        seen.push_back(c.id);
        if (trim(c.prompt_question).empty()) {
            problems.push_back("criterion " + c.id + " has an empty prompt_question");
        }
        auto window_it = kTemporalWindows.find(c.id);
        if (window_it == kTemporalWindows.end()) {
            if (c.temporal_window_days) {
                problems.push_back("criterion " + c.id +
                                   " must not carry temporal_window_days");
            }
        } else if (!c.temporal_window_days) {
            problems.push_back("criterion " + c.id + " requires temporal_window_days");
        } else if (*c.temporal_window_days <= 0) {
            problems.push_back("criterion " + c.id + " has a non-positive temporal window");
        }
        for (ConceptId seed : c.seed_concepts) {
            if (seed <= 0) {
                problems.push_back("criterion " + c.id + " has a non-positive seed concept");
                break;
            }
        }
    }
    for (std::string_view id : kCriterionIds) {
        if (std::find(seen.begin(), seen.end(), id) == seen.end()) {
            problems.push_back("missing criterion '" + std::string(id) + "'");
        }
    }
    if (!problems.empty()) {
        std::string message = "invalid criteria configuration:";
        for (const auto& p : problems) message += "\n  - " + p;
        raise_usage(message);
    }
}

struct DefaultRow {
    std::string_view id;
    std::string_view definition;
    std::string_view prompt;
    std::vector<ConceptId> seeds;
};

// Published challenge definitions and the exact question set; seeds are a curated
// starting point (see README) and are expected to be tuned per deployment.
const std::vector<DefaultRow>& default_rows() {
    static const std::vector<DefaultRow> rows = {
        {"ABDOMINAL",
         "History of intra-abdominal surgery, small or large intestine resection, or small "
         "bowel obstruction",
         "Does the patient in the following text have a history of abdominal surgery? Answer "
         "with one word yes or no.",
         {161615003}},
        {"ADVANCED-CAD",
         "Advanced cardiovascular disease (CAD). For this annotation, we define “advanced” as "
         "having 2 or more of the following: Taking 2 or more medications to treat CAD, "
         "history of myocardial infarction (MI), currently experiencing angina, and ischemia, "
         "past or present.",
         "Does the patient her/himself in the following text have two or more of the four "
         "following criteria? Taking 2 or more medications to treat CAD, history of myocardial "
         "infarction (MI), currently experiencing angina, and ischemia",
         {53741008, 22298006, 194828000}},
        {"ALCOHOL-ABUSE",
         "Current alcohol use over weekly recommended limits",
         "Is the patient in the following text currently using alcohol over the weekly "
         "recommended limits?",
         {15167005}},
        {"ASP-FOR-MI",
         "Use of aspirin to prevent MI",
         "Is the patient of the following text using aspirin to prevent myocardial infarction "
         "(mi) and no other diseases?",
         {387458008}},
        {"CREATININE",
         "Serum creatinine > upper limit of normal",
         "Does the patient of the following text have creatinine or cr level of larger than "
         "1.4?",
         {166717003}},
        {"DIETSUPP-2MOS",
         "Taken a dietary supplement (excluding vitamin D) in the past 2 months",
         "Please review the patient's record and determine if any of the dietary supplements "
         "were mentioned in the record date labeled (current time) or a maximum of two months "
         "before that. If so, answer yes otherwise no. Consider each record date mentioned at "
         "the beginning of each paragraph as YYYY-MM-DD. Dietary supplements such as: Folic "
         "acid, Multivitamins, Vitamins excluding vitamin D, calcium, magnesium, iron, "
         "Echinacea and ginger, Caffeine and curcumin, Tryptophan and glutamine, Probiotics, "
         "Glucosamine, and Fish oils.",
         {63718003}},
        {"DRUG-ABUSE",
         "Drug abuse, current or past",
         "Is the patient in the following text experiencing drug abuse? Answer with one word "
         "yes or no.",
         {26416006}},
        {"ENGLISH",
         "The patient must speak English",
         "Is the patient speaking a language other than English in the text below? Answer "
         "with one word yes or no.",
         {}},
        {"HBA1C",
         "Any hemoglobin A1c (HbA1c) value between 6.5% and 9.5%",
         "Has the patient ever had a hemoglobin value between 6.5 and 9.5? If at least one "
         "time is mentioned, just answer 'yes' otherwise 'no'.",
         {43396009}},
        {"KETO-1YR",
         "Diagnosis of ketoacidosis in the past year",
         "Has the patient in the following text been diagnosed with ketoacidosis in the past "
         "year? Consider the record date labeled (current time) as a current time and each "
         "record date mentioned at the beginning of each paragraph as YYYY-MM-DD.",
         {56051008, 420422005}},
        {"MAJOR-DIABETES",
         "Major diabetes-related complications. For this annotation, we define “major "
         "complications” (as opposed to “minor complications”) as any of the following that "
         "are a result of (or strongly correlated with) uncontrolled diabetes: amputation, "
         "kidney damage, skin conditions, retinopathy, nephropathy, and neuropathy",
         "Does the patient of the following text have an amputation or disease related to "
         "kidney or skin or retinopathy or nephropathy or neuropathy? If at least one time is "
         "mentioned, just answer 'yes' otherwise 'no'.",
         {73211009, 4855003, 90708001, 386033004}},
        {"MAKES-DECISIONS",
         "Patients must make their own medical decisions",
         "Does the patient in the following text have cognitive limitations and cannot make "
         "their own medical decisions? Answer with yes or no.",
         {386806002}},
        {"MI-6MOS",
         "MI in the past 6 months",
         "Does the patient in the following text have any myocardial infarction mentioned in "
         "the Record date labeled (current time) or a maximum of 6 months before that, "
         "considering the date mentioned at the beginning of each paragraph in the format of "
         "record date: YYYY-MM-DD as the hole paragraph's correct date -not the dates in the "
         "text.",
         {22298006}},
    };
    return rows;
}

bool prompt_requests_one_word(std::string_view prompt) {
    std::string lower = to_lower(prompt);
    return lower.find("answer") != std::string::npos ||
           lower.find("'yes'") != std::string::npos;
}

}  // namespace

CriteriaRegistry::CriteriaRegistry(std::vector<Criterion> criteria)
    : criteria_(std::move(criteria)) {
    validate(criteria_);
    std::sort(criteria_.begin(), criteria_.end(), [](const Criterion& a, const Criterion& b) {
        return canonical_rank(a.id) < canonical_rank(b.id);
    });
}

const Criterion& CriteriaRegistry::at(std::string_view id) const {
    for (const auto& c : criteria_) {
        if (c.id == id) return c;
    }
    raise_usage("unknown criterion '" + std::string(id) + "'");
}

CriteriaRegistry default_registry() {
    std::vector<Criterion> criteria;
    for (const auto& row : default_rows()) {
        Criterion c;
        c.id = std::string(row.id);
        c.definition = std::string(row.definition);
        c.prompt_question = std::string(row.prompt);
        c.seed_concepts = row.seeds;
        bool inverted = row.id == "ENGLISH" || row.id == "MAKES-DECISIONS";
        c.yes_means = inverted ? Label::not_met : Label::met;
        c.no_evidence_default = inverted ? Label::met : Label::not_met;
        auto window = kTemporalWindows.find(row.id);
        if (window != kTemporalWindows.end()) c.temporal_window_days = window->second;
        criteria.push_back(std::move(c));
    }
    return CriteriaRegistry(std::move(criteria));
}

std::string registry_to_json(const CriteriaRegistry& registry) {
    nlohmann::ordered_json doc = nlohmann::ordered_json::array();
    for (const auto& c : registry.all()) {
        nlohmann::ordered_json entry;
        entry["id"] = c.id;
        entry["definition"] = c.definition;
        entry["prompt_question"] = c.prompt_question;
        auto& seeds = entry["seed_concepts"] = nlohmann::ordered_json::array();
        for (ConceptId seed : c.seed_concepts) seeds.push_back(std::to_string(seed));
        entry["yes_means"] = std::string(label_text(c.yes_means));
        if (c.temporal_window_days) {
            entry["temporal_window_days"] = *c.temporal_window_days;
        } else {
            entry["temporal_window_days"] = nullptr;
        }
        entry["no_evidence_default"] = std::string(label_text(c.no_evidence_default));
        doc.push_back(std::move(entry));
    }
    return doc.dump(2) + "\n";
}

CriteriaRegistry registry_from_json(std::string_view json_text, Warnings* warnings) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        raise_usage(std::string("bad criteria JSON: ") + e.what());
    }
    if (!doc.is_array()) raise_usage("criteria configuration must be a JSON array");

    std::vector<Criterion> criteria;
    for (const auto& entry : doc) {
        if (!entry.is_object() || !entry.contains("id")) {
            raise_usage("each criteria entry must be an object with an 'id'");
        }
        Criterion c;
        c.id = entry["id"].get<std::string>();
        if (entry.contains("definition")) c.definition = entry["definition"].get<std::string>();
        if (entry.contains("prompt_question")) {
            c.prompt_question = entry["prompt_question"].get<std::string>();
        }
        if (entry.contains("seed_concepts")) {
            for (const auto& value : entry["seed_concepts"]) {
                ConceptId id = 0;
                if (value.is_string()) {
                    try {
                        id = std::stoll(value.get<std::string>());
                    } catch (const std::exception&) {
                        raise_usage("criterion " + c.id + ": bad seed concept '" +
                                    value.get<std::string>() + "'");
                    }
                } else if (value.is_number_integer()) {
                    id = value.get<ConceptId>();
                } else {
                    raise_usage("criterion " + c.id + ": seed concepts must be ids");
                }
                c.seed_concepts.push_back(id);
            }
        }
        auto read_label = [&](const char* key, Label fallback) {
            if (!entry.contains(key)) return fallback;
            auto label = label_from_text(entry[key].get<std::string>());
            if (!label) {
                raise_usage("criterion " + c.id + ": " + key +
                            " must be 'met' or 'not met'");
            }
            return *label;
        };
        c.yes_means = read_label("yes_means", Label::met);
        c.no_evidence_default = read_label("no_evidence_default", Label::not_met);
        if (entry.contains("temporal_window_days") && !entry["temporal_window_days"].is_null()) {
            if (!entry["temporal_window_days"].is_number_integer()) {
                raise_usage("criterion " + c.id + ": temporal_window_days must be an integer");
            }
            c.temporal_window_days = entry["temporal_window_days"].get<int>();
        }
        criteria.push_back(std::move(c));
    }

    CriteriaRegistry registry(std::move(criteria));
    for (const auto& c : registry.all()) {
        if (!prompt_requests_one_word(c.prompt_question)) {
            warn(warnings, "criterion " + c.id +
                               ": prompt does not explicitly request a one-word answer; "
                               "relying on the unparseable-answer retry");
        }
    }
    return registry;
}

CriteriaRegistry load_registry(const std::filesystem::path& json_file, Warnings* warnings) {
    return registry_from_json(read_file(json_file), warnings);
}

void save_registry(const CriteriaRegistry& registry, const std::filesystem::path& json_file) {
    write_file(json_file, registry_to_json(registry));
}

Warnings validate_seeds(const CriteriaRegistry& registry, const ConceptGraph& graph) {
    Warnings warnings;
    for (const auto& c : registry.all()) {
        if (c.seed_concepts.empty()) {
            warnings.push_back("criterion " + c.id +
                               " has no seed concepts; its summaries will always be empty");
            continue;
        }
        for (ConceptId seed : c.seed_concepts) {
            if (!graph.contains(seed)) {
                warnings.push_back("criterion " + c.id + ": seed concept " +
                                   std::to_string(seed) + " is not in the ontology");
            }
        }
    }
    return warnings;
}

}  // namespace cohortsieve
