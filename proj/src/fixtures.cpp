#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "corpus.hpp"
#include "criteria.hpp"
#include "util.hpp"

namespace cohortsieve {

namespace {

struct FixtureRow {
    std::string_view id;
    ConceptId seed;
    std::string_view seed_term;
    ConceptId evidence;
    std::string_view evidence_term;
    std::string_view evidence_synonym;  // may be empty
    ConceptId blind;
    std::string_view blind_term;
    ConceptId deep;  // child of the evidence concept; exercises closure depth
    std::string_view deep_term;
    std::string_view keyword;  // mock trigger; present in evidence + distractor sentences
    std::string_view evidence_sentence;
    std::string_view distractor_sentence;
    std::string_view blind_sentence;
};

// Vocabulary is deliberately disjoint across criteria: no sentence contains
// another criterion's keyword or ontology term, so planted effects stay local.
const std::vector<FixtureRow>& fixture_rows() {
    static const std::vector<FixtureRow> rows = {
        {"ABDOMINAL", 7100100, "Abdominal surgery", 7100101, "Major abdominal surgery", "",
         7100102, "Open hysterectomy", 7100103, "Bowel resection procedure", "abdominal",
         "Underwent major abdominal surgery for obstruction repair.",
         "Mild abdominal discomfort after meals.",
         "Open hysterectomy performed without complication."},
        {"ADVANCED-CAD", 7100200, "Coronary artery disease", 7100201, "Unstable angina", "",
         7100202, "Coronary ischemia", 7100203, "Accelerated coronary syndrome", "angina",
         "Ongoing unstable angina despite medication.",
         "No exertional angina reported today.",
         "Coronary ischemia noted on stress testing."},
        {"ALCOHOL-ABUSE", 7100300, "Alcohol abuse", 7100301, "Alcohol dependence", "",
         7100302, "Excessive drinking behavior", 7100303, "Alcohol withdrawal state", "alcohol",
         "Chronic alcohol dependence with daily intake.",
         "Uses alcohol wipes for injections.",
         "Excessive drinking behavior documented by family."},
        {"ASP-FOR-MI", 7100400, "Aspirin therapy", 7100401, "Aspirin prophylaxis", "",
         7100402, "Antiplatelet regimen", 7100403, "Low dose aspirin regimen", "aspirin",
         "Daily aspirin prophylaxis for cardiac prevention.",
         "Stopped aspirin before dental extraction.",
         "Continues antiplatelet regimen as prescribed."},
        {"CREATININE", 7100500, "Creatinine finding", 7100501, "Creatinine raised",
         "Elevated creatinine", 7100502, "Renal function abnormal", 7100503,
         "Creatinine markedly raised", "creatinine",
         "Creatinine raised above baseline this week.",
         "Repeat creatinine panel pending.",
         "Renal function abnormal per nephrology note."},
        {"DIETSUPP-2MOS", 7100600, "Dietary supplement", 7100601, "Fish oil supplement", "",
         7100602, "Glucosamine supplement", 7100603, "Concentrated fish oil preparation",
         "fish oil",
         "Takes fish oil supplement with breakfast.",
         "Dislikes fish oil capsules entirely.",
         "Started glucosamine supplement last week."},
        {"DRUG-ABUSE", 7100700, "Drug abuse", 7100701, "Intravenous drug use", "",
         7100702, "Substance dependence", 7100703, "Heroin dependence", "drug use",
         "History of intravenous drug use noted.",
         "Reviewed safe prescription drug use.",
         "Substance dependence managed in outpatient program."},
        {"ENGLISH", 7100800, "Language barrier", 7100801, "Speaks Portuguese",
         "Portuguese speaking", 7100802, "Interpreter required", 7100803,
         "Monolingual Portuguese speaker", "portuguese",
         "Patient speaks Portuguese at home.",
         "Daughter translates Portuguese mail for neighbors.",
         "Interpreter required for every visit."},
        {"HBA1C", 7100900, "Hemoglobin A1c measurement", 7100901, "Hemoglobin A1c result", "",
         7100902, "Glycated hemoglobin level", 7100903, "Hemoglobin A1c above range", "a1c",
         "Hemoglobin A1c result of 7.2 recorded.",
         "Will repeat A1c next quarter.",
         "Glycated hemoglobin level within target range."},
        {"KETO-1YR", 7101000, "Ketoacidosis disorder", 7101001, "Acute diabetic ketoacidosis",
         "", 7101002, "Severe metabolic acidosis", 7101003, "Recurrent diabetic ketoacidosis",
         "ketoacidosis",
         "Admitted for acute diabetic ketoacidosis management.",
         "Ketoacidosis screening was negative.",
         "Severe metabolic acidosis resolved after fluids."},
        {"MAJOR-DIABETES", 7101100, "Diabetic complication", 7101101, "Diabetic nephropathy",
         "", 7101102, "Toe amputation", 7101103, "Diabetic kidney disease", "nephropathy",
         "Diabetic nephropathy confirmed by biopsy.",
         "Nephropathy screening scheduled annually.",
         "Toe amputation healed well."},
        {"MAKES-DECISIONS", 7101200, "Cognitive impairment", 7101201, "Severe dementia", "",
         7101202, "Guardianship in place", 7101203, "Advanced vascular dementia", "dementia",
         "Severe dementia limits medical decision making.",
         "Asked questions about dementia prevention.",
         "Guardianship in place for healthcare choices."},
        {"MI-6MOS", 7101300, "Acute myocardial infarction", 7101301,
         "Anterior myocardial infarction", "", 7101302, "Silent heart attack", 7101303,
         "Acute inferior myocardial infarction", "myocardial",
         "Suffered anterior myocardial infarction requiring stenting.",
         "Myocardial perfusion imaging unremarkable.",
         "Silent heart attack found on routine ECG."},
    };
    return rows;
}

constexpr ConceptId kFixtureRoot = 7100000;

enum class Situation { none, evidence, evidence_out_of_window, distractor, blind };

std::string_view situation_text(Situation s) {
    switch (s) {
        case Situation::none: return "none";
        case Situation::evidence: return "evidence";
        case Situation::evidence_out_of_window: return "evidence_out_of_window";
        case Situation::distractor: return "distractor";
        case Situation::blind: return "blind";
    }
    return "none";
}

bool temporal(const FixtureRow& row) {
    return row.id == "DIETSUPP-2MOS" || row.id == "MI-6MOS" || row.id == "KETO-1YR";
}

bool inverted(const FixtureRow& row) {
    return row.id == "ENGLISH" || row.id == "MAKES-DECISIONS";
}

// Forced cells guarantee coverage (temporal windows, distractors, blind spots,
// inverted-polarity plants) regardless of the free seed.
Situation forced_situation(int patient, std::string_view criterion, bool& found) {
    struct Forced {
        int patient;
        std::string_view criterion;
        Situation situation;
    };
    static const Forced kForced[] = {
        {0, "ABDOMINAL", Situation::evidence},
        {0, "CREATININE", Situation::distractor},
        {0, "DIETSUPP-2MOS", Situation::evidence_out_of_window},
        {0, "ENGLISH", Situation::evidence},
        {0, "MAKES-DECISIONS", Situation::blind},
        {0, "MI-6MOS", Situation::evidence},
        {1, "KETO-1YR", Situation::evidence_out_of_window},
        {1, "DRUG-ABUSE", Situation::evidence},
        {1, "ALCOHOL-ABUSE", Situation::distractor},
        {1, "ADVANCED-CAD", Situation::blind},
        {1, "HBA1C", Situation::evidence},
        {2, "MI-6MOS", Situation::evidence_out_of_window},
        {2, "DIETSUPP-2MOS", Situation::evidence},
        {2, "MAJOR-DIABETES", Situation::evidence},
        {2, "ENGLISH", Situation::distractor},
        {2, "ASP-FOR-MI", Situation::evidence},
    };
    for (const auto& f : kForced) {
        if (f.patient == patient && f.criterion == criterion) {
            found = true;
            return f.situation;
        }
    }
    found = false;
    return Situation::none;
}

std::string ontology_tsv() {
    std::string tsv = std::to_string(kFixtureRoot) + "\tClinical finding\t\t\n";
    for (const auto& row : fixture_rows()) {
        tsv += std::to_string(row.seed) + "\t" + std::string(row.seed_term) + "\t\t" +
               std::to_string(kFixtureRoot) + "\n";
        tsv += std::to_string(row.evidence) + "\t" + std::string(row.evidence_term) + "\t" +
               std::string(row.evidence_synonym) + "\t" + std::to_string(row.seed) + "\n";
        tsv += std::to_string(row.blind) + "\t" + std::string(row.blind_term) + "\t\t" +
               std::to_string(row.seed) + "\n";
        tsv += std::to_string(row.deep) + "\t" + std::string(row.deep_term) + "\t\t" +
               std::to_string(row.evidence) + "\n";
    }
    return tsv;
}

std::string mock_script_json() {
    CriteriaRegistry registry = default_registry();
    nlohmann::ordered_json doc;
    doc["model"] = "scripted-mock";
    doc["default"] = "No.";
    auto& rules = doc["rules"] = nlohmann::ordered_json::array();
    for (const auto& row : fixture_rows()) {
        nlohmann::ordered_json rule;
        rule["question_contains"] = registry.at(row.id).prompt_question;
        rule["text_contains"] = std::string(row.keyword);
        rule["answer"] = "Yes.";
        rules.push_back(std::move(rule));
    }
    doc["by_hash"] = nlohmann::ordered_json::object();
    return doc.dump(2) + "\n";
}

std::string fixture_criteria_json() {
    CriteriaRegistry defaults = default_registry();
    std::vector<Criterion> criteria = defaults.all();
    for (auto& c : criteria) {
        for (const auto& row : fixture_rows()) {
            if (row.id == c.id) {
                c.seed_concepts = {row.seed};
                break;
            }
        }
    }
    return registry_to_json(CriteriaRegistry(std::move(criteria)));
}

}  // namespace

void generate_fixtures(const std::filesystem::path& out_dir, const FixtureSpec& spec) {
    if (spec.patients < 1) raise_usage("fixture generation needs at least one patient");
    if (spec.train_fraction < 0.0 || spec.train_fraction > 1.0) {
        raise_usage("train_fraction must be within [0, 1]");
    }

    std::filesystem::create_directories(out_dir / "train");
    std::filesystem::create_directories(out_dir / "test");
    write_file(out_dir / "ontology.tsv", ontology_tsv());
    write_file(out_dir / "criteria.json", fixture_criteria_json());
    write_file(out_dir / "mock_script.json", mock_script_json());

    std::mt19937_64 rng(spec.seed);
    auto roll = [&](std::uint64_t bound) { return rng() % bound; };

    int train_count = static_cast<int>(std::lround(spec.patients * spec.train_fraction));
    train_count = std::clamp(train_count, 0, spec.patients);

    nlohmann::ordered_json manifest;
    manifest["seed"] = spec.seed;
    manifest["patient_count"] = spec.patients;
    manifest["train_fraction"] = spec.train_fraction;
    auto& keywords = manifest["keywords"] = nlohmann::ordered_json::object();
    for (const auto& row : fixture_rows()) keywords[std::string(row.id)] = row.keyword;
    auto& patients = manifest["patients"] = nlohmann::ordered_json::array();

    for (int p = 0; p < spec.patients; ++p) {
        char id_buf[24];
        std::snprintf(id_buf, sizeof(id_buf), "synth_%03d", p + 1);
        std::string patient_id = id_buf;
        bool is_train = p < train_count;

        Date current{2090 + static_cast<int>(roll(8)), 1 + static_cast<int>(roll(12)),
                     1 + static_cast<int>(roll(28))};
        Date mid = add_days(current, -40);
        Date old = add_days(current, -400);
        bool intro = roll(3) == 0;

        std::vector<std::string> old_sentences{"Routine visit for follow up."};
        std::vector<std::string> mid_sentences{"Interval history taken today."};

        nlohmann::ordered_json situations = nlohmann::ordered_json::object();
        nlohmann::ordered_json gold = nlohmann::ordered_json::object();
        std::map<std::string, Label> labels;

        for (const auto& row : fixture_rows()) {
            bool forced = false;
            Situation situation = forced_situation(p, row.id, forced);
            std::uint64_t draw = roll(100);  // always consumed, keeps the stream aligned
            if (!forced) {
                if (draw < 50) {
                    situation = Situation::none;
                } else if (draw < 74) {
                    situation = Situation::evidence;
                } else if (draw < 88) {
                    situation = Situation::distractor;
                } else if (draw < 95) {
                    situation = Situation::blind;
                } else {
                    situation = temporal(row) ? Situation::evidence_out_of_window
                                              : Situation::evidence;
                }
            }

            switch (situation) {
                case Situation::none: break;
                case Situation::evidence:
                    mid_sentences.push_back(std::string(row.evidence_sentence));
                    break;
                case Situation::evidence_out_of_window:
                    old_sentences.push_back(std::string(row.evidence_sentence));
                    break;
                case Situation::distractor:
                    old_sentences.push_back(std::string(row.distractor_sentence));
                    break;
                case Situation::blind:
                    mid_sentences.push_back(std::string(row.blind_sentence));
                    break;
            }

            bool has_condition =
                situation == Situation::evidence || situation == Situation::blind;
            Label label;
            if (inverted(row)) {
                label = has_condition ? Label::not_met : Label::met;
            } else {
                label = has_condition ? Label::met : Label::not_met;
            }
            labels[std::string(row.id)] = label;
            situations[std::string(row.id)] = std::string(situation_text(situation));
            gold[std::string(row.id)] = std::string(label_text(label));
        }

        old_sentences.push_back("Plan reviewed with the patient.");
        mid_sentences.push_back("Vital signs stable.");

        auto join = [](const std::vector<std::string>& sentences) {
            std::string body;
            for (const auto& s : sentences) {
                if (!body.empty()) body += '\n';
                body += s;
            }
            return body;
        };

        PatientRecord record;
        record.patient_id = patient_id;
        int note_index = 0;
        if (intro) {
            Note note;
            note.index = note_index++;
            note.text = "Transferred records reviewed before intake.\n\n";
            record.notes.push_back(std::move(note));
        }
        auto add_note = [&](const Date& date, std::string body) {
            Note note;
            note.index = note_index++;
            note.date = date;
            note.header = "Record date: " + date.str() + "\n";
            note.text = std::move(body) + "\n\n";
            record.notes.push_back(std::move(note));
        };
        add_note(old, join(old_sentences));
        add_note(mid, join(mid_sentences));
        add_note(current, "Returns for scheduled review.\nNo new complaints raised.");
        record.gold_labels = labels;

        std::filesystem::path dir = out_dir / (is_train ? "train" : "test");
        write_file(dir / (patient_id + ".xml"), patient_record_to_xml(record));

        nlohmann::ordered_json entry;
        entry["patient_id"] = patient_id;
        entry["split"] = is_train ? "train" : "test";
        entry["intro_note"] = intro;
        entry["current_date"] = current.str();
        entry["mid_date"] = mid.str();
        entry["old_date"] = old.str();
        entry["situations"] = std::move(situations);
        entry["gold"] = std::move(gold);
        patients.push_back(std::move(entry));
    }

    write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace cohortsieve
