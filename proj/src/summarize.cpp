#include "summarize.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "json.hpp"

namespace cohortsieve {

Summary extract(const PatientRecord& record,
                const std::vector<std::vector<Sentence>>& sentences_by_note,
                std::span<const Annotation> annotations, const CodeList& list) {
    std::set<std::pair<int, int>> selected;
    for (const Annotation& a : annotations) {
        if (list.codes.count(a.concept_id)) selected.emplace(a.note_index, a.sentence_index);
    }

    Summary summary;
    summary.patient_id = record.patient_id;
    summary.criterion_id = list.criterion_id;
    for (const Note& note : record.notes) {
        if (static_cast<std::size_t>(note.index) >= sentences_by_note.size()) continue;
        SummaryBlock block;
        block.note_date = note.date;
        for (const Sentence& sentence : sentences_by_note[note.index]) {
            if (selected.count({sentence.note_index, sentence.sentence_index})) {
                block.sentences.push_back(sentence.text);
            }
        }
        if (!block.sentences.empty()) summary.blocks.push_back(std::move(block));
    }
    summary.word_count = count_words(render(summary));
    return summary;
}

Summary temporal_filter(const Summary& summary, const Date& current, int window_days,
                        Warnings* warnings) {
    if (window_days <= 0) raise_data("temporal window must be positive");
    Summary filtered;
    filtered.patient_id = summary.patient_id;
    filtered.criterion_id = summary.criterion_id;
    for (const SummaryBlock& block : summary.blocks) {
        if (!block.note_date) {
            warn(warnings, "summary " + summary.patient_id + "/" + summary.criterion_id +
                               ": keeping an undated block despite the temporal filter");
            filtered.blocks.push_back(block);
            continue;
        }
        long age = days_between(*block.note_date, current);
        if (age >= 0 && age <= window_days) filtered.blocks.push_back(block);
    }
    filtered.word_count = count_words(render(filtered));
    return filtered;
}

std::string render(const Summary& summary) {
    std::string out;
    for (const SummaryBlock& block : summary.blocks) {
        if (!out.empty()) out += "\n\n";
        out += "Record date: ";
        out += block.note_date ? block.note_date->str() : "unknown";
        out += '\n';
        for (std::size_t i = 0; i < block.sentences.size(); ++i) {
            if (i > 0) out += ' ';
            out += block.sentences[i];
        }
    }
    return out;
}

std::string truncate_words(std::string_view text, std::size_t max_words) {
    std::size_t words = 0;
    bool in_word = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (std::isspace(static_cast<unsigned char>(text[i]))) {
            in_word = false;
        } else if (!in_word) {
            in_word = true;
            if (++words > max_words) {
                std::string_view kept = text.substr(0, i);
                // Drop the whitespace run before the cut word.
                while (!kept.empty() &&
                       std::isspace(static_cast<unsigned char>(kept.back()))) {
                    kept.remove_suffix(1);
                }
                return std::string(kept);
            }
        }
    }
    return std::string(text);
}

Summary full_text_summary(const PatientRecord& record) {
    Summary summary;
    summary.patient_id = record.patient_id;
    summary.criterion_id = "*";
    for (const Note& note : record.notes) {
        std::string body = trim(note.text);
        if (body.empty()) continue;
        SummaryBlock block;
        block.note_date = note.date;
        block.sentences.push_back(std::move(body));
        summary.blocks.push_back(std::move(block));
    }
    summary.word_count = count_words(render(summary));
    return summary;
}

std::string summary_to_json(const Summary& summary) {
    nlohmann::ordered_json doc;
    doc["patient_id"] = summary.patient_id;
    doc["criterion_id"] = summary.criterion_id;
    auto& blocks = doc["blocks"] = nlohmann::ordered_json::array();
    for (const SummaryBlock& block : summary.blocks) {
        nlohmann::ordered_json entry;
        if (block.note_date) {
            entry["note_date"] = block.note_date->str();
        } else {
            entry["note_date"] = nullptr;
        }
        entry["sentences"] = block.sentences;
        blocks.push_back(std::move(entry));
    }
    doc["word_count"] = summary.word_count;
    return doc.dump(2) + "\n";
}

Summary summary_from_json(std::string_view json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        raise_data(std::string("bad summary JSON: ") + e.what());
    }
    Summary summary;
    summary.patient_id = doc.value("patient_id", "");
    summary.criterion_id = doc.value("criterion_id", "");
    if (doc.contains("blocks")) {
        for (const auto& entry : doc["blocks"]) {
            SummaryBlock block;
            if (entry.contains("note_date") && !entry["note_date"].is_null()) {
                auto date = Date::parse(entry["note_date"].get<std::string>());
                if (!date) raise_data("bad note_date in summary JSON");
                block.note_date = date;
            }
            for (const auto& sentence : entry["sentences"]) {
                block.sentences.push_back(sentence.get<std::string>());
            }
            summary.blocks.push_back(std::move(block));
        }
    }
    summary.word_count = count_words(render(summary));
    return summary;
}

}  // namespace cohortsieve
