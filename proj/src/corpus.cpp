#include "corpus.hpp"

#include <algorithm>
#include <cctype>

#include "xml.hpp"

namespace cohortsieve {

namespace {

// Matches a full line of the form "Record date: YYYY-MM-DD" (case-insensitive
// keyword, 0-2 spaces after the colon, optional trailing whitespace). Returns
// true when the line is a header; `date` is empty for a syntactic match whose
// date is not a real calendar date.
bool match_header(std::string_view line, std::optional<Date>& date) {
    date.reset();
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    static constexpr std::string_view kKeyword = "record date:";
    if (line.size() < kKeyword.size()) return false;
    for (std::size_t i = 0; i < kKeyword.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(line[i])) != kKeyword[i]) return false;
    }
    std::size_t pos = kKeyword.size();
    std::size_t spaces = 0;
    while (pos < line.size() && line[pos] == ' ' && spaces < 2) {
        ++pos;
        ++spaces;
    }
    if (line.size() - pos < 10) return false;
    std::string_view candidate = line.substr(pos, 10);
    for (std::size_t i = 0; i < 10; ++i) {
        bool want_dash = i == 4 || i == 7;
        bool is_dash = candidate[i] == '-';
        bool is_num = std::isdigit(static_cast<unsigned char>(candidate[i]));
        if (want_dash ? !is_dash : !is_num) return false;
    }
    std::string_view rest = line.substr(pos + 10);
    if (!std::all_of(rest.begin(), rest.end(),
                     [](unsigned char c) { return std::isspace(c); })) {
        return false;
    }
    date = Date::parse(candidate);
    return true;
}

bool is_blank(std::string_view text) {
    return std::all_of(text.begin(), text.end(),
                       [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

std::vector<Note> split_notes(std::string_view body, Warnings* warnings) {
    struct RawNote {
        std::optional<Date> date;
        std::string header;
        std::size_t text_start = 0;
        std::size_t text_end = 0;
    };
    std::vector<RawNote> raw;
    std::size_t preamble_end = body.size();  // start of the first header, if any

    std::size_t line_start = 0;
    while (line_start < body.size()) {
        std::size_t line_end = body.find('\n', line_start);
        std::size_t next = line_end == std::string_view::npos ? body.size() : line_end + 1;
        std::string_view line =
            body.substr(line_start, (line_end == std::string_view::npos ? body.size() : line_end) -
                                        line_start);
        std::optional<Date> date;
        if (match_header(line, date)) {
            if (raw.empty()) preamble_end = line_start;
            if (!raw.empty()) raw.back().text_end = line_start;
            RawNote note;
            note.date = date;
            note.header = std::string(body.substr(line_start, next - line_start));
            note.text_start = next;
            note.text_end = body.size();
            if (!date) {
                warn(warnings, "note header with invalid calendar date: '" +
                                   std::string(trim(line)) + "'; treating the note as undated");
            }
            raw.push_back(std::move(note));
        }
        line_start = next;
    }

    std::vector<Note> notes;
    std::string_view preamble = body.substr(0, raw.empty() ? body.size() : preamble_end);
    if (!preamble.empty() && !is_blank(preamble)) {
        Note note;
        note.date = std::nullopt;
        note.text = std::string(preamble);
        notes.push_back(std::move(note));
    } else if (!preamble.empty() && !raw.empty()) {
        // Blank preamble: keep the bytes on the first header for reconstruction.
        raw.front().header.insert(0, preamble);
    }
    for (auto& r : raw) {
        Note note;
        note.date = r.date;
        note.header = std::move(r.header);
        note.text = std::string(body.substr(r.text_start, r.text_end - r.text_start));
        notes.push_back(std::move(note));
    }
    for (std::size_t i = 0; i < notes.size(); ++i) notes[i].index = static_cast<int>(i);
    return notes;
}

std::string reconstruct_body(const PatientRecord& record) {
    std::string body;
    for (const Note& note : record.notes) {
        body += note.header;
        body += note.text;
    }
    return body;
}

PatientRecord parse_patient_xml(std::string_view xml_bytes, std::string_view patient_id,
                                Warnings* warnings) {
    XmlNode root = xml_parse(xml_bytes);
    const XmlNode* text_node = root.child("TEXT");
    if (!text_node) {
        raise_data("record " + std::string(patient_id) + ": missing TEXT section");
    }

    PatientRecord record;
    record.patient_id = std::string(patient_id);
    record.notes = split_notes(text_node->text, warnings);
    if (record.notes.empty()) {
        raise_data("record " + std::string(patient_id) + " contains no notes");
    }

    const XmlNode* tags = root.child("TAGS");
    if (tags) {
        std::map<std::string, Label> labels;
        for (const XmlNode& tag : tags->children) {
            if (!is_criterion_id(tag.name)) {
                warn(warnings, "record " + std::string(patient_id) +
                                   ": ignoring unknown tag <" + tag.name + ">");
                continue;
            }
            const std::string* met = tag.attr("met");
            if (!met) {
                raise_data("record " + std::string(patient_id) + ": tag " + tag.name +
                           " has no met attribute");
            }
            auto label = label_from_text(*met);
            if (!label) {
                raise_data("record " + std::string(patient_id) + ": tag " + tag.name +
                           " has unknown met value '" + *met + "'");
            }
            if (!labels.emplace(tag.name, *label).second) {
                raise_data("record " + std::string(patient_id) + ": duplicate tag " + tag.name);
            }
        }
        std::string missing;
        for (std::string_view id : kCriterionIds) {
            if (!labels.count(std::string(id))) {
                missing += missing.empty() ? "" : ", ";
                missing += id;
            }
        }
        if (!missing.empty()) {
            raise_data("record " + std::string(patient_id) +
                       ": TAGS section is missing criteria: " + missing);
        }
        record.gold_labels = std::move(labels);
    }
    return record;
}

PatientRecord load_patient_file(const std::filesystem::path& path, Warnings* warnings) {
    return parse_patient_xml(read_file(path), path.stem().string(), warnings);
}

std::string patient_record_to_xml(const PatientRecord& record) {
    std::string xml = "<?xml version=\"1.0\" encoding=\"UTF-8\" ?>\n<PatientMatching>\n<TEXT>";
    xml += xml_cdata(reconstruct_body(record));
    xml += "</TEXT>\n";
    if (record.gold_labels) {
        xml += "<TAGS>\n";
        for (std::string_view id : kCriterionIds) {
            auto it = record.gold_labels->find(std::string(id));
            if (it == record.gold_labels->end()) continue;
            xml += "<";
            xml += id;
            xml += " met=\"";
            xml += label_text(it->second);
            xml += "\" />\n";
        }
        xml += "</TAGS>\n";
    }
    xml += "</PatientMatching>\n";
    return xml;
}

Date current_time(const PatientRecord& record) {
    std::optional<Date> latest;
    for (const Note& note : record.notes) {
        if (note.date && (!latest || *note.date > *latest)) latest = note.date;
    }
    if (!latest) {
        raise_data("record " + record.patient_id +
                   " has no dated notes; temporal criteria cannot be anchored");
    }
    return *latest;
}

std::vector<std::filesystem::path> list_patient_files(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        raise_data("not a directory: " + dir.string());
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".xml") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end(), [](const auto& a, const auto& b) {
        return a.filename().string() < b.filename().string();
    });
    return files;
}

}  // namespace cohortsieve
