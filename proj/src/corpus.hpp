#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "criteria.hpp"
#include "util.hpp"

namespace cohortsieve {

// One dated chunk of a record. `header` holds the raw bytes that introduced the
// note (the "Record date:" line, plus any blank preamble attached to the first
// note) so that concatenating header + text over all notes reproduces the
// record body exactly.
struct Note {
    int index = 0;
    std::optional<Date> date;
    std::string header;
    std::string text;
};

struct PatientRecord {
    std::string patient_id;
    std::vector<Note> notes;
    // Present only when the source XML carried a TAGS section.
    std::optional<std::map<std::string, Label>> gold_labels;
};

// Splits a record body on "Record date: YYYY-MM-DD" header lines.
// Text before the first header becomes undated note 0 when non-blank.
std::vector<Note> split_notes(std::string_view body, Warnings* warnings = nullptr);

std::string reconstruct_body(const PatientRecord& record);

PatientRecord parse_patient_xml(std::string_view xml_bytes, std::string_view patient_id,
                                Warnings* warnings = nullptr);
PatientRecord load_patient_file(const std::filesystem::path& path,
                                Warnings* warnings = nullptr);

std::string patient_record_to_xml(const PatientRecord& record);

// Anchor for temporal windows: the latest note date. Errors when no note is dated.
Date current_time(const PatientRecord& record);

std::vector<std::filesystem::path> list_patient_files(const std::filesystem::path& dir);

}  // namespace cohortsieve
