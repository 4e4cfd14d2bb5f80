#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "annotate.hpp"
#include "corpus.hpp"

namespace cohortsieve {

struct SummaryBlock {
    std::optional<Date> note_date;
    std::vector<std::string> sentences;  // source order, verbatim slices
};

struct Summary {
    std::string patient_id;
    std::string criterion_id;
    std::vector<SummaryBlock> blocks;   // note order; no empty blocks
    std::size_t word_count = 0;         // of render(*this)
};

// Keeps exactly the sentences carrying an annotation whose concept is in the
// code list, grouped per note. `sentences_by_note` is indexed by note index.
Summary extract(const PatientRecord& record,
                const std::vector<std::vector<Sentence>>& sentences_by_note,
                std::span<const Annotation> annotations, const CodeList& list);

// Drops dated blocks outside [current - window_days, current]. Undated blocks
// are kept conservatively, with a warning.
Summary temporal_filter(const Summary& summary, const Date& current, int window_days,
                        Warnings* warnings = nullptr);

// One paragraph per block: "Record date: YYYY-MM-DD" (or "Record date: unknown"),
// a newline, then the block's sentences joined by single spaces. Blocks are
// separated by blank lines.
std::string render(const Summary& summary);

// First max_words whitespace-delimited words; internal whitespace preserved.
std::string truncate_words(std::string_view text, std::size_t max_words);

// Full-record pseudo-summary: one block per note whose body is non-blank,
// carrying the trimmed note text as a single "sentence".
Summary full_text_summary(const PatientRecord& record);

std::string summary_to_json(const Summary& summary);
Summary summary_from_json(std::string_view json_text);

}  // namespace cohortsieve
