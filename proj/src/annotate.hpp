#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ontology.hpp"

namespace cohortsieve {

// Slice of a note, trimmed; offsets are bytes into the note text.
struct Sentence {
    int note_index = 0;
    int sentence_index = 0;
    std::size_t start = 0;
    std::size_t end = 0;
    std::string text;
};

// Splits note text on blank lines, newline-before-clause-start, and
// terminal punctuation followed by a capitalized continuation.
std::vector<Sentence> segment(std::string_view note_text, int note_index = 0);

// Lowercased, whitespace-collapsed, token-edge punctuation stripped.
// Internal punctuation (hyphens, slashes, decimal points) is preserved.
std::string normalize(std::string_view text);

// Normalized text plus a map from each normalized byte back to its source byte.
struct NormalizedText {
    std::string text;
    std::vector<std::size_t> source;  // source[i] = raw offset of text[i]
};
NormalizedText normalize_mapped(std::string_view raw);

struct Annotation {
    ConceptId concept_id = 0;
    std::string matched_term;  // normalized form
    std::size_t start = 0;     // bytes into the raw sentence text
    std::size_t end = 0;
    int note_index = 0;
    int sentence_index = 0;
};

// Multi-pattern matcher over normalized sentence text. Matches only at token
// boundaries; overlaps resolve longest-match-first, then leftmost.
class TermMatcher {
public:
    TermMatcher() = default;
    explicit TermMatcher(const TermIndex& index);

    bool empty() const { return terms_.empty(); }
    std::vector<Annotation> annotate_sentence(const Sentence& sentence) const;
    std::vector<Annotation> annotate(std::span<const Sentence> sentences) const;

private:
    struct Node {
        std::map<char, int> next;
        int fail = 0;
        std::vector<int> out;  // pattern indices ending here
    };

    std::vector<std::string> terms_;
    std::vector<std::vector<ConceptId>> concepts_;  // per pattern, ascending
    std::vector<Node> nodes_;

    void build();
};

std::vector<Annotation> annotate(std::span<const Sentence> sentences, const TermIndex& index);

}  // namespace cohortsieve
