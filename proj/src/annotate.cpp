#include "annotate.hpp"

#include <algorithm>
#include <cctype>
#include <deque>

namespace cohortsieve {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)); }
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)); }
bool is_upper(char c) { return std::isupper(static_cast<unsigned char>(c)); }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)); }

// A line starting with one of these continues as a new clause after a bare newline.
bool clause_start(char c) { return is_upper(c) || c == '-' || c == '*'; }
bool sentence_start(char c) { return is_upper(c) || is_digit(c); }

bool abbreviation_before(std::string_view text, std::size_t dot) {
    std::size_t start = dot;
    while (start > 0 && !is_space(text[start - 1])) --start;
    std::string token = to_lower(text.substr(start, dot - start));
    std::size_t skip = 0;
    while (skip < token.size() && is_punct(token[skip]) && token[skip] != '.') ++skip;
    token.erase(0, skip);
    static const char* const kAbbreviations[] = {"dr", "mr", "mrs", "ms",
                                                 "vs", "e.g", "i.e", "s/p"};
    for (const char* abbr : kAbbreviations) {
        if (token == abbr) return true;
    }
    return false;
}

bool decimal_period(std::string_view text, std::size_t dot) {
    return dot > 0 && is_digit(text[dot - 1]) && dot + 1 < text.size() &&
           is_digit(text[dot + 1]);
}

}  // namespace

std::vector<Sentence> segment(std::string_view text, int note_index) {
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    std::size_t begin = 0;
    std::size_t i = 0;
    const std::size_t n = text.size();

    auto cut = [&](std::size_t end_pos, std::size_t next_begin) {
        spans.emplace_back(begin, end_pos);
        begin = next_begin;
    };

    while (i < n) {
        char c = text[i];
        if (c == '\n') {
            std::size_t j = i + 1;
            while (j < n && (text[j] == ' ' || text[j] == '\t' || text[j] == '\r')) ++j;
            if (j < n && text[j] == '\n') {
                // Blank line: paragraph boundary. Swallow the whole whitespace run.
                std::size_t k = j;
                while (k < n && is_space(text[k])) ++k;
                cut(i, k);
                i = k;
                continue;
            }
            if (j < n && clause_start(text[j])) {
                cut(i, j);
                i = j;
                continue;
            }
            ++i;
            continue;
        }
        if (c == '.' || c == '!' || c == '?') {
            std::size_t j = i + 1;
            if (j < n && is_space(text[j])) {
                while (j < n && is_space(text[j])) ++j;
                bool boundary = j < n && sentence_start(text[j]);
                if (boundary && c == '.' &&
                    (decimal_period(text, i) || abbreviation_before(text, i))) {
                    boundary = false;
                }
                if (boundary) {
                    cut(i + 1, j);
                    i = j;
                    continue;
                }
            }
            ++i;
            continue;
        }
        ++i;
    }
    spans.emplace_back(begin, n);

    std::vector<Sentence> sentences;
    for (auto [b, e] : spans) {
        while (b < e && is_space(text[b])) ++b;
        while (e > b && is_space(text[e - 1])) --e;
        if (b == e) continue;
        Sentence s;
        s.note_index = note_index;
        s.sentence_index = static_cast<int>(sentences.size());
        s.start = b;
        s.end = e;
        s.text = std::string(text.substr(b, e - b));
        sentences.push_back(std::move(s));
    }
    return sentences;
}

NormalizedText normalize_mapped(std::string_view raw) {
    NormalizedText nm;
    nm.text.reserve(raw.size());
    nm.source.reserve(raw.size());
    std::size_t i = 0;
    const std::size_t n = raw.size();
    while (i < n) {
        while (i < n && is_space(raw[i])) ++i;
        if (i >= n) break;
        std::size_t token_start = i;
        while (i < n && !is_space(raw[i])) ++i;
        std::size_t token_end = i;
        while (token_start < token_end && is_punct(raw[token_start])) ++token_start;
        while (token_end > token_start && is_punct(raw[token_end - 1])) --token_end;
        if (token_start == token_end) continue;  // punctuation-only token
        if (!nm.text.empty()) {
            nm.text += ' ';
            nm.source.push_back(token_start);
        }
        for (std::size_t k = token_start; k < token_end; ++k) {
            nm.text += static_cast<char>(std::tolower(static_cast<unsigned char>(raw[k])));
            nm.source.push_back(k);
        }
    }
    return nm;
}

std::string normalize(std::string_view text) { return normalize_mapped(text).text; }

TermMatcher::TermMatcher(const TermIndex& index) {
    nodes_.emplace_back();
    for (const auto& [term, ids] : index.entries) {
        terms_.push_back(term);
        concepts_.emplace_back(ids.begin(), ids.end());
    }
    build();
}

void TermMatcher::build() {
    for (int p = 0; p < static_cast<int>(terms_.size()); ++p) {
        int node = 0;
        for (char c : terms_[p]) {
            auto it = nodes_[node].next.find(c);
            if (it == nodes_[node].next.end()) {
                nodes_.emplace_back();
                it = nodes_[node].next.emplace(c, static_cast<int>(nodes_.size()) - 1).first;
            }
            node = it->second;
        }
        nodes_[node].out.push_back(p);
    }

    std::deque<int> queue;
    for (const auto& [c, child] : nodes_[0].next) queue.push_back(child);
    while (!queue.empty()) {
        int node = queue.front();
        queue.pop_front();
        for (const auto& [c, child] : nodes_[node].next) {
            int f = nodes_[node].fail;
            while (true) {
                auto it = nodes_[f].next.find(c);
                if (it != nodes_[f].next.end() && it->second != child) {
                    nodes_[child].fail = it->second;
                    break;
                }
                if (f == 0) {
                    nodes_[child].fail = 0;
                    break;
                }
                f = nodes_[f].fail;
            }
            const auto& inherited = nodes_[nodes_[child].fail].out;
            nodes_[child].out.insert(nodes_[child].out.end(), inherited.begin(),
                                     inherited.end());
            queue.push_back(child);
        }
    }
}

std::vector<Annotation> TermMatcher::annotate_sentence(const Sentence& sentence) const {
    std::vector<Annotation> annotations;
    if (terms_.empty()) return annotations;

    NormalizedText nm = normalize_mapped(sentence.text);
    const std::string& text = nm.text;

    struct Candidate {
        std::size_t start, end;
        int pattern;
    };
    std::vector<Candidate> candidates;

    int state = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        while (state != 0 && !nodes_[state].next.count(c)) state = nodes_[state].fail;
        auto it = nodes_[state].next.find(c);
        state = it != nodes_[state].next.end() ? it->second : 0;
        for (int p : nodes_[state].out) {
            std::size_t len = terms_[p].size();
            std::size_t start = i + 1 - len;
            bool left_ok = start == 0 || text[start - 1] == ' ';
            bool right_ok = i + 1 == text.size() || text[i + 1] == ' ';
            if (left_ok && right_ok) candidates.push_back({start, i + 1, p});
        }
    }

    // Longest match wins; ties resolve leftmost, then by pattern for determinism.
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        std::size_t la = a.end - a.start, lb = b.end - b.start;
        if (la != lb) return la > lb;
        if (a.start != b.start) return a.start < b.start;
        return a.pattern < b.pattern;
    });
    std::vector<Candidate> accepted;
    for (const Candidate& c : candidates) {
        bool overlaps = std::any_of(accepted.begin(), accepted.end(), [&](const Candidate& a) {
            return c.start < a.end && a.start < c.end;
        });
        if (!overlaps) accepted.push_back(c);
    }
    std::sort(accepted.begin(), accepted.end(),
              [](const Candidate& a, const Candidate& b) { return a.start < b.start; });

    for (const Candidate& c : accepted) {
        std::size_t raw_start = nm.source[c.start];
        std::size_t raw_end = nm.source[c.end - 1] + 1;
        for (ConceptId id : concepts_[c.pattern]) {
            Annotation a;
            a.concept_id = id;
            a.matched_term = terms_[c.pattern];
            a.start = raw_start;
            a.end = raw_end;
            a.note_index = sentence.note_index;
            a.sentence_index = sentence.sentence_index;
            annotations.push_back(std::move(a));
        }
    }
    return annotations;
}

std::vector<Annotation> TermMatcher::annotate(std::span<const Sentence> sentences) const {
    std::vector<Annotation> annotations;
    for (const Sentence& sentence : sentences) {
        auto batch = annotate_sentence(sentence);
        annotations.insert(annotations.end(), std::make_move_iterator(batch.begin()),
                           std::make_move_iterator(batch.end()));
    }
    return annotations;
}

std::vector<Annotation> annotate(std::span<const Sentence> sentences, const TermIndex& index) {
    return TermMatcher(index).annotate(sentences);
}

}  // namespace cohortsieve
