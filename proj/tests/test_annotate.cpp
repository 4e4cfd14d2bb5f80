#include <algorithm>
#include <random>

#include "doctest.h"

#include "annotate.hpp"
#include "ontology.hpp"

using namespace cohortsieve;

namespace {

Sentence make_sentence(std::string text) {
    Sentence s;
    s.note_index = 0;
    s.sentence_index = 0;
    s.start = 0;
    s.end = text.size();
    s.text = std::move(text);
    return s;
}

TermIndex index_of(std::initializer_list<std::pair<std::string, ConceptId>> terms) {
    TermIndex index;
    for (const auto& [term, id] : terms) index.entries[term].insert(id);
    return index;
}

// Candidate generation by naive substring scanning instead of the automaton;
// selection reimplements the same longest-then-leftmost greedy contract.
std::vector<Annotation> naive_annotate(const Sentence& sentence, const TermIndex& index) {
    NormalizedText nm = normalize_mapped(sentence.text);
    struct Candidate {
        std::size_t start, end;
        std::string term;
    };
    std::vector<Candidate> candidates;
    for (const auto& [term, ids] : index.entries) {
        for (std::size_t at = nm.text.find(term); at != std::string::npos;
             at = nm.text.find(term, at + 1)) {
            bool left_ok = at == 0 || nm.text[at - 1] == ' ';
            std::size_t end = at + term.size();
            bool right_ok = end == nm.text.size() || nm.text[end] == ' ';
            if (left_ok && right_ok) candidates.push_back({at, end, term});
        }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        std::size_t la = a.end - a.start, lb = b.end - b.start;
        if (la != lb) return la > lb;
        if (a.start != b.start) return a.start < b.start;
        return a.term < b.term;
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
    std::vector<Annotation> out;
    for (const Candidate& c : accepted) {
        for (ConceptId id : index.entries.at(c.term)) {
            Annotation a;
            a.concept_id = id;
            a.matched_term = c.term;
            a.start = nm.source[c.start];
            a.end = nm.source[c.end - 1] + 1;
            a.note_index = sentence.note_index;
            a.sentence_index = sentence.sentence_index;
            out.push_back(std::move(a));
        }
    }
    return out;
}

bool same_annotations(const std::vector<Annotation>& a, const std::vector<Annotation>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].concept_id != b[i].concept_id || a[i].matched_term != b[i].matched_term ||
            a[i].start != b[i].start || a[i].end != b[i].end) {
            return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("normalize lowercases, collapses whitespace and strips edge punctuation") {
    CHECK(normalize("Small-Bowel  Obstruction,") == "small-bowel obstruction");
    CHECK(normalize("  (Aspirin)  81mg/day. ") == "aspirin 81mg/day");
    CHECK(normalize("HbA1c: 7.2%") == "hba1c 7.2");
    CHECK(normalize("!!!") == "");
    CHECK(normalize("a\t\nb") == "a b");
    CHECK(normalize("") == "");
}

TEST_CASE("normalize keeps internal hyphens, slashes and decimals") {
    CHECK(normalize("s/p CABG") == "s/p cabg");
    CHECK(normalize("value 3.5 units") == "value 3.5 units");
    CHECK(normalize("x-ray") == "x-ray");
}

TEST_CASE("normalize_mapped offsets point at the source bytes") {
    std::string raw = "  Big,  DOG! ";
    NormalizedText nm = normalize_mapped(raw);
    CHECK(nm.text == "big dog");
    REQUIRE(nm.source.size() == nm.text.size());
    for (std::size_t i = 0; i < nm.text.size(); ++i) {
        if (nm.text[i] == ' ') continue;
        char expected = static_cast<char>(std::tolower(raw[nm.source[i]]));
        CHECK(nm.text[i] == expected);
    }
    CHECK(nm.source[0] == 2);  // 'b' of Big
    CHECK(nm.source[4] == 8);  // 'd' of DOG
}

TEST_CASE("segment splits on blank lines") {
    auto s = segment("First paragraph line one\nline two\n\nSecond paragraph");
    REQUIRE(s.size() == 2);
    CHECK(s[0].text == "First paragraph line one\nline two");
    CHECK(s[1].text == "Second paragraph");
    CHECK(s[1].sentence_index == 1);
}

TEST_CASE("segment splits on newline before a clause start") {
    auto s = segment("vitals stable\nBlood pressure 120/80\n- denies pain\n* on aspirin\nand more");
    REQUIRE(s.size() == 4);
    CHECK(s[0].text == "vitals stable");
    CHECK(s[1].text == "Blood pressure 120/80");
    CHECK(s[2].text == "- denies pain");
    // "and more" starts lowercase: no boundary after "* on aspirin".
    CHECK(s[3].text == "* on aspirin\nand more");
}

TEST_CASE("segment splits after terminal punctuation before a capital or digit") {
    auto s = segment("Seen today. Plans made! Follow up? 3 weeks. then lowercase continues");
    REQUIRE(s.size() == 4);
    CHECK(s[0].text == "Seen today.");
    CHECK(s[1].text == "Plans made!");
    CHECK(s[2].text == "Follow up?");
    CHECK(s[3].text == "3 weeks. then lowercase continues");
}

TEST_CASE("segment spares abbreviations and decimals") {
    auto s = segment("Seen by Dr. Smith today. Dose 2.5 Mg daily. Stable vs. Prior exam.");
    REQUIRE(s.size() == 3);
    CHECK(s[0].text == "Seen by Dr. Smith today.");
    CHECK(s[1].text == "Dose 2.5 Mg daily.");
    CHECK(s[2].text == "Stable vs. Prior exam.");

    auto t = segment("Improved s/p. Surgery went well, e.g. No complications.");
    REQUIRE(t.size() == 1);
}

TEST_CASE("segment trims whitespace and keeps offsets into the note") {
    std::string note = "  Alpha beta.  Gamma delta.  ";
    auto s = segment(note, 7);
    REQUIRE(s.size() == 2);
    CHECK(s[0].note_index == 7);
    CHECK(note.substr(s[0].start, s[0].end - s[0].start) == s[0].text);
    CHECK(note.substr(s[1].start, s[1].end - s[1].start) == s[1].text);
    CHECK(s[0].text == "Alpha beta.");
    CHECK(s[1].text == "Gamma delta.");
}

TEST_CASE("blank text yields no sentences") {
    CHECK(segment("").empty());
    CHECK(segment(" \n \n ").empty());
}

TEST_CASE("matcher honors token boundaries") {
    TermIndex index = index_of({{"art", 1}});
    TermMatcher matcher(index);
    CHECK(matcher.annotate_sentence(make_sentence("the heart is fine")).empty());
    CHECK(matcher.annotate_sentence(make_sentence("artful dodger")).empty());
    auto hits = matcher.annotate_sentence(make_sentence("state of the art!"));
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].concept_id == 1);
}

TEST_CASE("longest match wins over contained and overlapping shorter matches") {
    TermIndex index = index_of({{"bowel obstruction", 1}, {"small bowel obstruction", 2},
                                {"obstruction", 3}});
    TermMatcher matcher(index);
    auto hits = matcher.annotate_sentence(make_sentence("Dx: Small Bowel  Obstruction,"));
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].concept_id == 2);
    CHECK(hits[0].matched_term == "small bowel obstruction");
}

TEST_CASE("internal hyphens are preserved, so hyphen and space variants differ") {
    TermIndex index = index_of({{"bowel obstruction", 1}});
    TermMatcher matcher(index);
    // "small-bowel" is one token; the space-separated term cannot start inside it.
    CHECK(matcher.annotate_sentence(make_sentence("small-bowel obstruction")).empty());
    CHECK(matcher.annotate_sentence(make_sentence("small bowel obstruction")).size() == 1);
}

TEST_CASE("raw offsets slice the original sentence text") {
    TermIndex index = index_of({{"small-bowel obstruction", 2}});
    TermMatcher matcher(index);
    std::string raw = "Dx:  Small-Bowel  OBSTRUCTION, likely";
    auto hits = matcher.annotate_sentence(make_sentence(raw));
    REQUIRE(hits.size() == 1);
    std::string slice = raw.substr(hits[0].start, hits[0].end - hits[0].start);
    CHECK(slice == "Small-Bowel  OBSTRUCTION");
}

TEST_CASE("non-overlapping matches are all reported in order") {
    TermIndex index = index_of({{"aspirin", 1}, {"fish oil", 2}});
    TermMatcher matcher(index);
    auto hits = matcher.annotate_sentence(
        make_sentence("takes aspirin daily and fish oil weekly"));
    REQUIRE(hits.size() == 2);
    CHECK(hits[0].concept_id == 1);
    CHECK(hits[1].concept_id == 2);
    CHECK(hits[0].start < hits[1].start);
}

TEST_CASE("one term mapping to several concepts emits ascending concept ids") {
    TermIndex index;
    index.entries["angina"] = {9, 3, 5};
    TermMatcher matcher(index);
    auto hits = matcher.annotate_sentence(make_sentence("angina"));
    REQUIRE(hits.size() == 3);
    CHECK(hits[0].concept_id == 3);
    CHECK(hits[1].concept_id == 5);
    CHECK(hits[2].concept_id == 9);
}

TEST_CASE("a longer term added later supersedes the shorter matches it overlaps") {
    Sentence s = make_sentence("aa bb cc dd");
    TermIndex small = index_of({{"aa bb", 1}, {"cc dd", 2}});
    auto before = TermMatcher(small).annotate_sentence(s);
    REQUIRE(before.size() == 2);

    TermIndex larger = small;
    larger.entries["bb cc dd"].insert(3);
    auto after = TermMatcher(larger).annotate_sentence(s);
    // "bb cc dd" spans [3,11) and overlaps both short matches ("aa bb" shares
    // the bb token), so adding a term shrinks the accepted set: coverage does
    // not grow monotonically with the vocabulary.
    REQUIRE(after.size() == 1);
    CHECK(after[0].concept_id == 3);
    CHECK(after[0].matched_term == "bb cc dd");
}

TEST_CASE("empty matcher annotates nothing") {
    TermMatcher matcher;
    CHECK(matcher.empty());
    CHECK(matcher.annotate_sentence(make_sentence("anything at all")).empty());
}

TEST_CASE("automaton agrees with the naive oracle on random text") {
    const std::vector<std::string> vocab = {"alpha", "beta", "gamma", "delta", "beta gamma",
                                            "alpha beta", "alpha beta gamma", "gamma delta",
                                            "epsilon", "delta epsilon"};
    std::mt19937_64 rng(11);
    TermIndex index;
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        index.entries[vocab[i]].insert(static_cast<ConceptId>(i + 1));
        if (rng() % 3 == 0) index.entries[vocab[i]].insert(static_cast<ConceptId>(100 + i));
    }
    TermMatcher matcher(index);

    const std::vector<std::string> words = {"alpha", "beta",  "gamma", "delta",
                                            "epsilon", "zeta", "ALPHA", "Beta,"};
    for (int trial = 0; trial < 1200; ++trial) {
        std::string text;
        int length = 1 + static_cast<int>(rng() % 12);
        for (int w = 0; w < length; ++w) {
            if (w > 0) text += (rng() % 5 == 0) ? "  " : " ";
            text += words[rng() % words.size()];
        }
        Sentence s = make_sentence(text);
        auto fast = matcher.annotate_sentence(s);
        auto slow = naive_annotate(s, index);
        REQUIRE_MESSAGE(same_annotations(fast, slow), "text: ", text);
    }
}
