#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "util.hpp"

namespace cohortsieve {

using ConceptId = std::int64_t;

inline constexpr std::int64_t kIsATypeId = 116680003;
inline constexpr std::int64_t kFsnTypeId = 900000000000003001;

struct Concept {
    ConceptId id = 0;
    std::string preferred_term;
    std::vector<std::string> synonyms;
    std::vector<ConceptId> parents;
};

// Active concepts with IS-A edges, acyclic by construction (cycles are a load error).
class ConceptGraph {
public:
    bool contains(ConceptId id) const { return concepts_.count(id) != 0; }
    const Concept* find(ConceptId id) const;
    std::size_t size() const { return concepts_.size(); }
    const std::map<ConceptId, Concept>& concepts() const { return concepts_; }
    const std::set<ConceptId>& children_of(ConceptId id) const;

    // Reflexive transitive closure over child edges. Unknown root is an error.
    std::set<ConceptId> descendants(ConceptId root) const;

    void add_concept(Concept entry);  // duplicate id is an error
    // Builds the child index from parent lists and rejects cyclic edge sets.
    void finalize();

private:
    std::map<ConceptId, Concept> concepts_;
    std::map<ConceptId, std::set<ConceptId>> children_;
};

// RF2 snapshot loader. Inactive rows are dropped (counted in warnings); edges whose
// endpoints are missing or inactive are dropped with a warning; malformed rows are errors.
ConceptGraph load_rf2(const std::filesystem::path& concept_file,
                      const std::filesystem::path& description_file,
                      const std::filesystem::path& relationship_file,
                      Warnings* warnings = nullptr);

// Fixture TSV: id, preferred_term, synonyms ('|'-separated), parents ('|'-separated).
// No header row. A parent id absent from the file is a load error.
ConceptGraph load_simple(const std::filesystem::path& tsv_file, Warnings* warnings = nullptr);

struct CodeList {
    std::string criterion_id;
    std::vector<ConceptId> seeds;
    std::set<ConceptId> codes;  // union of seed closures; contains every seed
};

CodeList build_code_list(const ConceptGraph& graph, std::string criterion_id,
                         const std::vector<ConceptId>& seeds);

std::string code_list_to_json(const CodeList& list);  // stable bytes, ids as decimal strings
CodeList code_list_from_json(std::string_view json_text);

// Normalized surface term -> concept ids. Keys come from preferred terms and synonyms
// of the code list's concepts; terms shorter than 3 bytes after normalization are skipped.
struct TermIndex {
    std::map<std::string, std::set<ConceptId>> entries;
};

TermIndex term_index(const ConceptGraph& graph, const CodeList& list);

}  // namespace cohortsieve
