#include "ontology.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <deque>

#include "json.hpp"

#include "annotate.hpp"

namespace cohortsieve {

namespace {

const std::set<ConceptId> kNoChildren;

std::optional<ConceptId> parse_concept_id(std::string_view text) {
    if (text.empty() || text.size() > 18) return std::nullopt;
    if (!std::all_of(text.begin(), text.end(),
                     [](unsigned char c) { return std::isdigit(c); })) {
        return std::nullopt;
    }
    ConceptId id = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), id);
    if (ec != std::errc{} || ptr != text.data() + text.size() || id <= 0) return std::nullopt;
    return id;
}

// "Myocardial infarction (disorder)" -> "Myocardial infarction".
std::string strip_semantic_tag(std::string_view fsn) {
    if (fsn.empty() || fsn.back() != ')') return std::string(fsn);
    std::size_t open = fsn.rfind(" (");
    if (open == std::string_view::npos) return std::string(fsn);
    return std::string(fsn.substr(0, open));
}

struct TsvReader {
    std::string contents;
    std::string file_label;
    std::size_t pos = 0;
    std::size_t line_no = 0;

    TsvReader(const std::filesystem::path& path)
        : contents(read_file(path)), file_label(path.filename().string()) {}

    // Returns false at end of input. Skips fully empty lines.
    bool next_row(std::vector<std::string>& fields, std::size_t expected_columns) {
        while (pos < contents.size()) {
            std::size_t end = contents.find('\n', pos);
            if (end == std::string::npos) end = contents.size();
            std::string_view line(contents.data() + pos, end - pos);
            pos = end + (end < contents.size() ? 1 : 0);
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
            if (line.empty()) continue;
            auto parts = split(line, '\t');
            if (parts.size() != expected_columns) {
                raise_data(file_label + ":" + std::to_string(line_no) + ": expected " +
                           std::to_string(expected_columns) + " tab-separated columns, got " +
                           std::to_string(parts.size()));
            }
            fields = std::move(parts);
            return true;
        }
        return false;
    }

    [[noreturn]] void fail(const std::string& what) const {
        raise_data(file_label + ":" + std::to_string(line_no) + ": " + what);
    }
};

ConceptId require_id(TsvReader& reader, std::string_view text, const char* what) {
    auto id = parse_concept_id(text);
    if (!id) reader.fail(std::string("bad ") + what + " '" + std::string(text) + "'");
    return *id;
}

void push_unique(std::vector<std::string>& values, std::string value) {
    if (std::find(values.begin(), values.end(), value) == values.end()) {
        values.push_back(std::move(value));
    }
}

void push_unique(std::vector<ConceptId>& values, ConceptId value) {
    if (std::find(values.begin(), values.end(), value) == values.end()) {
        values.push_back(value);
    }
}

}  // namespace

const Concept* ConceptGraph::find(ConceptId id) const {
    auto it = concepts_.find(id);
    return it == concepts_.end() ? nullptr : &it->second;
}

const std::set<ConceptId>& ConceptGraph::children_of(ConceptId id) const {
    auto it = children_.find(id);
    return it == children_.end() ? kNoChildren : it->second;
}

std::set<ConceptId> ConceptGraph::descendants(ConceptId root) const {
    if (!contains(root)) {
        raise_data("unknown concept " + std::to_string(root) + " in descendants()");
    }
    std::set<ConceptId> closure;
    std::deque<ConceptId> frontier{root};
    closure.insert(root);
    while (!frontier.empty()) {
        ConceptId current = frontier.front();
        frontier.pop_front();
        for (ConceptId child : children_of(current)) {
            if (closure.insert(child).second) frontier.push_back(child);
        }
    }
    return closure;
}

void ConceptGraph::add_concept(Concept entry) {
    ConceptId id = entry.id;
    if (!concepts_.emplace(id, std::move(entry)).second) {
        raise_data("duplicate concept id " + std::to_string(id));
    }
}

void ConceptGraph::finalize() {
    children_.clear();
    std::map<ConceptId, std::size_t> pending_parents;  // Kahn over child edges
    for (const auto& [id, entry] : concepts_) {
        pending_parents[id] = entry.parents.size();
        for (ConceptId parent : entry.parents) children_[parent].insert(id);
    }

    std::deque<ConceptId> roots;
    for (const auto& [id, degree] : pending_parents) {
        if (degree == 0) roots.push_back(id);
    }
    std::size_t visited = 0;
    while (!roots.empty()) {
        ConceptId current = roots.front();
        roots.pop_front();
        ++visited;
        for (ConceptId child : children_of(current)) {
            if (--pending_parents[child] == 0) roots.push_back(child);
        }
    }
    if (visited == concepts_.size()) return;

    // Walk parent links inside the unresolved subgraph to surface one concrete cycle.
    ConceptId start = 0;
    for (const auto& [id, degree] : pending_parents) {
        if (degree != 0) {
            start = id;
            break;
        }
    }
    std::vector<ConceptId> path;
    std::set<ConceptId> on_path;
    ConceptId current = start;
    while (on_path.insert(current).second) {
        path.push_back(current);
        const Concept* c = find(current);
        ConceptId next = 0;
        for (ConceptId parent : c->parents) {
            if (pending_parents.count(parent) && pending_parents[parent] != 0) {
                next = parent;
                break;
            }
        }
        current = next;
    }
    std::string message = "IS-A cycle detected: ";
    auto first = std::find(path.begin(), path.end(), current);
    for (auto it = first; it != path.end(); ++it) {
        message += std::to_string(*it) + " -> ";
    }
    message += std::to_string(current);
    raise_data(message);
}

ConceptGraph load_rf2(const std::filesystem::path& concept_file,
                      const std::filesystem::path& description_file,
                      const std::filesystem::path& relationship_file, Warnings* warnings) {
    std::map<ConceptId, Concept> concepts;
    std::set<ConceptId> inactive;
    std::vector<std::string> row;

    // Concepts: id, effectiveTime, active, moduleId, definitionStatusId.
    {
        TsvReader reader(concept_file);
        std::size_t dropped = 0;
        bool header = true;
        while (reader.next_row(row, 5)) {
            if (header) {
                header = false;
                continue;
            }
            ConceptId id = require_id(reader, row[0], "concept id");
            if (row[2] != "1") {
                inactive.insert(id);
                ++dropped;
                continue;
            }
            if (concepts.count(id)) reader.fail("duplicate concept id " + row[0]);
            concepts[id] = Concept{id, "", {}, {}};
        }
        if (dropped > 0) {
            warn(warnings,
                 "dropped " + std::to_string(dropped) + " inactive concept rows from " +
                     concept_file.filename().string());
        }
    }

    // Descriptions: id, effectiveTime, active, moduleId, conceptId, languageCode,
    // typeId, term, caseSignificanceId.
    {
        TsvReader reader(description_file);
        std::size_t skipped = 0;
        bool header = true;
        while (reader.next_row(row, 9)) {
            if (header) {
                header = false;
                continue;
            }
            if (row[2] != "1") {
                ++skipped;
                continue;
            }
            ConceptId concept_id = require_id(reader, row[4], "concept id");
            auto it = concepts.find(concept_id);
            if (it == concepts.end()) {
                ++skipped;  // description of an inactive or unknown concept
                continue;
            }
            ConceptId type_id = require_id(reader, row[6], "description type id");
            const std::string& term = row[7];
            if (term.empty()) reader.fail("empty term");
            if (type_id == kFsnTypeId) {
                std::string stripped = strip_semantic_tag(term);
                if (it->second.preferred_term.empty()) {
                    it->second.preferred_term = std::move(stripped);
                } else {
                    push_unique(it->second.synonyms, std::move(stripped));
                }
            } else {
                push_unique(it->second.synonyms, term);
            }
        }
        if (skipped > 0) {
            warn(warnings,
                 "skipped " + std::to_string(skipped) + " inactive or unresolvable description rows from " +
                     description_file.filename().string());
        }
    }

    // Relationships: id, effectiveTime, active, moduleId, sourceId, destinationId,
    // relationshipGroup, typeId, characteristicTypeId, modifierId.
    {
        TsvReader reader(relationship_file);
        std::size_t dropped_edges = 0;
        bool header = true;
        while (reader.next_row(row, 10)) {
            if (header) {
                header = false;
                continue;
            }
            if (row[2] != "1") continue;
            ConceptId type_id = require_id(reader, row[7], "relationship type id");
            if (type_id != kIsATypeId) continue;
            ConceptId source = require_id(reader, row[4], "source id");
            ConceptId destination = require_id(reader, row[5], "destination id");
            if (!concepts.count(source) || !concepts.count(destination)) {
                ++dropped_edges;
                continue;
            }
            push_unique(concepts[source].parents, destination);
        }
        if (dropped_edges > 0) {
            warn(warnings, "dropped " + std::to_string(dropped_edges) +
                               " IS-A edges with missing or inactive endpoints from " +
                               relationship_file.filename().string());
        }
    }

    std::size_t unnamed = 0;
    for (auto& [id, entry] : concepts) {
        if (entry.preferred_term.empty()) {
            if (!entry.synonyms.empty()) {
                entry.preferred_term = entry.synonyms.front();
                entry.synonyms.erase(entry.synonyms.begin());
            } else {
                entry.preferred_term = std::to_string(id);
                ++unnamed;
            }
        }
    }
    if (unnamed > 0) {
        warn(warnings, std::to_string(unnamed) +
                           " concepts have no active description; using the id as preferred term");
    }

    ConceptGraph graph;
    for (auto& [id, entry] : concepts) graph.add_concept(std::move(entry));
    graph.finalize();
    return graph;
}

ConceptGraph load_simple(const std::filesystem::path& tsv_file, Warnings* warnings) {
    (void)warnings;
    TsvReader reader(tsv_file);
    std::vector<std::string> row;
    ConceptGraph graph;
    std::vector<std::pair<ConceptId, ConceptId>> edges;  // (child, parent)

    while (reader.next_row(row, 4)) {
        Concept entry;
        entry.id = require_id(reader, row[0], "concept id");
        entry.preferred_term = row[1];
        if (entry.preferred_term.empty()) reader.fail("empty preferred term");
        if (!row[2].empty()) {
            for (auto& synonym : split(row[2], '|')) {
                if (!synonym.empty()) push_unique(entry.synonyms, std::move(synonym));
            }
        }
        if (!row[3].empty()) {
            for (auto& parent : split(row[3], '|')) {
                if (parent.empty()) continue;
                ConceptId parent_id = require_id(reader, parent, "parent id");
                push_unique(entry.parents, parent_id);
                edges.emplace_back(entry.id, parent_id);
            }
        }
        graph.add_concept(std::move(entry));
    }

    for (const auto& [child, parent] : edges) {
        if (!graph.contains(parent)) {
            raise_data(reader.file_label + ": concept " + std::to_string(child) +
                       " references unknown parent " + std::to_string(parent));
        }
    }
    graph.finalize();
    return graph;
}

CodeList build_code_list(const ConceptGraph& graph, std::string criterion_id,
                         const std::vector<ConceptId>& seeds) {
    if (seeds.empty()) {
        raise_data("criterion " + criterion_id + " has no seed concepts");
    }
    CodeList list;
    list.criterion_id = std::move(criterion_id);
    for (ConceptId seed : seeds) {
        if (!graph.contains(seed)) {
            raise_data("criterion " + list.criterion_id + ": unknown seed concept " +
                       std::to_string(seed));
        }
        push_unique(list.seeds, seed);
        auto closure = graph.descendants(seed);
        list.codes.insert(closure.begin(), closure.end());
    }
    return list;
}

std::string code_list_to_json(const CodeList& list) {
    nlohmann::ordered_json doc;
    doc["criterion_id"] = list.criterion_id;
    auto& seeds = doc["seeds"] = nlohmann::ordered_json::array();
    for (ConceptId seed : list.seeds) seeds.push_back(std::to_string(seed));
    auto& codes = doc["codes"] = nlohmann::ordered_json::array();
    for (ConceptId code : list.codes) codes.push_back(std::to_string(code));
    return doc.dump(2) + "\n";
}

CodeList code_list_from_json(std::string_view json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        raise_data(std::string("bad code list JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("criterion_id") || !doc.contains("seeds") ||
        !doc.contains("codes")) {
        raise_data("code list JSON must carry criterion_id, seeds and codes");
    }
    CodeList list;
    list.criterion_id = doc["criterion_id"].get<std::string>();
    auto read_id = [&](const nlohmann::json& value) -> ConceptId {
        std::string text =
            value.is_string() ? value.get<std::string>() : nlohmann::to_string(value);
        auto id = parse_concept_id(text);
        if (!id) raise_data("bad concept id '" + text + "' in code list " + list.criterion_id);
        return *id;
    };
    for (const auto& value : doc["seeds"]) push_unique(list.seeds, read_id(value));
    for (const auto& value : doc["codes"]) list.codes.insert(read_id(value));
    for (ConceptId seed : list.seeds) {
        if (!list.codes.count(seed)) {
            raise_data("code list " + list.criterion_id + " is missing its own seed " +
                       std::to_string(seed));
        }
    }
    return list;
}

TermIndex term_index(const ConceptGraph& graph, const CodeList& list) {
    TermIndex index;
    auto add_term = [&](std::string_view term, ConceptId id) {
        std::string key = normalize(term);
        if (key.size() < 3) return;
        index.entries[key].insert(id);
    };
    for (ConceptId code : list.codes) {
        const Concept* entry = graph.find(code);
        if (!entry) {
            raise_data("code list " + list.criterion_id + " references concept " +
                       std::to_string(code) + " absent from the graph");
        }
        add_term(entry->preferred_term, code);
        for (const auto& synonym : entry->synonyms) add_term(synonym, code);
    }
    return index;
}

}  // namespace cohortsieve
