#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cohortsieve {

// Minimal XML document model, enough for the patient-record schema.
// Text content accumulates across character data and CDATA sections;
// CDATA bytes are taken raw, other text is entity-decoded.
struct XmlNode {
    std::string name;
    std::vector<std::pair<std::string, std::string>> attributes;
    std::vector<XmlNode> children;
    std::string text;

    const std::string* attr(std::string_view key) const;
    const XmlNode* child(std::string_view tag) const;  // first match or nullptr
};

XmlNode xml_parse(std::string_view doc);  // throws Error(data) with a byte offset

std::string xml_escape_text(std::string_view text);
std::string xml_escape_attr(std::string_view text);
// Wraps text in CDATA, splitting around any literal "]]>".
std::string xml_cdata(std::string_view text);

}  // namespace cohortsieve
