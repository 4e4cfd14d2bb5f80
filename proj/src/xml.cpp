#include "xml.hpp"

#include <cctype>
#include <charconv>

#include "util.hpp"

namespace cohortsieve {

const std::string* XmlNode::attr(std::string_view key) const {
    for (const auto& [k, v] : attributes) {
        if (k == key) return &v;
    }
    return nullptr;
}

const XmlNode* XmlNode::child(std::string_view tag) const {
    for (const auto& c : children) {
        if (c.name == tag) return &c;
    }
    return nullptr;
}

namespace {

class Parser {
public:
    explicit Parser(std::string_view doc) : doc_(doc) {}

    XmlNode parse_document() {
        skip_misc();
        if (!looking_at("<")) fail("expected root element");
        XmlNode root = parse_element();
        skip_misc();
        if (pos_ != doc_.size()) fail("trailing content after root element");
        return root;
    }

private:
    std::string_view doc_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& what) const {
        raise_data("malformed XML at byte " + std::to_string(pos_) + ": " + what);
    }

    bool looking_at(std::string_view token) const {
        return doc_.compare(pos_, token.size(), token) == 0;
    }

    char peek() const { return pos_ < doc_.size() ? doc_[pos_] : '\0'; }

    void expect(std::string_view token) {
        if (!looking_at(token)) fail("expected '" + std::string(token) + "'");
        pos_ += token.size();
    }

    void skip_ws() {
        while (pos_ < doc_.size() && std::isspace(static_cast<unsigned char>(doc_[pos_]))) ++pos_;
    }

    void skip_until(std::string_view terminator, const char* what) {
        std::size_t end = doc_.find(terminator, pos_);
        if (end == std::string_view::npos) fail(std::string("unterminated ") + what);
        pos_ = end + terminator.size();
    }

    // Whitespace, comments, processing instructions, doctype.
    void skip_misc() {
        while (true) {
            skip_ws();
            if (looking_at("<!--")) {
                pos_ += 4;
                skip_until("-->", "comment");
            } else if (looking_at("<?")) {
                pos_ += 2;
                skip_until("?>", "processing instruction");
            } else if (looking_at("<!DOCTYPE")) {
                pos_ += 9;
                skip_until(">", "doctype");
            } else {
                return;
            }
        }
    }

    static bool name_char(char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' ||
               c == '.' || c == ':';
    }

    std::string parse_name() {
        std::size_t start = pos_;
        while (pos_ < doc_.size() && name_char(doc_[pos_])) ++pos_;
        if (pos_ == start) fail("expected a name");
        return std::string(doc_.substr(start, pos_ - start));
    }

    void append_entity(std::string& out) {
        // pos_ sits just past '&'.
        std::size_t end = doc_.find(';', pos_);
        if (end == std::string_view::npos || end - pos_ > 10) fail("unterminated entity");
        std::string_view entity = doc_.substr(pos_, end - pos_);
        if (entity == "lt") {
            out += '<';
        } else if (entity == "gt") {
            out += '>';
        } else if (entity == "amp") {
            out += '&';
        } else if (entity == "quot") {
            out += '"';
        } else if (entity == "apos") {
            out += '\'';
        } else if (!entity.empty() && entity[0] == '#') {
            int base = 10;
            std::string_view digits = entity.substr(1);
            if (!digits.empty() && (digits[0] == 'x' || digits[0] == 'X')) {
                base = 16;
                digits = digits.substr(1);
            }
            unsigned code = 0;
            auto [ptr, ec] =
                std::from_chars(digits.data(), digits.data() + digits.size(), code, base);
            if (ec != std::errc{} || ptr != digits.data() + digits.size() || code == 0 ||
                code > 0x10FFFF) {
                fail("bad character reference");
            }
            append_utf8(out, code);
        } else {
            fail("unknown entity '&" + std::string(entity) + ";'");
        }
        pos_ = end + 1;
    }

    static void append_utf8(std::string& out, unsigned code) {
        if (code < 0x80) {
            out += static_cast<char>(code);
        } else if (code < 0x800) {
            out += static_cast<char>(0xC0 | (code >> 6));
            out += static_cast<char>(0x80 | (code & 0x3F));
        } else if (code < 0x10000) {
            out += static_cast<char>(0xE0 | (code >> 12));
            out += static_cast<char>(0x80 | ((code >> 6) & 0x3F));
            out += static_cast<char>(0x80 | (code & 0x3F));
        } else {
            out += static_cast<char>(0xF0 | (code >> 18));
            out += static_cast<char>(0x80 | ((code >> 12) & 0x3F));
            out += static_cast<char>(0x80 | ((code >> 6) & 0x3F));
            out += static_cast<char>(0x80 | (code & 0x3F));
        }
    }

    std::string parse_attr_value() {
        char quote = peek();
        if (quote != '"' && quote != '\'') fail("expected quoted attribute value");
        ++pos_;
        std::string value;
        while (pos_ < doc_.size() && doc_[pos_] != quote) {
            if (doc_[pos_] == '&') {
                ++pos_;
                append_entity(value);
            } else {
                value += doc_[pos_++];
            }
        }
        if (pos_ == doc_.size()) fail("unterminated attribute value");
        ++pos_;
        return value;
    }

    XmlNode parse_element() {
        expect("<");
        XmlNode node;
        node.name = parse_name();
        while (true) {
            skip_ws();
            if (looking_at("/>")) {
                pos_ += 2;
                return node;
            }
            if (looking_at(">")) {
                ++pos_;
                break;
            }
            std::string key = parse_name();
            skip_ws();
            expect("=");
            skip_ws();
            node.attributes.emplace_back(std::move(key), parse_attr_value());
        }
        parse_content(node);
        return node;
    }

    void parse_content(XmlNode& node) {
        while (true) {
            if (pos_ >= doc_.size()) fail("unexpected end inside <" + node.name + ">");
            if (looking_at("</")) {
                pos_ += 2;
                std::string name = parse_name();
                if (name != node.name) {
                    fail("mismatched close tag </" + name + "> for <" + node.name + ">");
                }
                skip_ws();
                expect(">");
                return;
            }
            if (looking_at("<!--")) {
                pos_ += 4;
                skip_until("-->", "comment");
            } else if (looking_at("<![CDATA[")) {
                pos_ += 9;
                std::size_t end = doc_.find("]]>", pos_);
                if (end == std::string_view::npos) fail("unterminated CDATA section");
                node.text.append(doc_.substr(pos_, end - pos_));
                pos_ = end + 3;
            } else if (looking_at("<")) {
                node.children.push_back(parse_element());
            } else if (looking_at("&")) {
                ++pos_;
                append_entity(node.text);
            } else {
                node.text += doc_[pos_++];
            }
        }
    }
};

std::string escape(std::string_view text, bool attr) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"':
                if (attr) {
                    out += "&quot;";
                } else {
                    out += c;
                }
                break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

XmlNode xml_parse(std::string_view doc) { return Parser(doc).parse_document(); }

std::string xml_escape_text(std::string_view text) { return escape(text, false); }
std::string xml_escape_attr(std::string_view text) { return escape(text, true); }

std::string xml_cdata(std::string_view text) {
    std::string out = "<![CDATA[";
    std::size_t start = 0;
    while (true) {
        std::size_t pos = text.find("]]>", start);
        if (pos == std::string_view::npos) {
            out.append(text.substr(start));
            break;
        }
        // Close after "]]" and reopen before ">" so the literal survives round-trips.
        out.append(text.substr(start, pos - start + 2));
        out += "]]><![CDATA[";
        start = pos + 2;
    }
    out += "]]>";
    return out;
}

}  // namespace cohortsieve
