#pragma once

// Thin RAII wrapper over expat. Collects an element tree with byte spans so
// callers can recover the verbatim source of any element.

#include "flatpose/core/error.hpp"

#include <expat.h>

#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace flatpose::docparse {

struct XmlElement {
    std::string name;
    std::vector<std::pair<std::string, std::string>> attributes;
    std::vector<std::size_t> children;  // indices into XmlTree::elements
    std::size_t begin = 0;              // offset of '<' of the start tag
    std::size_t end = 0;                // one past the '>' of the end tag
    std::size_t content_begin = 0;      // one past the start tag
    std::size_t content_end = 0;        // offset of the end tag

    const std::string* attribute(std::string_view key) const {
        for (const auto& [k, v] : attributes)
            if (k == key) return &v;
        return nullptr;
    }

    /// Name with any namespace prefix removed.
    std::string_view local_name() const {
        std::string_view n = name;
        const auto colon = n.rfind(':');
        return colon == std::string_view::npos ? n : n.substr(colon + 1);
    }
};

struct XmlTree {
    std::vector<XmlElement> elements;  // elements[0] is the root

    const XmlElement& root() const { return elements.front(); }
};

namespace detail {

struct XmlBuildState {
    XML_Parser parser = nullptr;
    XmlTree tree;
    std::vector<std::size_t> stack;
};

inline void XMLCALL on_xml_start(void* user, const XML_Char* name, const XML_Char** atts) {
    auto* st = static_cast<XmlBuildState*>(user);
    XmlElement el;
    el.name = name;
    for (int i = 0; atts[i] != nullptr; i += 2) el.attributes.emplace_back(atts[i], atts[i + 1]);
    el.begin = static_cast<std::size_t>(XML_GetCurrentByteIndex(st->parser));
    el.content_begin = el.begin + static_cast<std::size_t>(XML_GetCurrentByteCount(st->parser));
    const std::size_t idx = st->tree.elements.size();
    if (!st->stack.empty()) st->tree.elements[st->stack.back()].children.push_back(idx);
    st->tree.elements.push_back(std::move(el));
    st->stack.push_back(idx);
}

inline void XMLCALL on_xml_end(void* user, const XML_Char*) {
    auto* st = static_cast<XmlBuildState*>(user);
    auto& el = st->tree.elements[st->stack.back()];
    const auto at = static_cast<std::size_t>(XML_GetCurrentByteIndex(st->parser));
    const auto count = static_cast<std::size_t>(XML_GetCurrentByteCount(st->parser));
    if (count == 0) {
        // self-closing tag: expat reports the end event with no bytes of its own
        el.content_begin = el.content_end = el.end = el.content_begin;
    } else {
        el.content_end = at;
        el.end = at + count;
    }
    st->stack.pop_back();
}

}  // namespace detail

/// Parses a complete XML document. Throws ParseError with the byte offset
/// reported by expat on malformed input.
inline XmlTree parse_xml(std::string_view bytes) {
    std::unique_ptr<std::remove_pointer_t<XML_Parser>, void (*)(XML_Parser)> parser(XML_ParserCreate("UTF-8"),
                                                                                    &XML_ParserFree);
    if (!parser) throw Error("xml: cannot allocate parser");
    detail::XmlBuildState st;
    st.parser = parser.get();
    XML_SetUserData(parser.get(), &st);
    XML_SetElementHandler(parser.get(), detail::on_xml_start, detail::on_xml_end);
    if (XML_Parse(parser.get(), bytes.data(), static_cast<int>(bytes.size()), XML_TRUE) == XML_STATUS_ERROR) {
        const auto offset = static_cast<std::size_t>(XML_GetCurrentByteIndex(parser.get()));
        throw ParseError(std::string("malformed XML: ") + XML_ErrorString(XML_GetErrorCode(parser.get())), offset);
    }
    if (st.tree.elements.empty()) throw ParseError("malformed XML: no root element", 0);
    return std::move(st.tree);
}

}  // namespace flatpose::docparse
