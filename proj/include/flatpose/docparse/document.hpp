#pragma once

// Manufacturing document container:
//
//   <manufacturing-document>
//     <part category="1" name="01">
//       <svg xmlns="http://www.w3.org/2000/svg"><path d="M 0 0 L ... Z"/></svg>
//     </part>
//     ...
//   </manufacturing-document>
//
// The root element name is not checked. Every `part` child must carry an
// integer `category` >= 1, unique within the document. The part's inner
// markup is kept verbatim as the SVG source.

#include "flatpose/core/error.hpp"
#include "flatpose/docparse/profile.hpp"
#include "flatpose/docparse/xml.hpp"

#include <charconv>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace flatpose::docparse {

struct PartEntry {
    int category_id = 0;
    std::string name;
    std::string svg_source;
};

struct ManufacturingDoc {
    std::vector<PartEntry> parts;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

}  // namespace detail

inline ManufacturingDoc parse_document(std::string_view xml_bytes) {
    const XmlTree tree = parse_xml(xml_bytes);
    ManufacturingDoc doc;
    std::set<int> seen;
    for (const std::size_t idx : tree.root().children) {
        const XmlElement& el = tree.elements[idx];
        if (el.local_name() != "part") continue;
        const std::string where = "<" + el.name + "> at byte " + std::to_string(el.begin);
        const std::string* cat = el.attribute("category");
        if (cat == nullptr) throw SchemaError(where + " is missing the 'category' attribute");
        int id = 0;
        const std::string_view cv = detail::trim(*cat);
        auto [ptr, ec] = std::from_chars(cv.data(), cv.data() + cv.size(), id);
        if (ec != std::errc() || ptr != cv.data() + cv.size() || id < 1)
            throw SchemaError(where + " has invalid category '" + *cat + "' (integer >= 1 expected)");
        if (!seen.insert(id).second) throw SchemaError(where + " repeats category " + std::to_string(id));
        PartEntry part;
        part.category_id = id;
        if (const auto* n = el.attribute("name")) part.name = *n;
        part.svg_source = std::string(detail::trim(xml_bytes.substr(el.content_begin, el.content_end - el.content_begin)));
        doc.parts.push_back(std::move(part));
    }
    return doc;
}

/// Parses every part's SVG into a profile carrying its category id.
inline std::vector<Profile2D> document_profiles(const ManufacturingDoc& doc,
                                                double tolerance = kDefaultFlatteningTolerance) {
    std::vector<Profile2D> out;
    out.reserve(doc.parts.size());
    for (const auto& part : doc.parts) {
        try {
            out.push_back(parse_svg_path(part.svg_source, tolerance, part.category_id));
        } catch (const Error& e) {
            throw SchemaError("part category " + std::to_string(part.category_id) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace flatpose::docparse
