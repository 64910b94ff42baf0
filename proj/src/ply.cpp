#include "splatcage/ply.hpp"

#include "splatcage/common.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <unordered_map>

namespace splatcage::ply {

namespace {

enum class Scalar { i8, u8, i16, u16, i32, u32, f32, f64 };

Scalar parse_scalar(const std::string& name) {
    static const std::unordered_map<std::string, Scalar> table = {
        {"char", Scalar::i8},    {"int8", Scalar::i8},     {"uchar", Scalar::u8},  {"uint8", Scalar::u8},
        {"short", Scalar::i16},  {"int16", Scalar::i16},   {"ushort", Scalar::u16}, {"uint16", Scalar::u16},
        {"int", Scalar::i32},    {"int32", Scalar::i32},   {"uint", Scalar::u32},  {"uint32", Scalar::u32},
        {"float", Scalar::f32},  {"float32", Scalar::f32}, {"double", Scalar::f64}, {"float64", Scalar::f64},
    };
    const auto it = table.find(name);
    if (it == table.end()) {
        throw FormatError("PLY: unknown property type '" + name + "'");
    }
    return it->second;
}

std::size_t scalar_size(Scalar s) {
    switch (s) {
        case Scalar::i8:
        case Scalar::u8: return 1;
        case Scalar::i16:
        case Scalar::u16: return 2;
        case Scalar::i32:
        case Scalar::u32:
        case Scalar::f32: return 4;
        case Scalar::f64: return 8;
    }
    return 0;
}

template <class T>
T load_le(const char* src) {
    T value;
    std::memcpy(&value, src, sizeof(T));
    if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
        auto* bytes = reinterpret_cast<unsigned char*>(&value);
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) {
            std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
        }
    }
    return value;
}

double decode(Scalar s, const char* src) {
    switch (s) {
        case Scalar::i8: return load_le<std::int8_t>(src);
        case Scalar::u8: return load_le<std::uint8_t>(src);
        case Scalar::i16: return load_le<std::int16_t>(src);
        case Scalar::u16: return load_le<std::uint16_t>(src);
        case Scalar::i32: return load_le<std::int32_t>(src);
        case Scalar::u32: return load_le<std::uint32_t>(src);
        case Scalar::f32: return load_le<float>(src);
        case Scalar::f64: return load_le<double>(src);
    }
    return 0.0;
}

struct Property {
    std::string name;
    Scalar type = Scalar::f32;
    bool is_list = false;
};

struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<Property> properties;

    bool fixed_size() const {
        for (const auto& p : properties) {
            if (p.is_list) return false;
        }
        return true;
    }
    std::size_t record_size() const {
        std::size_t n = 0;
        for (const auto& p : properties) n += scalar_size(p.type);
        return n;
    }
};

}  // namespace

int VertexTable::find(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return static_cast<int>(i);
    }
    return -1;
}

const std::vector<double>& VertexTable::column(const std::string& name) const {
    const int idx = find(name);
    if (idx < 0) {
        throw FormatError("PLY: missing required vertex property '" + name + "'");
    }
    return columns[static_cast<std::size_t>(idx)];
}

VertexTable read_vertices(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("PLY: cannot open '" + path.string() + "'");
    }
    const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    std::size_t pos = 0;
    auto next_line = [&]() -> std::string {
        const std::size_t end = data.find('\n', pos);
        if (end == std::string::npos) {
            throw FormatError("PLY: header not terminated by end_header");
        }
        std::string line = data.substr(pos, end - pos);
        pos = end + 1;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    };

    if (next_line() != "ply") {
        throw FormatError("PLY: missing 'ply' magic in '" + path.string() + "'");
    }
    std::string format;
    std::vector<Element> elements;
    for (;;) {
        const std::string line = next_line();
        std::istringstream ls(line);
        std::string keyword;
        ls >> keyword;
        if (keyword == "end_header") break;
        if (keyword.empty() || keyword == "comment" || keyword == "obj_info") continue;
        if (keyword == "format") {
            ls >> format;
        } else if (keyword == "element") {
            Element e;
            ls >> e.name >> e.count;
            if (!ls) throw FormatError("PLY: malformed element line '" + line + "'");
            elements.push_back(std::move(e));
        } else if (keyword == "property") {
            if (elements.empty()) throw FormatError("PLY: property before any element");
            Property p;
            std::string type;
            ls >> type;
            if (type == "list") {
                std::string count_type, item_type;
                ls >> count_type >> item_type >> p.name;
                p.is_list = true;
                p.type = parse_scalar(item_type);
                parse_scalar(count_type);
            } else {
                p.type = parse_scalar(type);
                ls >> p.name;
            }
            if (p.name.empty()) throw FormatError("PLY: malformed property line '" + line + "'");
            elements.back().properties.push_back(std::move(p));
        } else {
            throw FormatError("PLY: unexpected header keyword '" + keyword + "'");
        }
    }
    const bool ascii = format == "ascii";
    if (!ascii && format != "binary_little_endian") {
        throw FormatError("PLY: unsupported format '" + format + "'");
    }

    std::size_t vertex_element = elements.size();
    for (std::size_t i = 0; i < elements.size(); ++i) {
        if (elements[i].name == "vertex") {
            vertex_element = i;
            break;
        }
    }
    if (vertex_element == elements.size()) {
        throw FormatError("PLY: no vertex element in '" + path.string() + "'");
    }
    const Element& vertex = elements[vertex_element];
    if (!vertex.fixed_size()) {
        throw FormatError("PLY: list properties on the vertex element are not supported");
    }

    VertexTable table;
    table.count = vertex.count;
    for (const auto& p : vertex.properties) {
        table.names.push_back(p.name);
        table.columns.emplace_back(vertex.count);
    }

    if (ascii) {
        std::istringstream body(data.substr(pos));
        std::string token;
        auto skip_tokens = [&](std::size_t n) {
            for (std::size_t i = 0; i < n; ++i) {
                if (!(body >> token)) throw IoError("PLY: truncated ascii body");
            }
        };
        for (std::size_t e = 0; e < vertex_element; ++e) {
            if (!elements[e].fixed_size()) {
                throw FormatError("PLY: cannot skip list element '" + elements[e].name + "' preceding vertex");
            }
            skip_tokens(elements[e].count * elements[e].properties.size());
        }
        for (std::size_t r = 0; r < vertex.count; ++r) {
            for (std::size_t c = 0; c < vertex.properties.size(); ++c) {
                double v;
                if (!(body >> v)) {
                    throw IoError("PLY: truncated ascii body at vertex " + std::to_string(r));
                }
                table.columns[c][r] = v;
            }
        }
        return table;
    }

    for (std::size_t e = 0; e < vertex_element; ++e) {
        if (!elements[e].fixed_size()) {
            throw FormatError("PLY: cannot skip list element '" + elements[e].name + "' preceding vertex");
        }
        pos += elements[e].count * elements[e].record_size();
    }
    const std::size_t record = vertex.record_size();
    const std::size_t needed = record * vertex.count;
    if (pos > data.size() || data.size() - pos < needed) {
        const std::size_t available = pos > data.size() ? 0 : data.size() - pos;
        const std::size_t offset = pos + (available / record) * record;
        throw IoError("PLY: truncated body in '" + path.string() + "' at byte offset " + std::to_string(offset) +
                      " (expected " + std::to_string(pos + needed) + " bytes, file has " +
                      std::to_string(data.size()) + ")");
    }
    const char* cursor = data.data() + pos;
    for (std::size_t r = 0; r < vertex.count; ++r) {
        for (std::size_t c = 0; c < vertex.properties.size(); ++c) {
            table.columns[c][r] = decode(vertex.properties[c].type, cursor);
            cursor += scalar_size(vertex.properties[c].type);
        }
    }
    return table;
}

}  // namespace splatcage::ply
