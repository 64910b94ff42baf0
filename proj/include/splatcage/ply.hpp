#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace splatcage::ply {

/// Vertex element of a PLY file, one column of values per scalar property,
/// in header order. Values are widened to double without any activation.
struct VertexTable {
    std::vector<std::string> names;
    std::vector<std::vector<double>> columns;
    std::size_t count = 0;

    /// Index of the named property, or -1.
    int find(const std::string& name) const;
    /// Column for the named property; FormatError naming it when absent.
    const std::vector<double>& column(const std::string& name) const;
};

/// Reads the "vertex" element of an ascii or binary_little_endian PLY file.
/// Elements declared before "vertex" are skipped when they have fixed-size
/// records. A short body raises IoError with the offending byte offset.
VertexTable read_vertices(const std::filesystem::path& path);

}  // namespace splatcage::ply
