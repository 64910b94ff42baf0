#include "splatcage/cage.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

namespace splatcage {

double TriangleMesh::signed_volume() const {
    double volume = 0.0;
    for (const auto& t : triangles) {
        volume += vertices[t[0]].dot(vertices[t[1]].cross(vertices[t[2]]));
    }
    return volume / 6.0;
}

void validate_cage(const CageMesh& cage) {
    if (cage.vertices.size() < 4 || cage.triangles.size() < 4) {
        throw GeometryError("cage: needs at least 4 vertices and 4 triangles");
    }
    const double diag = cage.bbox().diagonal();
    if (!(diag > 0.0) || !std::isfinite(diag)) {
        throw GeometryError("cage: degenerate or non-finite bounding box");
    }
    const double min_area = 1e-14 * diag * diag;

    std::map<std::pair<std::uint32_t, std::uint32_t>, int> directed;
    for (std::size_t f = 0; f < cage.triangles.size(); ++f) {
        const auto& t = cage.triangles[f];
        for (int k = 0; k < 3; ++k) {
            if (t[k] >= cage.vertices.size()) {
                throw GeometryError("cage: triangle " + std::to_string(f) + " references a missing vertex");
            }
        }
        if (t[0] == t[1] || t[1] == t[2] || t[2] == t[0]) {
            throw GeometryError("cage: triangle " + std::to_string(f) + " repeats a vertex");
        }
        const Vec3& a = cage.vertices[t[0]];
        const double area = 0.5 * (cage.vertices[t[1]] - a).cross(cage.vertices[t[2]] - a).norm();
        if (!(area > min_area)) {
            throw GeometryError("cage: triangle " + std::to_string(f) + " is degenerate");
        }
        for (int k = 0; k < 3; ++k) {
            if (++directed[{t[k], t[(k + 1) % 3]}] > 1) {
                throw GeometryError("cage: non-manifold or inconsistently wound edge (" + std::to_string(t[k]) +
                                    ", " + std::to_string(t[(k + 1) % 3]) + ")");
            }
        }
    }
    for (const auto& [edge, count] : directed) {
        if (!directed.contains({edge.second, edge.first})) {
            throw GeometryError("cage: open boundary at edge (" + std::to_string(edge.first) + ", " +
                                std::to_string(edge.second) + ")");
        }
    }
    if (!(cage.signed_volume() > 0.0)) {
        throw GeometryError("cage: triangles must be wound outward (signed volume is not positive)");
    }
}

double winding_number(const TriangleMesh& mesh, const Vec3& p) {
    // Van Oosterom-Strackee solid angle per triangle.
    double total = 0.0;
    for (const auto& t : mesh.triangles) {
        const Vec3 a = mesh.vertices[t[0]] - p;
        const Vec3 b = mesh.vertices[t[1]] - p;
        const Vec3 c = mesh.vertices[t[2]] - p;
        const double la = a.norm(), lb = b.norm(), lc = c.norm();
        const double numer = a.dot(b.cross(c));
        const double denom = la * lb * lc + a.dot(b) * lc + b.dot(c) * la + c.dot(a) * lb;
        total += 2.0 * std::atan2(numer, denom);
    }
    return total / (4.0 * std::numbers::pi);
}

CageMesh build_template_cage(const Aabb& box, int resolution, double padding) {
    if (resolution < 1) {
        throw GeometryError("build_template_cage: resolution must be >= 1, got " + std::to_string(resolution));
    }
    if (!(padding >= 0.0)) {
        throw GeometryError("build_template_cage: padding must be non-negative");
    }
    const Aabb safe = box.inflated_degenerate();
    const Vec3 grow = padding * safe.extent();
    const Vec3 lo = safe.min - grow;
    const Vec3 hi = safe.max + grow;
    const int r = resolution;

    CageMesh cage;
    std::vector<std::int64_t> index((r + 1) * (r + 1) * (r + 1), -1);
    auto lattice = [&](int i, int j, int k) { return (i * (r + 1) + j) * (r + 1) + k; };
    for (int i = 0; i <= r; ++i) {
        for (int j = 0; j <= r; ++j) {
            for (int k = 0; k <= r; ++k) {
                const bool boundary = i == 0 || i == r || j == 0 || j == r || k == 0 || k == r;
                if (!boundary) continue;
                index[lattice(i, j, k)] = static_cast<std::int64_t>(cage.vertices.size());
                const Vec3 t(double(i) / r, double(j) / r, double(k) / r);
                cage.vertices.push_back(lo + (hi - lo).cwiseProduct(t));
            }
        }
    }

    // Each face: fixed axis and side, plus in-face axes (a, b) with a × b
    // pointing outward so quads come out counter-clockwise seen from outside.
    struct Face {
        int axis, side, a, b;
    };
    const Face faces[] = {{0, 1, 1, 2}, {0, 0, 2, 1}, {1, 1, 2, 0}, {1, 0, 0, 2}, {2, 1, 0, 1}, {2, 0, 1, 0}};
    for (const Face& f : faces) {
        auto vertex = [&](int s, int t) {
            int c[3];
            c[f.axis] = f.side * r;
            c[f.a] = s;
            c[f.b] = t;
            return static_cast<std::uint32_t>(index[lattice(c[0], c[1], c[2])]);
        };
        for (int s = 0; s < r; ++s) {
            for (int t = 0; t < r; ++t) {
                const auto v00 = vertex(s, t), v10 = vertex(s + 1, t);
                const auto v11 = vertex(s + 1, t + 1), v01 = vertex(s, t + 1);
                cage.triangles.push_back({v00, v10, v11});
                cage.triangles.push_back({v00, v11, v01});
            }
        }
    }
    return cage;
}

CageMesh interpolate_cage(const CageMesh& source, const CageMesh& deformed, double lambda) {
    if (!source.same_topology(deformed)) {
        throw GeometryError("interpolate_cage: cages differ in topology");
    }
    if (lambda < 0.0 || lambda > 1.0) {
        spdlog::warn("interpolate_cage: lambda {} is outside [0, 1]; extrapolating", lambda);
    }
    if (lambda == 0.0) return source;
    if (lambda == 1.0) return deformed;
    CageMesh out = source;
    for (std::size_t i = 0; i < out.vertices.size(); ++i) {
        out.vertices[i] = lambda * deformed.vertices[i] + (1.0 - lambda) * source.vertices[i];
    }
    return out;
}

TriangleMesh read_obj(const std::filesystem::path& path, bool triangles_only) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("OBJ: cannot open '" + path.string() + "'");
    }
    TriangleMesh mesh;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "v") {
            Vec3 p;
            if (!(ls >> p.x() >> p.y() >> p.z())) {
                throw FormatError("OBJ: malformed vertex at line " + std::to_string(line_no));
            }
            mesh.vertices.push_back(p);
        } else if (tag == "f") {
            std::vector<std::uint32_t> face;
            std::string token;
            while (ls >> token) {
                // v, v/vt, v//vn, v/vt/vn; negative indices count from the end.
                long idx = 0;
                try {
                    idx = std::stol(token.substr(0, token.find('/')));
                } catch (const std::exception&) {
                    throw FormatError("OBJ: malformed face index '" + token + "' at line " + std::to_string(line_no));
                }
                const long resolved = idx > 0 ? idx - 1 : static_cast<long>(mesh.vertices.size()) + idx;
                if (idx == 0 || resolved < 0 || resolved >= static_cast<long>(mesh.vertices.size())) {
                    throw FormatError("OBJ: face index out of range at line " + std::to_string(line_no));
                }
                face.push_back(static_cast<std::uint32_t>(resolved));
            }
            if (face.size() < 3 || (triangles_only && face.size() != 3)) {
                throw FormatError("OBJ: expected a triangle at line " + std::to_string(line_no));
            }
            for (std::size_t k = 1; k + 1 < face.size(); ++k) {
                mesh.triangles.push_back({face[0], face[k], face[k + 1]});
            }
        }
    }
    return mesh;
}

void write_obj(const TriangleMesh& mesh, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoError("OBJ: cannot open '" + path.string() + "' for writing");
    }
    out << std::setprecision(17);
    for (const auto& v : mesh.vertices) {
        out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    }
    for (const auto& t : mesh.triangles) {
        out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
    }
    if (!out) {
        throw IoError("OBJ: write failed for '" + path.string() + "'");
    }
}

}  // namespace splatcage
