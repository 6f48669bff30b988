#include "geoflow/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "geoflow/core.hpp"

namespace geoflow {

SurfaceMesh octahedron() {
    SurfaceMesh m;
    m.dim = 2;
    m.coords = {1, 0, 0, 0, 1, 0, 0, 0, 1, -1, 0, 0, 0, -1, 0, 0, 0, -1};
    // outward-oriented faces around +z then -z
    m.simplices = {0, 1, 2, 1, 3, 2, 3, 4, 2, 4, 0, 2,
                   1, 0, 5, 3, 1, 5, 4, 3, 5, 0, 4, 5};
    validate(m);
    return m;
}

SurfaceMesh polygonal_circle(int k) {
    if (k < 3) throw NumericalError("polygonal_circle: need k >= 3");
    SurfaceMesh m;
    m.dim = 1;
    m.coords.resize((std::size_t)k * 2);
    m.simplices.resize((std::size_t)k * 2);
    for (int j = 0; j < k; ++j) {
        const double a = 2.0 * M_PI * j / k;
        m.coords[2 * j] = std::cos(a);
        m.coords[2 * j + 1] = std::sin(a);
        m.simplices[2 * j] = j;
        m.simplices[2 * j + 1] = (j + 1) % k;
    }
    validate(m);
    return m;
}

double simplex_measure(const SurfaceMesh& mesh, int s) {
    const int* v = mesh.simplex(s);
    if (mesh.dim == 1) {
        double e[2] = {mesh.vertex(v[1])[0] - mesh.vertex(v[0])[0],
                       mesh.vertex(v[1])[1] - mesh.vertex(v[0])[1]};
        return norm(e, 2);
    }
    double t1[3], t2[3], n[3];
    for (int i = 0; i < 3; ++i) {
        t1[i] = mesh.vertex(v[1])[i] - mesh.vertex(v[0])[i];
        t2[i] = mesh.vertex(v[2])[i] - mesh.vertex(v[0])[i];
    }
    cross3(t1, t2, n);
    return 0.5 * norm(n, 3);
}

namespace {

double simplex_diameter(const SurfaceMesh& mesh, int s) {
    const int* v = mesh.simplex(s);
    const int m = mesh.ambient();
    double d = 0.0;
    for (int i = 0; i <= mesh.dim; ++i)
        for (int j = i + 1; j <= mesh.dim; ++j) {
            double e[3];
            for (int c = 0; c < m; ++c)
                e[c] = mesh.vertex(v[j])[c] - mesh.vertex(v[i])[c];
            d = std::max(d, norm(e, m));
        }
    return d;
}

void check_nondegenerate(const SurfaceMesh& mesh, const char* what) {
    for (int s = 0; s < mesh.n_simplices(); ++s) {
        const double diam = simplex_diameter(mesh, s);
        if (!(diam > 0.0) ||
            simplex_measure(mesh, s) <= 1e-10 * std::pow(diam, mesh.dim))
            throw NumericalError(std::string(what) + ": degenerate simplex " +
                                 std::to_string(s));
    }
}

}  // namespace

void validate(const SurfaceMesh& mesh) {
    if (mesh.dim != 1 && mesh.dim != 2)
        throw NumericalError("mesh: dimension must be 1 or 2");
    const int nv = mesh.n_vertices();
    const int ns = mesh.n_simplices();
    if (nv == 0 || ns == 0) throw NumericalError("mesh: empty");
    for (int idx : mesh.simplices)
        if (idx < 0 || idx >= nv) throw NumericalError("mesh: vertex index out of range");

    // Each oriented (d-1)-face must appear exactly once, and its reversal
    // exactly once: that is closedness plus consistent orientation.
    std::map<std::vector<int>, int> oriented;
    for (int s = 0; s < ns; ++s) {
        const int* v = mesh.simplex(s);
        for (int f = 0; f <= mesh.dim; ++f) {
            std::vector<int> face;
            if (mesh.dim == 1) {
                // boundary of (a,b) is +b, -a; encode sign in a leading flag
                face = {f == 0 ? 1 : 0, v[1 - f]};
            } else {
                // face opposite vertex f, with induced orientation
                const int a = v[(f + 1) % 3], b = v[(f + 2) % 3];
                face = {std::min(a, b), std::max(a, b), a < b ? 1 : 0};
            }
            oriented[face] += 1;
        }
    }
    if (mesh.dim == 1) {
        std::map<int, int> heads, tails;
        for (int s = 0; s < ns; ++s) {
            tails[mesh.simplex(s)[0]] += 1;
            heads[mesh.simplex(s)[1]] += 1;
        }
        for (int v = 0; v < nv; ++v)
            if (heads[v] != 1 || tails[v] != 1)
                throw NumericalError("mesh: polygon not closed / inconsistent at vertex " +
                                     std::to_string(v));
    } else {
        std::map<std::array<int, 2>, std::array<int, 2>> counts;  // {fwd, rev}
        for (auto& [face, c] : oriented) {
            std::array<int, 2> key = {face[0], face[1]};
            counts[key][face[2]] += c;
        }
        for (auto& [key, c] : counts)
            if (c[0] != 1 || c[1] != 1)
                throw NumericalError("mesh: edge (" + std::to_string(key[0]) + "," +
                                     std::to_string(key[1]) +
                                     ") not shared by exactly two consistently oriented triangles");
    }
    check_nondegenerate(mesh, "mesh");
}

std::vector<std::array<int, 2>> edge_list(const SurfaceMesh& mesh) {
    std::vector<std::array<int, 2>> edges;
    for (int s = 0; s < mesh.n_simplices(); ++s) {
        const int* v = mesh.simplex(s);
        const int ne = mesh.dim == 1 ? 1 : 3;
        for (int e = 0; e < ne; ++e) {
            int a = v[e], b = v[(e + 1) % (mesh.dim + 1)];
            edges.push_back({std::min(a, b), std::max(a, b)});
        }
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

SurfaceMesh refine_global(const SurfaceMesh& mesh, bool project_to_unit_sphere) {
    SurfaceMesh out;
    out.dim = mesh.dim;
    out.coords = mesh.coords;
    const int m = mesh.ambient();

    std::map<std::array<int, 2>, int> midpoint;
    auto mid = [&](int a, int b) {
        std::array<int, 2> key = {std::min(a, b), std::max(a, b)};
        auto it = midpoint.find(key);
        if (it != midpoint.end()) return it->second;
        double p[3];
        for (int c = 0; c < m; ++c)
            p[c] = 0.5 * (mesh.vertex(a)[c] + mesh.vertex(b)[c]);
        if (project_to_unit_sphere) {
            const double r = norm(p, m);
            if (r < 1e-14)
                throw NumericalError("refine_global: midpoint at origin, cannot project");
            for (int c = 0; c < m; ++c) p[c] /= r;
        }
        const int idx = (int)(out.coords.size() / m);
        out.coords.insert(out.coords.end(), p, p + m);
        midpoint.emplace(key, idx);
        return idx;
    };

    for (int s = 0; s < mesh.n_simplices(); ++s) {
        const int* v = mesh.simplex(s);
        if (mesh.dim == 1) {
            const int w = mid(v[0], v[1]);
            out.simplices.insert(out.simplices.end(), {v[0], w, w, v[1]});
        } else {
            const int m01 = mid(v[0], v[1]);
            const int m12 = mid(v[1], v[2]);
            const int m02 = mid(v[0], v[2]);
            out.simplices.insert(out.simplices.end(),
                                 {v[0], m01, m02, v[1], m12, m01, v[2], m02, m12,
                                  m01, m12, m02});
        }
    }
    validate(out);
    return out;
}

SurfaceMesh deform(const SurfaceMesh& mesh,
                   const std::function<void(const double*, double*)>& map) {
    SurfaceMesh out = mesh;
    const int m = mesh.ambient();
    for (int v = 0; v < mesh.n_vertices(); ++v) {
        double p[3];
        map(mesh.vertex(v), p);
        copy(p, out.vertex(v), m);
    }
    check_nondegenerate(out, "deform");
    return out;
}

MeshStats mesh_stats(const SurfaceMesh& mesh) {
    MeshStats st;
    st.n_vertices = mesh.n_vertices();
    st.n_simplices = mesh.n_simplices();
    st.n_edges = mesh.dim == 1 ? mesh.n_vertices() : (int)edge_list(mesh).size();
    st.min_radius_ratio = 1e300;
    for (int s = 0; s < mesh.n_simplices(); ++s) {
        const double meas = simplex_measure(mesh, s);
        const double diam = simplex_diameter(mesh, s);
        st.measure += meas;
        st.h_max = std::max(st.h_max, diam);
        double inradius;
        if (mesh.dim == 1) {
            inradius = 0.5 * meas;
        } else {
            const int* v = mesh.simplex(s);
            double per = 0.0;
            for (int e = 0; e < 3; ++e) {
                double t[3];
                for (int c = 0; c < 3; ++c)
                    t[c] = mesh.vertex(v[(e + 1) % 3])[c] - mesh.vertex(v[e])[c];
                per += norm(t, 3);
            }
            inradius = 2.0 * meas / per;
        }
        st.min_radius_ratio = std::min(st.min_radius_ratio, inradius / diam);
    }
    return st;
}

SurfaceMesh load_off(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw NumericalError("load_off: cannot open " + path);
    auto next_token_line = [&](std::istringstream& line) {
        std::string raw;
        while (std::getline(in, raw)) {
            const auto pos = raw.find('#');
            if (pos != std::string::npos) raw.erase(pos);
            std::istringstream ss(raw);
            std::string first;
            if (ss >> first) {
                line = std::istringstream(raw);
                return true;
            }
        }
        return false;
    };
    std::istringstream line;
    if (!next_token_line(line)) throw NumericalError("load_off: empty file " + path);
    long nv = 0, nf = 0, ne = 0;
    std::string tok;
    line >> tok;
    if (tok == "OFF") {
        if (!next_token_line(line)) throw NumericalError("load_off: missing header");
        line >> nv >> nf >> ne;
    } else {
        nv = std::stol(tok);  // headerless variant: counts on the first line
        line >> nf >> ne;
    }
    if (line.fail() || nv <= 0 || nf <= 0) throw NumericalError("load_off: bad counts");
    SurfaceMesh mesh;
    mesh.dim = 2;
    mesh.coords.resize((std::size_t)nv * 3);
    for (long v = 0; v < nv; ++v) {
        if (!next_token_line(line)) throw NumericalError("load_off: truncated vertices");
        line >> mesh.coords[3 * v] >> mesh.coords[3 * v + 1] >> mesh.coords[3 * v + 2];
        if (line.fail()) throw NumericalError("load_off: bad vertex line");
    }
    mesh.simplices.resize((std::size_t)nf * 3);
    for (long f = 0; f < nf; ++f) {
        if (!next_token_line(line)) throw NumericalError("load_off: truncated faces");
        int cnt;
        line >> cnt;
        if (cnt != 3) throw NumericalError("load_off: only triangles are supported");
        line >> mesh.simplices[3 * f] >> mesh.simplices[3 * f + 1] >> mesh.simplices[3 * f + 2];
        if (line.fail()) throw NumericalError("load_off: bad face line");
    }
    validate(mesh);
    return mesh;
}

VertexField identity_field(const SurfaceMesh& mesh) {
    VertexField f;
    f.n_components = mesh.ambient();
    f.values = mesh.coords;
    return f;
}

VertexField map_field(const VertexField& f,
                      const std::function<void(const double*, double*)>& map) {
    VertexField out = f;
    for (int v = 0; v < f.n_vertices(); ++v) map(f.at(v), out.at(v));
    return out;
}

}  // namespace geoflow
