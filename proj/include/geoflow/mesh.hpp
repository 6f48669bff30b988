#pragma once

// Triangulated closed hypersurfaces: closed polygons in R^2 (d = 1) and
// closed triangulated surfaces in R^3 (d = 2), stored as flat arrays.

#include <array>
#include <functional>
#include <string>
#include <vector>

namespace geoflow {

struct SurfaceMesh {
    int dim = 2;                  // intrinsic simplex dimension d (1 or 2)
    std::vector<double> coords;   // n_vertices * (d+1), row-major
    std::vector<int> simplices;   // n_simplices * (d+1) vertex indices

    int ambient() const { return dim + 1; }
    int n_vertices() const { return (int)(coords.size() / (std::size_t)ambient()); }
    int n_simplices() const { return (int)(simplices.size() / (std::size_t)(dim + 1)); }
    const double* vertex(int v) const { return coords.data() + (std::size_t)v * ambient(); }
    double* vertex(int v) { return coords.data() + (std::size_t)v * ambient(); }
    const int* simplex(int s) const { return simplices.data() + (std::size_t)s * (dim + 1); }
};

/// Nodal vector field: one value per vertex with n_components entries.
struct VertexField {
    int n_components = 0;
    std::vector<double> values;  // n_vertices * n_components

    int n_vertices() const {
        return n_components ? (int)(values.size() / (std::size_t)n_components) : 0;
    }
    const double* at(int v) const { return values.data() + (std::size_t)v * n_components; }
    double* at(int v) { return values.data() + (std::size_t)v * n_components; }
};

struct MeshStats {
    double h_max = 0.0;             // longest edge
    double min_radius_ratio = 0.0;  // min over simplices of inradius / diameter
    double measure = 0.0;           // total length / area
    int n_vertices = 0;
    int n_simplices = 0;
    int n_edges = 0;  // (d-1)-faces: edges for d=2, vertices for d=1
};

/// Regular octahedron inscribed in the unit sphere (6 vertices, 8 triangles).
SurfaceMesh octahedron();

/// Regular k-gon inscribed in the unit circle, counterclockwise. k >= 3.
SurfaceMesh polygonal_circle(int k);

/// Uniform 1:2^d refinement via edge midpoints.  Vertex order: originals
/// first, then the new midpoints.  With project_to_unit_sphere the new
/// midpoints are pushed radially onto |x| = 1 (originals are untouched).
SurfaceMesh refine_global(const SurfaceMesh& mesh, bool project_to_unit_sphere);

/// Moves every vertex through `map` (coords in, coords out, ambient() wide).
/// Connectivity is kept; throws if any image simplex degenerates.
SurfaceMesh deform(const SurfaceMesh& mesh,
                   const std::function<void(const double*, double*)>& map);

/// Checks closedness (every (d-1)-face on exactly two simplices), consistent
/// orientation, index bounds and positive simplex measure.  Throws on
/// violation; all constructors in this header return validated meshes.
void validate(const SurfaceMesh& mesh);

MeshStats mesh_stats(const SurfaceMesh& mesh);

double simplex_measure(const SurfaceMesh& mesh, int s);

/// Unique edges as sorted vertex pairs (d = 2; segments are their own edges).
std::vector<std::array<int, 2>> edge_list(const SurfaceMesh& mesh);

/// OFF reader (nv nf ne header, coordinate lines, triangle lines).
SurfaceMesh load_off(const std::string& path);

/// f(p_j) = p_j, n_components = ambient dimension.
VertexField identity_field(const SurfaceMesh& mesh);

/// Applies a pointwise map to every nodal value (same component count).
VertexField map_field(const VertexField& f,
                      const std::function<void(const double*, double*)>& map);

}  // namespace geoflow
