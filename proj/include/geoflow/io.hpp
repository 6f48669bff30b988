#pragma once

// Artifact writers: legacy VTK (ASCII, POLYDATA) snapshots with nodal vector
// data, and CSV tables with full float64 round-trip precision.

#include <string>
#include <utility>
#include <vector>

#include "geoflow/mesh.hpp"

namespace geoflow {

/// Writes mesh plus named vertex vector fields as a legacy VTK 2.0 file.
/// Coordinates and data are padded to three components for d = 1 meshes.
void export_vtk(const SurfaceMesh& mesh,
                const std::vector<std::pair<std::string, const VertexField*>>& fields,
                const std::string& path);

/// CSV with a header row; numbers are written with 17 significant digits so
/// rereads round-trip exactly.
void export_csv(const std::vector<std::string>& header,
                const std::vector<std::vector<double>>& rows,
                const std::string& path);

/// %.17g formatting used by every CSV/report writer.
std::string format_double(double v);

}  // namespace geoflow
