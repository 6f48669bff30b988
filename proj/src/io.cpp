#include "geoflow/io.hpp"

#include <cstdio>
#include <fstream>

#include "geoflow/core.hpp"

namespace geoflow {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void export_vtk(const SurfaceMesh& mesh,
                const std::vector<std::pair<std::string, const VertexField*>>& fields,
                const std::string& path) {
    std::ofstream out(path);
    if (!out) throw NumericalError("export_vtk: cannot open " + path);
    const int nv = mesh.n_vertices();
    const int ns = mesh.n_simplices();
    const int m = mesh.ambient();

    out << "# vtk DataFile Version 2.0\n";
    out << "surface snapshot\n";
    out << "ASCII\n";
    out << "DATASET POLYDATA\n";
    out << "POINTS " << nv << " double\n";
    for (int v = 0; v < nv; ++v) {
        for (int c = 0; c < 3; ++c)
            out << (c ? " " : "") << format_double(c < m ? mesh.vertex(v)[c] : 0.0);
        out << "\n";
    }
    if (mesh.dim == 2) {
        out << "POLYGONS " << ns << " " << 4 * ns << "\n";
        for (int s = 0; s < ns; ++s) {
            const int* v = mesh.simplex(s);
            out << "3 " << v[0] << " " << v[1] << " " << v[2] << "\n";
        }
    } else {
        out << "LINES " << ns << " " << 3 * ns << "\n";
        for (int s = 0; s < ns; ++s) {
            const int* v = mesh.simplex(s);
            out << "2 " << v[0] << " " << v[1] << "\n";
        }
    }
    if (!fields.empty()) {
        out << "POINT_DATA " << nv << "\n";
        for (const auto& [name, field] : fields) {
            if (field->n_vertices() != nv)
                throw NumericalError("export_vtk: field '" + name + "' size mismatch");
            out << "VECTORS " << name << " double\n";
            for (int v = 0; v < nv; ++v) {
                for (int c = 0; c < 3; ++c)
                    out << (c ? " " : "")
                        << format_double(c < field->n_components ? field->at(v)[c] : 0.0);
                out << "\n";
            }
        }
    }
    if (!out) throw NumericalError("export_vtk: write failed for " + path);
}

void export_csv(const std::vector<std::string>& header,
                const std::vector<std::vector<double>>& rows,
                const std::string& path) {
    std::ofstream out(path);
    if (!out) throw NumericalError("export_csv: cannot open " + path);
    for (std::size_t i = 0; i < header.size(); ++i)
        out << (i ? "," : "") << header[i];
    out << "\n";
    for (const auto& row : rows) {
        if (row.size() != header.size())
            throw NumericalError("export_csv: row width mismatch in " + path);
        for (std::size_t i = 0; i < row.size(); ++i)
            out << (i ? "," : "") << format_double(row[i]);
        out << "\n";
    }
    if (!out) throw NumericalError("export_csv: write failed for " + path);
}

}  // namespace geoflow
