#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "geoflow/io.hpp"
#include "geoflow/mesh.hpp"

using namespace geoflow;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool contains(const std::string& hay, const std::string& needle) {
    return hay.find(needle) != std::string::npos;
}

}  // namespace

TEST_SUITE_BEGIN("io");

TEST_CASE("vtk export of a triangle mesh with vector data") {
    const SurfaceMesh m = octahedron();
    const VertexField f = identity_field(m);
    const std::string path = "io_test_tri.vtk";
    export_vtk(m, {{"f", &f}}, path);
    const std::string text = slurp(path);
    CHECK(text.rfind("# vtk DataFile Version 2.0", 0) == 0);
    CHECK(contains(text, "ASCII"));
    CHECK(contains(text, "DATASET POLYDATA"));
    CHECK(contains(text, "POINTS 6 double"));
    CHECK(contains(text, "POLYGONS 8 32"));
    CHECK(contains(text, "POINT_DATA 6"));
    CHECK(contains(text, "VECTORS f double"));
    std::remove(path.c_str());
}

TEST_CASE("vtk export pads polygon meshes in the plane to 3d") {
    const SurfaceMesh m = polygonal_circle(5);
    const VertexField f = identity_field(m);
    const std::string path = "io_test_seg.vtk";
    export_vtk(m, {{"map", &f}}, path);
    const std::string text = slurp(path);
    CHECK(contains(text, "POINTS 5 double"));
    CHECK(contains(text, "LINES 5 15"));
    CHECK(contains(text, "VECTORS map double"));
    // each 2-component value is padded with a trailing zero
    CHECK(contains(text, " 0\n"));
    std::remove(path.c_str());
}

TEST_CASE("csv export round-trips doubles exactly") {
    const std::string path = "io_test.csv";
    const double tricky = 0.1 + 0.2;  // not representable as a short decimal
    export_csv({"a", "b"}, {{tricky, 1.0 / 3.0}, {-2.5e-17, 12345.678901234567}}, path);
    std::ifstream in(path);
    std::string header, line1, line2;
    std::getline(in, header);
    CHECK(header == "a,b");
    std::getline(in, line1);
    std::getline(in, line2);
    double a = 0, b = 0;
    REQUIRE(std::sscanf(line1.c_str(), "%lf,%lf", &a, &b) == 2);
    CHECK(a == tricky);
    CHECK(b == 1.0 / 3.0);
    REQUIRE(std::sscanf(line2.c_str(), "%lf,%lf", &a, &b) == 2);
    CHECK(a == -2.5e-17);
    CHECK(b == 12345.678901234567);
    std::remove(path.c_str());
}

TEST_CASE("format_double keeps 17 significant digits") {
    CHECK(format_double(1.0) == "1");
    const std::string s = format_double(0.1);
    CHECK(s == "0.10000000000000001");
}

TEST_SUITE_END();
