#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "gpshape/dataprep.h"

namespace gpshape::io {

// Triangulated OBJ (polygons are fan-triangulated). Throws Io / Parse.
TriangleMesh read_obj(const std::filesystem::path& path);

// ASCII or binary little-endian PLY. Faces are optional; a PLY without a face
// element yields a mesh with an empty face list.
TriangleMesh read_ply(const std::filesystem::path& path);

// Whitespace-delimited x y z per line; '#' starts a comment.
std::vector<Point3> read_xyz(const std::filesystem::path& path);

// Mesh or point cloud, dispatched on extension. `mesh` is set when the file
// carries faces; `points` always holds the vertices / points.
struct GeometryFile {
  std::optional<TriangleMesh> mesh;
  std::vector<Point3> points;
};
GeometryFile read_geometry(const std::filesystem::path& path);

void write_xyz(const std::filesystem::path& path, const std::vector<Point3>& points);
void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh);

// Full-precision formatting shared by all text writers.
std::string format_double(double v);

}  // namespace gpshape::io
