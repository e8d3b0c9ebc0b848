#include "gpshape/mesh_io.h"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "gpshape/error.h"

namespace gpshape::io {

namespace {

std::ifstream open_input(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::out | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  return out;
}

std::string lower_ext(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

Point3 checked_point(double x, double y, double z, const std::filesystem::path& path) {
  Point3 p(x, y, z);
  if (!p.allFinite()) throw Error(ErrorCode::Parse, "non-finite coordinate in " + path.string());
  return p;
}

// ---- PLY ----

enum class PlyFormat { Ascii, BinaryLE };

struct PlyProperty {
  std::string name;
  std::string type;
  bool is_list = false;
  std::string count_type;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

template <typename T>
T read_le(std::istream& in) {
  static_assert(std::endian::native == std::endian::little, "binary PLY reader assumes little-endian host");
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error(ErrorCode::Parse, "truncated binary PLY");
  return v;
}

double read_binary_value(std::istream& in, const std::string& t) {
  if (t == "char" || t == "int8") return read_le<std::int8_t>(in);
  if (t == "uchar" || t == "uint8") return read_le<std::uint8_t>(in);
  if (t == "short" || t == "int16") return read_le<std::int16_t>(in);
  if (t == "ushort" || t == "uint16") return read_le<std::uint16_t>(in);
  if (t == "int" || t == "int32") return read_le<std::int32_t>(in);
  if (t == "uint" || t == "uint32") return read_le<std::uint32_t>(in);
  if (t == "float" || t == "float32") return read_le<float>(in);
  if (t == "double" || t == "float64") return read_le<double>(in);
  throw Error(ErrorCode::Parse, "unknown PLY type " + t);
}

}  // namespace

std::string format_double(double v) { return fmt::format("{:.17g}", v); }

TriangleMesh read_obj(const std::filesystem::path& path) {
  auto in = open_input(path);
  TriangleMesh mesh;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ss >> x >> y >> z)) throw Error(ErrorCode::Parse, fmt::format("{}:{}: bad vertex", path.string(), line_no));
      mesh.vertices.push_back(checked_point(x, y, z, path));
    } else if (tag == "f") {
      std::vector<std::int64_t> idx;
      std::string tok;
      while (ss >> tok) {
        const auto slash = tok.find('/');
        const std::string head = tok.substr(0, slash);
        std::int64_t v = 0;
        auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), v);
        if (ec != std::errc() || v == 0) {
          throw Error(ErrorCode::Parse, fmt::format("{}:{}: bad face index", path.string(), line_no));
        }
        // Negative indices are relative to the current vertex count.
        idx.push_back(v > 0 ? v - 1 : static_cast<std::int64_t>(mesh.vertices.size()) + v);
      }
      if (idx.size() < 3) throw Error(ErrorCode::Parse, fmt::format("{}:{}: face with < 3 vertices", path.string(), line_no));
      for (auto i : idx) {
        if (i < 0 || static_cast<std::size_t>(i) >= mesh.vertices.size()) {
          throw Error(ErrorCode::Parse, fmt::format("{}:{}: face index out of range", path.string(), line_no));
        }
      }
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) {
        mesh.faces.push_back({static_cast<std::uint32_t>(idx[0]), static_cast<std::uint32_t>(idx[k]),
                              static_cast<std::uint32_t>(idx[k + 1])});
      }
    }
  }
  return mesh;
}

TriangleMesh read_ply(const std::filesystem::path& path) {
  auto in = open_input(path, std::ios::in | std::ios::binary);
  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0) {
    throw Error(ErrorCode::Parse, path.string() + ": missing PLY magic");
  }
  PlyFormat format = PlyFormat::Ascii;
  std::vector<PlyElement> elements;
  bool header_done = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "format") {
      std::string fmt_name;
      ss >> fmt_name;
      if (fmt_name == "ascii") format = PlyFormat::Ascii;
      else if (fmt_name == "binary_little_endian") format = PlyFormat::BinaryLE;
      else throw Error(ErrorCode::Parse, path.string() + ": unsupported PLY format " + fmt_name);
    } else if (key == "element") {
      PlyElement el;
      ss >> el.name >> el.count;
      elements.push_back(el);
    } else if (key == "property") {
      if (elements.empty()) throw Error(ErrorCode::Parse, path.string() + ": property before element");
      PlyProperty prop;
      std::string type;
      ss >> type;
      if (type == "list") {
        prop.is_list = true;
        ss >> prop.count_type >> prop.type >> prop.name;
      } else {
        prop.type = type;
        ss >> prop.name;
      }
      elements.back().properties.push_back(prop);
    } else if (key == "end_header") {
      header_done = true;
      break;
    }
  }
  if (!header_done) throw Error(ErrorCode::Parse, path.string() + ": PLY header not terminated");

  TriangleMesh mesh;
  for (const auto& el : elements) {
    int ix = -1, iy = -1, iz = -1, iface = -1;
    for (std::size_t p = 0; p < el.properties.size(); ++p) {
      const auto& name = el.properties[p].name;
      if (name == "x") ix = static_cast<int>(p);
      if (name == "y") iy = static_cast<int>(p);
      if (name == "z") iz = static_cast<int>(p);
      if (el.properties[p].is_list && (name == "vertex_indices" || name == "vertex_index")) iface = static_cast<int>(p);
    }
    const bool is_vertex = el.name == "vertex";
    const bool is_face = el.name == "face";
    if (is_vertex && (ix < 0 || iy < 0 || iz < 0)) throw Error(ErrorCode::Parse, path.string() + ": vertex without x/y/z");

    for (std::size_t r = 0; r < el.count; ++r) {
      std::vector<double> scalars(el.properties.size(), 0.0);
      std::vector<std::int64_t> list;
      if (format == PlyFormat::Ascii) {
        if (!std::getline(in, line)) throw Error(ErrorCode::Parse, path.string() + ": truncated PLY body");
        std::istringstream ss(line);
        for (std::size_t p = 0; p < el.properties.size(); ++p) {
          const auto& prop = el.properties[p];
          if (prop.is_list) {
            std::size_t count = 0;
            if (!(ss >> count)) throw Error(ErrorCode::Parse, path.string() + ": bad list count");
            std::vector<std::int64_t> values(count);
            for (auto& v : values) {
              if (!(ss >> v)) throw Error(ErrorCode::Parse, path.string() + ": bad list entry");
            }
            if (static_cast<int>(p) == iface) list = std::move(values);
          } else if (!(ss >> scalars[p])) {
            throw Error(ErrorCode::Parse, path.string() + ": bad PLY value");
          }
        }
      } else {
        for (std::size_t p = 0; p < el.properties.size(); ++p) {
          const auto& prop = el.properties[p];
          if (prop.is_list) {
            const auto count = static_cast<std::size_t>(read_binary_value(in, prop.count_type));
            std::vector<std::int64_t> values(count);
            for (auto& v : values) v = static_cast<std::int64_t>(read_binary_value(in, prop.type));
            if (static_cast<int>(p) == iface) list = std::move(values);
          } else {
            scalars[p] = read_binary_value(in, prop.type);
          }
        }
      }
      if (is_vertex) {
        mesh.vertices.push_back(checked_point(scalars[ix], scalars[iy], scalars[iz], path));
      } else if (is_face && iface >= 0) {
        if (list.size() < 3) throw Error(ErrorCode::Parse, path.string() + ": face with < 3 vertices");
        for (std::size_t k = 1; k + 1 < list.size(); ++k) {
          mesh.faces.push_back({static_cast<std::uint32_t>(list[0]), static_cast<std::uint32_t>(list[k]),
                                static_cast<std::uint32_t>(list[k + 1])});
        }
      }
    }
  }
  for (const auto& f : mesh.faces) {
    for (auto i : f) {
      if (i >= mesh.vertices.size()) throw Error(ErrorCode::Parse, path.string() + ": face index out of range");
    }
  }
  return mesh;
}

std::vector<Point3> read_xyz(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<Point3> pts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    double x, y, z;
    if (!(ss >> x)) continue;
    if (!(ss >> y >> z)) throw Error(ErrorCode::Parse, fmt::format("{}:{}: expected x y z", path.string(), line_no));
    pts.push_back(checked_point(x, y, z, path));
  }
  return pts;
}

GeometryFile read_geometry(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::Io, "no such file " + path.string());
  const std::string ext = lower_ext(path);
  GeometryFile out;
  if (ext == ".obj" || ext == ".ply") {
    TriangleMesh mesh = ext == ".obj" ? read_obj(path) : read_ply(path);
    out.points = mesh.vertices;
    if (!mesh.faces.empty()) out.mesh = std::move(mesh);
  } else if (ext == ".xyz" || ext == ".txt") {
    out.points = read_xyz(path);
  } else {
    throw Error(ErrorCode::Parse, "unsupported file extension " + ext);
  }
  if (out.points.empty()) throw Error(ErrorCode::EmptyCloud, path.string() + " contains no points");
  return out;
}

void write_xyz(const std::filesystem::path& path, const std::vector<Point3>& points) {
  auto out = open_output(path);
  for (const auto& p : points) {
    out << format_double(p.x()) << ' ' << format_double(p.y()) << ' ' << format_double(p.z()) << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh) {
  auto out = open_output(path);
  for (const auto& v : mesh.vertices) {
    out << "v " << format_double(v.x()) << ' ' << format_double(v.y()) << ' ' << format_double(v.z()) << '\n';
  }
  for (const auto& f : mesh.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

}  // namespace gpshape::io
