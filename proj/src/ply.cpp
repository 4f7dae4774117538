#include "defrad/ply.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "defrad/errors.hpp"

namespace defrad {

namespace {

bool is_scalar_type(const std::string& t) {
  static const std::array<const char*, 16> kTypes = {
      "char",  "uchar",  "short",  "ushort", "int",     "uint",   "float",
      "double", "int8",  "uint8",  "int16",  "uint16",  "int32",  "uint32",
      "float32", "float64"};
  for (const char* k : kTypes)
    if (t == k) return true;
  return false;
}

}  // namespace

PointCloudFrame read_ply(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  auto next_line = [&](const char* what) {
    if (!std::getline(in, line))
      throw ParseError(lineno + 1, std::string("unexpected end of file, expected ") + what);
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
  };

  next_line("'ply'");
  if (line != "ply") throw ParseError(lineno, "missing 'ply' magic");

  PointCloudFrame cloud;
  std::size_t vertex_count = 0;
  bool have_vertex = false, in_vertex = false, saw_format = false;
  std::vector<std::string> vertex_props;
  // Elements declared before 'vertex' would have to be skipped line by line.
  std::size_t lines_before_vertex = 0;

  for (;;) {
    next_line("'end_header'");
    std::istringstream ss(line);
    std::string kw;
    ss >> kw;
    if (kw == "end_header") break;
    if (kw == "format") {
      std::string fmt, ver;
      ss >> fmt >> ver;
      if (fmt != "ascii")
        throw ParseError(lineno, "unsupported PLY format '" + fmt + "' (ASCII only)");
      saw_format = true;
    } else if (kw == "comment" || kw == "obj_info") {
      std::string tag;
      ss >> tag;
      if (tag == "timestamp") {
        if (!(ss >> cloud.timestamp))
          throw ParseError(lineno, "malformed timestamp comment");
      }
    } else if (kw == "element") {
      std::string name;
      long long count = -1;
      ss >> name >> count;
      if (count < 0) throw ParseError(lineno, "malformed element declaration");
      in_vertex = name == "vertex";
      if (in_vertex) {
        have_vertex = true;
        vertex_count = static_cast<std::size_t>(count);
      } else if (!have_vertex) {
        lines_before_vertex += static_cast<std::size_t>(count);
      }
    } else if (kw == "property") {
      std::string type, name;
      ss >> type;
      if (type == "list") {
        if (in_vertex) throw ParseError(lineno, "list properties on vertex are not supported");
        continue;
      }
      ss >> name;
      if (!is_scalar_type(type) || name.empty())
        throw ParseError(lineno, "malformed property declaration");
      if (in_vertex) vertex_props.push_back(name);
    } else {
      throw ParseError(lineno, "unknown header keyword '" + kw + "'");
    }
  }
  if (!saw_format) throw ParseError(lineno, "missing format line");
  if (!have_vertex) throw ParseError(lineno, "no vertex element");

  auto find = [&](const char* n) -> int {
    for (std::size_t i = 0; i < vertex_props.size(); ++i)
      if (vertex_props[i] == n) return static_cast<int>(i);
    return -1;
  };
  const int ix = find("x"), iy = find("y"), iz = find("z");
  if (ix < 0 || iy < 0 || iz < 0)
    throw ParseError(lineno, "vertex element lacks x, y and z properties");
  const int inx = find("nx"), iny = find("ny"), inz = find("nz");
  const int n_normal = (inx >= 0) + (iny >= 0) + (inz >= 0);
  if (n_normal != 0 && n_normal != 3)
    throw ParseError(lineno, "partial normal properties (need nx, ny, nz)");

  for (std::size_t i = 0; i < lines_before_vertex; ++i) next_line("element data");

  cloud.points.reserve(vertex_count);
  if (n_normal == 3) {
    cloud.normals.emplace();
    cloud.normals->reserve(vertex_count);
  }
  std::vector<double> vals(vertex_props.size());
  for (std::size_t v = 0; v < vertex_count; ++v) {
    next_line("vertex data");
    std::istringstream ss(line);
    for (auto& x : vals) {
      if (!(ss >> x)) throw ParseError(lineno, "too few or non-numeric vertex values");
    }
    std::string extra;
    if (ss >> extra) throw ParseError(lineno, "too many vertex values");
    cloud.points.emplace_back(vals[ix], vals[iy], vals[iz]);
    if (n_normal == 3) {
      Vec3 n(vals[inx], vals[iny], vals[inz]);
      const double norm = n.norm();
      if (!(norm > 0.0)) throw ParseError(lineno, "zero-length normal");
      cloud.normals->push_back(n / norm);
    }
  }
  return cloud;
}

PointCloudFrame load_ply(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return read_ply(in);
}

void write_ply(const PointCloudFrame& cloud, std::ostream& out) {
  out << "ply\nformat ascii 1.0\n";
  char buf[160];
  std::snprintf(buf, sizeof buf, "comment timestamp %.17g\n", cloud.timestamp);
  out << buf;
  out << "element vertex " << cloud.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n";
  if (cloud.normals)
    out << "property double nx\nproperty double ny\nproperty double nz\n";
  out << "end_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    int n = std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g", p.x(), p.y(), p.z());
    out.write(buf, n);
    if (cloud.normals) {
      const auto& q = (*cloud.normals)[i];
      n = std::snprintf(buf, sizeof buf, " %.9g %.9g %.9g", q.x(), q.y(), q.z());
      out.write(buf, n);
    }
    out << '\n';
  }
}

void save_ply(const PointCloudFrame& cloud, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_ply(cloud, out);
}

}  // namespace defrad
