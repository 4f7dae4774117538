#include "defrad/io.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "defrad/errors.hpp"

namespace defrad::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

namespace {

std::ofstream open_out(const std::filesystem::path& path, bool binary = false) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

void put(std::ostream& out, double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.9g", v);
  out.write(buf, n);
}

template <class T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T read_pod(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw Error("truncated binary file");
  return v;
}

}  // namespace

void write_columns_csv(const std::filesystem::path& path,
                       std::span<const std::string> header,
                       std::span<const std::vector<double>> columns) {
  if (header.size() != columns.size())
    throw InvalidArgument("CSV header and column count differ");
  const std::size_t rows = columns.empty() ? 0 : columns.front().size();
  for (const auto& c : columns)
    if (c.size() != rows) throw LengthMismatch("CSV columns differ in length");
  auto out = open_out(path);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (c) out << ',';
      put(out, columns[c][r]);
    }
    out << '\n';
  }
}

const std::vector<double>& CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return columns[i];
  throw InvalidArgument("CSV has no column '" + name + "'");
}

CsvTable read_columns_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError(1, "empty CSV " + path.string());
  ++lineno;
  {
    std::istringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
      t.header.push_back(cell);
    }
  }
  t.columns.resize(t.header.size());
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string cell;
    std::size_t c = 0;
    while (std::getline(ss, cell, ',')) {
      if (c >= t.columns.size()) throw ParseError(lineno, "too many CSV fields");
      try {
        std::size_t used = 0;
        t.columns[c].push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw ParseError(lineno, "non-numeric CSV field '" + cell + "'");
      }
      ++c;
    }
    if (c != t.columns.size()) throw ParseError(lineno, "too few CSV fields");
  }
  return t;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(0, path.string() + ": " + e.what());
  }
}

void write_waveform_csv(const std::filesystem::path& path,
                        const dsp::DisplacementWaveform& wave) {
  std::vector<double> t(wave.values.size());
  for (std::size_t i = 0; i < t.size(); ++i)
    t[i] = wave.t0 + static_cast<double>(i) / wave.rate;
  const std::string header[] = {"t_s", "d_m"};
  const std::vector<double> cols[] = {t, wave.values};
  write_columns_csv(path, header, cols);
}

dsp::DisplacementWaveform read_waveform_csv(const std::filesystem::path& path) {
  const auto t = read_columns_csv(path);
  const auto& ts = t.column("t_s");
  dsp::DisplacementWaveform w;
  w.values = t.column("d_m");
  if (ts.size() < 2) throw ParseError(0, path.string() + ": need at least two samples");
  w.t0 = ts.front();
  w.rate = static_cast<double>(ts.size() - 1) / (ts.back() - ts.front());
  return w;
}

void write_scattering_map_csv(const std::filesystem::path& path,
                              const em::ScatteringMap& map,
                              std::span<const Point3> points) {
  if (points.size() != map.magnitudes.size())
    throw InvalidArgument("map and points differ in length");
  auto out = open_out(path);
  out << "index,x,y,z,magnitude\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    out << i << ',';
    put(out, points[i].x());
    out << ',';
    put(out, points[i].y());
    out << ',';
    put(out, points[i].z());
    out << ',';
    put(out, map.magnitudes[i]);
    out << '\n';
  }
}

void write_range_angle_csv(const std::filesystem::path& path,
                           const Eigen::MatrixXd& power,
                           std::span<const double> range_axis,
                           std::span<const double> theta_axis) {
  auto out = open_out(path);
  out << "r_m,theta_rad,power\n";
  for (Eigen::Index r = 0; r < power.rows(); ++r)
    for (Eigen::Index th = 0; th < power.cols(); ++th) {
      put(out, range_axis[r]);
      out << ',';
      put(out, theta_axis[th]);
      out << ',';
      put(out, power(r, th));
      out << '\n';
    }
}

void write_deformation_field(const std::filesystem::path& path,
                             const cpd::DeformationField& field) {
  std::vector<std::vector<double>> cols(3);
  for (Eigen::Index m = 0; m < field.weights.rows(); ++m)
    for (int c = 0; c < 3; ++c) cols[c].push_back(field.weights(m, c));
  const std::string header[] = {"w_x", "w_y", "w_z"};
  write_columns_csv(path, header, cols);
  nlohmann::json j = {{"beta", field.params.beta},
                      {"lambda_reg", field.params.lambda_reg},
                      {"outlier_w", field.params.outlier_w},
                      {"sigma2", field.sigma2},
                      {"iterations", field.iterations_run},
                      {"converged", field.converged},
                      {"n_template", field.weights.rows()}};
  write_json(path.string() + ".json", j);
}

void write_ifcube(const std::filesystem::path& path, const radar::IFCube& cube) {
  if (cube.samples.size() != cube.n_elements * cube.n_slow * cube.n_fast)
    throw InvalidArgument("IF cube sample count is inconsistent");
  {
    auto out = open_out(path, true);
    write_pod<std::uint64_t>(out, cube.n_elements);
    write_pod<std::uint64_t>(out, cube.n_fast);
    write_pod<std::uint64_t>(out, cube.n_slow);
    write_pod<double>(out, cube.fs_fast);
    write_pod<double>(out, cube.slow_rate);
    write_pod<double>(out, cube.f_min);
    write_pod<double>(out, cube.gamma);
    // std::complex<double> is layout-compatible with double[2]
    out.write(reinterpret_cast<const char*>(cube.samples.data()),
              static_cast<std::streamsize>(cube.samples.size() * sizeof(radar::cplx)));
    if (!out) throw Error("failed writing " + path.string());
  }
  nlohmann::json j = {{"n_elements", cube.n_elements}, {"n_fast", cube.n_fast},
                      {"n_slow", cube.n_slow},         {"fs_fast", cube.fs_fast},
                      {"slow_rate", cube.slow_rate},   {"f_min", cube.f_min},
                      {"gamma", cube.gamma},           {"order", "element,slow,fast"},
                      {"sample", "complex128 interleaved re,im little-endian"}};
  write_json(path.string() + ".json", j);
}

radar::IFCube read_ifcube(const std::filesystem::path& path) {
  auto in = open_in(path, true);
  radar::IFCube c;
  c.n_elements = read_pod<std::uint64_t>(in);
  c.n_fast = read_pod<std::uint64_t>(in);
  c.n_slow = read_pod<std::uint64_t>(in);
  c.fs_fast = read_pod<double>(in);
  c.slow_rate = read_pod<double>(in);
  c.f_min = read_pod<double>(in);
  c.gamma = read_pod<double>(in);
  const std::uint64_t n = c.n_elements * c.n_fast * c.n_slow;
  if (c.n_fast == 0 || n / c.n_fast != c.n_elements * c.n_slow || n > (1ull << 34))
    throw Error("implausible IF cube header in " + path.string());
  c.samples.resize(n);
  if (!in.read(reinterpret_cast<char*>(c.samples.data()),
               static_cast<std::streamsize>(n * sizeof(radar::cplx))))
    throw Error("truncated IF cube " + path.string());
  c.slow_axis.resize(c.n_slow);
  for (std::size_t s = 0; s < c.n_slow; ++s)
    c.slow_axis[s] = static_cast<double>(s) / c.slow_rate;
  return c;
}

}  // namespace defrad::io
