#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "egicp/bench.hpp"
#include "egicp/error.hpp"
#include "egicp/lie.hpp"
#include "egicp/metrics.hpp"

namespace egicp {

// ---------------------------------------------------------------------------
// PLY

enum class PlyFormat { Ascii, BinaryLittleEndian };

namespace detail {

struct PlyProperty {
  std::string name;
  std::string type;
  std::size_t size = 0;
};

inline std::size_t ply_type_size(const std::string& t) {
  if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
  if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
  if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" || t == "float32") return 4;
  if (t == "double" || t == "float64") return 8;
  throw Error(ErrorCode::Io, "unsupported PLY property type '" + t + "'");
}

template <typename T>
T read_le(const char* p) {
  static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

inline double ply_binary_value(const char* p, const std::string& t) {
  if (t == "char" || t == "int8") return read_le<std::int8_t>(p);
  if (t == "uchar" || t == "uint8") return read_le<std::uint8_t>(p);
  if (t == "short" || t == "int16") return read_le<std::int16_t>(p);
  if (t == "ushort" || t == "uint16") return read_le<std::uint16_t>(p);
  if (t == "int" || t == "int32") return read_le<std::int32_t>(p);
  if (t == "uint" || t == "uint32") return read_le<std::uint32_t>(p);
  if (t == "float" || t == "float32") return read_le<float>(p);
  return read_le<double>(p);
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/**
 * @brief Reads the x, y, z properties of the vertex element of a PLY file.
 *
 * ascii and binary_little_endian are accepted; other vertex properties are
 * skipped. The vertex element must come first and must not contain list
 * properties.
 */
inline std::vector<Eigen::Vector3d> read_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
  }
  std::string line;
  std::getline(in, line);
  if (detail::trim(line) != "ply") {
    throw Error(ErrorCode::Io, "'" + path.string() + "' is not a PLY file");
  }

  PlyFormat format = PlyFormat::Ascii;
  bool have_format = false;
  std::size_t vertex_count = 0;
  bool in_vertex = false;
  bool seen_vertex = false;
  std::vector<detail::PlyProperty> props;
  while (true) {
    if (!std::getline(in, line)) {
      throw Error(ErrorCode::Io, "unterminated PLY header in '" + path.string() + "'");
    }
    std::istringstream ls(detail::trim(line));
    std::string word;
    ls >> word;
    if (word == "end_header") {
      break;
    }
    if (word == "format") {
      std::string f;
      ls >> f;
      if (f == "ascii") {
        format = PlyFormat::Ascii;
      } else if (f == "binary_little_endian") {
        format = PlyFormat::BinaryLittleEndian;
      } else {
        throw Error(ErrorCode::Io, "unsupported PLY format '" + f + "'");
      }
      have_format = true;
    } else if (word == "element") {
      std::string name;
      ls >> name;
      if (name == "vertex") {
        if (seen_vertex) {
          throw Error(ErrorCode::Io, "duplicate vertex element");
        }
        if (!(ls >> vertex_count)) {
          throw Error(ErrorCode::Io, "malformed vertex element line");
        }
        in_vertex = seen_vertex = true;
      } else {
        if (!seen_vertex) {
          throw Error(ErrorCode::Io, "PLY element '" + name + "' before vertex is not supported");
        }
        in_vertex = false;
      }
    } else if (word == "property" && in_vertex) {
      std::string type, name;
      ls >> type;
      if (type == "list") {
        throw Error(ErrorCode::Io, "list properties on vertices are not supported");
      }
      ls >> name;
      props.push_back({name, type, detail::ply_type_size(type)});
    }
  }
  if (!have_format || !seen_vertex) {
    throw Error(ErrorCode::Io, "PLY header lacks format or vertex element");
  }
  int ix = -1, iy = -1, iz = -1;
  for (std::size_t i = 0; i < props.size(); ++i) {
    if (props[i].name == "x") ix = static_cast<int>(i);
    if (props[i].name == "y") iy = static_cast<int>(i);
    if (props[i].name == "z") iz = static_cast<int>(i);
  }
  if (ix < 0 || iy < 0 || iz < 0) {
    throw Error(ErrorCode::Io, "PLY vertices need x, y and z properties");
  }

  std::vector<Eigen::Vector3d> points(vertex_count);
  std::vector<double> values(props.size());
  if (format == PlyFormat::Ascii) {
    for (std::size_t v = 0; v < vertex_count; ++v) {
      for (auto& x : values) {
        if (!(in >> x)) {
          throw Error(ErrorCode::Io, "truncated PLY vertex data");
        }
      }
      points[v] = {values[static_cast<std::size_t>(ix)], values[static_cast<std::size_t>(iy)],
                   values[static_cast<std::size_t>(iz)]};
    }
  } else {
    std::size_t stride = 0;
    std::vector<std::size_t> offset;
    for (const auto& p : props) {
      offset.push_back(stride);
      stride += p.size;
    }
    std::vector<char> buf(stride);
    for (std::size_t v = 0; v < vertex_count; ++v) {
      if (!in.read(buf.data(), static_cast<std::streamsize>(stride))) {
        throw Error(ErrorCode::Io, "truncated PLY vertex data");
      }
      const auto get = [&](int i) {
        const auto k = static_cast<std::size_t>(i);
        return detail::ply_binary_value(buf.data() + offset[k], props[k].type);
      };
      points[v] = {get(ix), get(iy), get(iz)};
    }
  }
  return points;
}

/// Writes x, y, z as 64-bit floats.
inline void write_ply(const std::filesystem::path& path, const std::vector<Eigen::Vector3d>& points,
                      PlyFormat format = PlyFormat::BinaryLittleEndian) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  }
  out << "ply\n"
      << "format " << (format == PlyFormat::Ascii ? "ascii" : "binary_little_endian") << " 1.0\n"
      << "element vertex " << points.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n"
      << "end_header\n";
  if (format == PlyFormat::Ascii) {
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const auto& p : points) {
      out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
    }
  } else {
    for (const auto& p : points) {
      const double xyz[3] = {p.x(), p.y(), p.z()};
      out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
    }
  }
  if (!out) {
    throw Error(ErrorCode::Io, "failed writing '" + path.string() + "'");
  }
}

// ---------------------------------------------------------------------------
// Trajectories: "timestamp tx ty tz qx qy qz qw" per line

struct TrajectoryRecord {
  double timestamp = 0.0;
  Pose pose;
};

inline Pose parse_pose(const std::string& text) {
  std::istringstream in(text);
  double v[7];
  for (double& x : v) {
    if (!(in >> x)) {
      throw Error(ErrorCode::InvalidArgument, "pose needs 7 numbers: tx ty tz qx qy qz qw");
    }
  }
  std::string rest;
  if (in >> rest) {
    throw Error(ErrorCode::InvalidArgument, "trailing characters after pose");
  }
  const Eigen::Quaterniond q(v[6], v[3], v[4], v[5]);
  if (!(q.norm() > 1e-12) || !std::isfinite(q.norm())) {
    throw Error(ErrorCode::InvalidArgument, "pose quaternion has zero norm");
  }
  return Pose::from_quaternion(q.normalized(), {v[0], v[1], v[2]});
}

inline std::string format_pose(const Pose& pose) {
  std::ostringstream out;
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  const Eigen::Quaterniond q = pose.quaternion();
  out << pose.translation.x() << ' ' << pose.translation.y() << ' ' << pose.translation.z() << ' ' << q.x() << ' '
      << q.y() << ' ' << q.z() << ' ' << q.w();
  return out.str();
}

inline std::vector<TrajectoryRecord> read_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
  }
  std::vector<TrajectoryRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::trim(line);
    if (line.empty() || line[0] == '#') {
      continue;
    }
    std::istringstream ls(line);
    TrajectoryRecord r;
    std::string rest;
    if (!(ls >> r.timestamp)) {
      throw Error(ErrorCode::Io, path.string() + ":" + std::to_string(lineno) + ": bad timestamp");
    }
    std::getline(ls, rest);
    try {
      r.pose = parse_pose(rest);
    } catch (const Error& e) {
      throw Error(ErrorCode::Io, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    out.push_back(r);
  }
  return out;
}

inline void write_trajectory(const std::filesystem::path& path, const std::vector<TrajectoryRecord>& records) {
  std::ofstream out(path);
  if (!out) {
    throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  }
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& r : records) {
    out << r.timestamp << ' ' << format_pose(r.pose) << '\n';
  }
}

/// ATE between two trajectory files' records; timestamps must match pairwise.
inline double ate(const std::vector<TrajectoryRecord>& estimate, const std::vector<TrajectoryRecord>& truth,
                  double timestamp_tolerance = 1e-6) {
  if (estimate.size() != truth.size()) {
    throw Error(ErrorCode::LengthMismatch, "trajectories have different lengths");
  }
  std::vector<Pose> a, b;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    if (std::abs(estimate[i].timestamp - truth[i].timestamp) > timestamp_tolerance) {
      throw Error(ErrorCode::LengthMismatch, "timestamps differ at record " + std::to_string(i));
    }
    a.push_back(estimate[i].pose);
    b.push_back(truth[i].pose);
  }
  return ate(a, b);
}

// ---------------------------------------------------------------------------
// Benchmark CSV

inline constexpr const char* kBenchCsvHeader =
    "method,sample_size,displacement_trans,displacement_rot,kld,mean_trans_err,mean_rot_err";

inline void write_bench_csv(std::ostream& out, const std::vector<BenchRecord>& records) {
  out << kBenchCsvHeader << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& r : records) {
    out << to_string(r.method) << ',' << r.sample_size << ',' << r.displacement_trans << ',' << r.displacement_rot
        << ',' << r.kld << ',' << r.mean_trans_err << ',' << r.mean_rot_err << '\n';
  }
}

inline void write_bench_csv(const std::filesystem::path& path, const std::vector<BenchRecord>& records) {
  std::ofstream out(path);
  if (!out) {
    throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  }
  write_bench_csv(out, records);
}

// ---------------------------------------------------------------------------
// Flat key=value configuration

using ConfigMap = std::map<std::string, std::string>;

inline ConfigMap parse_config(std::istream& in) {
  ConfigMap out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    line = detail::trim(line);
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::InvalidArgument, "config line " + std::to_string(lineno) + ": expected key=value");
    }
    const auto key = detail::trim(line.substr(0, eq));
    const auto value = detail::trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw Error(ErrorCode::InvalidArgument, "config line " + std::to_string(lineno) + ": empty key or value");
    }
    out[key] = value;
  }
  return out;
}

inline ConfigMap read_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
  }
  return parse_config(in);
}

}  // namespace egicp
