#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "egicp/error.hpp"
#include "egicp/lie.hpp"

namespace egicp {

/// Occupancy of an 8x8x8 voxel block; bit index = ix + 8 iy + 64 iz.
struct OccupancyChunk {
  static constexpr std::int32_t kEmpty = std::numeric_limits<std::int32_t>::min();

  std::array<std::int32_t, 3> coord{kEmpty, kEmpty, kEmpty};
  std::array<std::uint64_t, 8> bits{};

  static constexpr int bit_index(int ix, int iy, int iz) { return ix + 8 * iy + 64 * iz; }

  bool empty_slot() const { return coord[0] == kEmpty; }
  void set(int bit) { bits[static_cast<std::size_t>(bit >> 6)] |= std::uint64_t{1} << (bit & 63); }
  bool test(int bit) const { return (bits[static_cast<std::size_t>(bit >> 6)] >> (bit & 63)) & 1u; }

  int popcount() const {
    int n = 0;
    for (auto w : bits) {
      n += std::popcount(w);
    }
    return n;
  }
};

/**
 * @brief Binary voxel occupancy stored as 512-bit chunks in a flat,
 * linearly probed hash table.
 *
 * Voxel coordinates are floor(p / resolution); chunk coordinates are voxel
 * coordinates shifted right by 3 (floor division by 8) and the in-chunk
 * offset is voxel & 7, which keeps the lattice seamless across the origin.
 * The table doubles when its load factor would exceed 0.75.
 */
class OccupancyGrid {
 public:
  using VoxelCoord = Eigen::Vector3i;

  explicit OccupancyGrid(double resolution = 0.5) : resolution_(resolution), inv_resolution_(1.0 / resolution) {
    if (!(resolution > 0.0) || !std::isfinite(resolution)) {
      throw Error(ErrorCode::InvalidResolution, "resolution must be positive");
    }
    table_.resize(16);
  }

  static OccupancyGrid build(const std::vector<Eigen::Vector3d>& points, double resolution = 0.5) {
    OccupancyGrid grid(resolution);
    if (points.empty()) {
      throw Error(ErrorCode::EmptyCloud, "cannot build an occupancy grid from an empty cloud");
    }
    grid.insert(points);
    return grid;
  }

  void insert(const std::vector<Eigen::Vector3d>& points) {
    for (const auto& p : points) {
      if (const auto v = voxel_of(p)) {
        insert_voxel(*v);
      }
    }
  }

  void insert_voxel(const VoxelCoord& v) {
    if (out_of_range(v)) {
      return;
    }
    if (4 * (chunk_count_ + 1) > 3 * table_.size()) {
      grow();
    }
    const auto chunk = chunk_of(v);
    auto& slot = find_or_insert(chunk);
    const int bit = bit_of(v);
    if (!slot.test(bit)) {
      slot.set(bit);
      ++voxel_count_;
    }
  }

  /// Voxel containing p; empty when p lies outside the representable lattice
  /// (|voxel| >= 2^28 on any axis). Such points are never occupied.
  std::optional<VoxelCoord> voxel_of(const Eigen::Vector3d& p) const {
    const Eigen::Vector3d s = (p * inv_resolution_).array().floor();
    if (!((s.array().abs() < static_cast<double>(kLatticeLimit)).all())) {
      return std::nullopt;
    }
    return VoxelCoord(s.cast<int>());
  }

  bool query_voxel(const VoxelCoord& v) const {
    if (out_of_range(v)) {
      return false;
    }
    const auto* slot = find(chunk_of(v));
    return slot != nullptr && slot->test(bit_of(v));
  }

  bool query(const Eigen::Vector3d& p) const {
    const auto v = voxel_of(p);
    return v && query_voxel(*v);
  }

  double resolution() const { return resolution_; }
  std::size_t occupied_voxel_count() const { return voxel_count_; }
  std::size_t chunk_count() const { return chunk_count_; }
  std::size_t capacity() const { return table_.size(); }
  double load_factor() const { return static_cast<double>(chunk_count_) / static_cast<double>(table_.size()); }

  /// All occupied voxel coordinates, in table order.
  std::vector<VoxelCoord> occupied_voxels() const {
    std::vector<VoxelCoord> out;
    out.reserve(voxel_count_);
    for (const auto& slot : table_) {
      if (slot.empty_slot()) {
        continue;
      }
      for (int bit = 0; bit < 512; ++bit) {
        if (slot.test(bit)) {
          out.emplace_back(slot.coord[0] * 8 + (bit & 7), slot.coord[1] * 8 + ((bit >> 3) & 7),
                           slot.coord[2] * 8 + (bit >> 6));
        }
      }
    }
    return out;
  }

  static std::size_t hash(const std::array<std::int32_t, 3>& c) {
    const auto x = static_cast<std::uint64_t>(static_cast<std::int64_t>(c[0]) * 73856093);
    const auto y = static_cast<std::uint64_t>(static_cast<std::int64_t>(c[1]) * 19349663);
    const auto z = static_cast<std::uint64_t>(static_cast<std::int64_t>(c[2]) * 83492791);
    return static_cast<std::size_t>(x ^ y ^ z);
  }

 private:
  static constexpr int kLatticeLimit = 1 << 28;

  static bool out_of_range(const VoxelCoord& v) { return (v.array().abs() >= kLatticeLimit).any(); }

  static std::array<std::int32_t, 3> chunk_of(const VoxelCoord& v) { return {v.x() >> 3, v.y() >> 3, v.z() >> 3}; }

  static int bit_of(const VoxelCoord& v) { return OccupancyChunk::bit_index(v.x() & 7, v.y() & 7, v.z() & 7); }

  const OccupancyChunk* find(const std::array<std::int32_t, 3>& c) const {
    const std::size_t mask = table_.size() - 1;
    for (std::size_t i = hash(c) & mask;; i = (i + 1) & mask) {
      const auto& slot = table_[i];
      if (slot.empty_slot()) {
        return nullptr;
      }
      if (slot.coord == c) {
        return &slot;
      }
    }
  }

  OccupancyChunk& find_or_insert(const std::array<std::int32_t, 3>& c) {
    const std::size_t mask = table_.size() - 1;
    for (std::size_t i = hash(c) & mask;; i = (i + 1) & mask) {
      auto& slot = table_[i];
      if (slot.empty_slot()) {
        slot.coord = c;
        ++chunk_count_;
        return slot;
      }
      if (slot.coord == c) {
        return slot;
      }
    }
  }

  void grow() {
    std::vector<OccupancyChunk> previous(table_.size() * 2);
    previous.swap(table_);
    const std::size_t mask = table_.size() - 1;
    for (const auto& chunk : previous) {
      if (chunk.empty_slot()) {
        continue;
      }
      std::size_t i = hash(chunk.coord) & mask;
      while (!table_[i].empty_slot()) {
        i = (i + 1) & mask;
      }
      table_[i] = chunk;
    }
  }

  double resolution_;
  double inv_resolution_;
  std::vector<OccupancyChunk> table_;
  std::size_t chunk_count_ = 0;
  std::size_t voxel_count_ = 0;
};

/// Fraction of source points (every `stride`-th) whose transformed position
/// falls in an occupied voxel of `grid`.
inline double overlap(const OccupancyGrid& grid, const std::vector<Eigen::Vector3d>& source, const Pose& pose,
                      std::size_t stride = 1) {
  if (source.empty()) {
    throw Error(ErrorCode::EmptySource, "overlap needs a non-empty source cloud");
  }
  stride = std::max<std::size_t>(stride, 1);
  std::size_t hits = 0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < source.size(); i += stride) {
    hits += grid.query(pose * source[i]) ? 1 : 0;
    ++total;
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace egicp
