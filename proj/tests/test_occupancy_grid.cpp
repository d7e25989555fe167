#include <algorithm>
#include <bit>
#include <random>

#include <gtest/gtest.h>

#include "egicp/error.hpp"
#include "egicp/occupancy_grid.hpp"
#include "test_support.hpp"

namespace egicp {
namespace {

using test::Rng;

std::vector<Eigen::Vector3d> uniform_points(Rng& rng, std::size_t n, double half) {
  std::vector<Eigen::Vector3d> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) pts.push_back(test::random_vec(rng, half));
  return pts;
}

TEST(OccupancyChunk, SetTestRoundTrip) {
  for (int bit = 0; bit < 512; ++bit) {
    OccupancyChunk c;
    c.set(bit);
    EXPECT_EQ(c.popcount(), 1);
    for (int other = 0; other < 512; ++other) {
      ASSERT_EQ(c.test(other), other == bit);
    }
  }
  EXPECT_EQ(OccupancyChunk::bit_index(1, 2, 3), 1 + 16 + 192);
  EXPECT_EQ(OccupancyChunk::bit_index(7, 7, 7), 511);
}

TEST(OccupancyGrid, SinglePoint) {
  const auto grid = OccupancyGrid::build({{0.1, 0.1, 0.1}}, 1.0);
  EXPECT_EQ(grid.occupied_voxel_count(), 1u);
  EXPECT_TRUE(grid.query({0.1, 0.1, 0.1}));
  EXPECT_TRUE(grid.query({0.9, 0.0, 0.5}));
  EXPECT_FALSE(grid.query({1.1, 0.1, 0.1}));
  EXPECT_FALSE(grid.query({-0.1, 0.1, 0.1}));
}

TEST(OccupancyGrid, NegativeCoordinates) {
  const auto grid = OccupancyGrid::build({{-0.1, -0.1, -0.1}}, 1.0);
  const auto v = grid.voxel_of({-0.1, -0.1, -0.1});
  ASSERT_TRUE(v.has_value());
  EXPECT_EQ(*v, Eigen::Vector3i(-1, -1, -1));
  EXPECT_TRUE(grid.query_voxel({-1, -1, -1}));
  EXPECT_FALSE(grid.query_voxel({0, 0, 0}));
  const auto voxels = grid.occupied_voxels();
  ASSERT_EQ(voxels.size(), 1u);
  EXPECT_EQ(voxels[0], Eigen::Vector3i(-1, -1, -1));
}

TEST(OccupancyGrid, FaceBoundaryUsesFloor) {
  const auto grid = OccupancyGrid::build({{1.0, 0.5, 0.5}}, 1.0);
  EXPECT_TRUE(grid.query_voxel({1, 0, 0}));
  EXPECT_FALSE(grid.query_voxel({0, 0, 0}));
  EXPECT_EQ(*grid.voxel_of({-8.0, 0, 0}), Eigen::Vector3i(-8, 0, 0));
}

TEST(OccupancyGrid, EmptyRegionQuery) {
  Rng rng(1);
  const auto grid = OccupancyGrid::build(uniform_points(rng, 1000, 5.0), 0.5);
  EXPECT_FALSE(grid.query({100, 100, 100}));
  EXPECT_FALSE(grid.query({-1e12, 0, 0}));
  EXPECT_FALSE(grid.query({std::nan(""), 0, 0}));
}

TEST(OccupancyGrid, MatchesNaiveVoxelSet) {
  Rng rng(2);
  const auto pts = uniform_points(rng, 100000, 50.0);
  const double res = 0.5;
  const auto grid = OccupancyGrid::build(pts, res);
  const auto oracle = test::naive_voxel_set(pts, res);

  EXPECT_EQ(grid.occupied_voxel_count(), oracle.size());
  std::set<test::VoxelKey> got;
  for (const auto& v : grid.occupied_voxels()) got.insert({v.x(), v.y(), v.z()});
  EXPECT_TRUE(got == oracle);

  // Queries: half near occupied points, half uniform.
  std::size_t mismatches = 0;
  for (int q = 0; q < 1000000; ++q) {
    const Eigen::Vector3d p = (q % 2 == 0) ? pts[static_cast<std::size_t>(q) % pts.size()] + test::random_vec(rng, 0.6)
                                           : test::random_vec(rng, 55.0);
    mismatches += grid.query(p) != (oracle.count(test::naive_voxel(p, res)) > 0) ? 1 : 0;
  }
  EXPECT_EQ(mismatches, 0u);
}

TEST(OccupancyGrid, TableInvariants) {
  Rng rng(3);
  OccupancyGrid grid(0.25);
  for (int round = 0; round < 20; ++round) {
    grid.insert(uniform_points(rng, 2000, 30.0));
    EXPECT_LE(grid.load_factor(), 0.75);
    EXPECT_TRUE(std::has_single_bit(grid.capacity()));
  }
  EXPECT_GT(grid.capacity(), 16u);
}

TEST(OccupancyGrid, InsertionIdempotent) {
  Rng rng(4);
  const auto pts = uniform_points(rng, 20000, 10.0);
  auto grid = OccupancyGrid::build(pts, 0.5);
  const auto count = grid.occupied_voxel_count();
  const auto chunks = grid.chunk_count();
  grid.insert(pts);
  EXPECT_EQ(grid.occupied_voxel_count(), count);
  EXPECT_EQ(grid.chunk_count(), chunks);
  EXPECT_EQ(OccupancyGrid::build(pts, 0.5).occupied_voxel_count(), count);
}

TEST(OccupancyGrid, HashFormula) {
  const std::array<std::int32_t, 3> c{3, -5, 7};
  const auto want = static_cast<std::uint64_t>(3LL * 73856093) ^ static_cast<std::uint64_t>(-5LL * 19349663) ^
                    static_cast<std::uint64_t>(7LL * 83492791);
  EXPECT_EQ(OccupancyGrid::hash(c), static_cast<std::size_t>(want));
}

TEST(OccupancyGrid, InvalidResolution) {
  for (double r : {0.0, -1.0, std::nan(""), std::numeric_limits<double>::infinity()}) {
    try {
      OccupancyGrid g(r);
      FAIL() << r;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::InvalidResolution);
    }
  }
  EXPECT_THROW((void)OccupancyGrid::build({}, 0.5), Error);
}

TEST(Overlap, SelfAtIdentityIsOne) {
  Rng rng(5);
  const auto pts = uniform_points(rng, 5000, 20.0);
  const auto grid = OccupancyGrid::build(pts, 0.5);
  EXPECT_EQ(overlap(grid, pts, Pose::identity()), 1.0);
}

TEST(Overlap, FarAwayIsZero) {
  Rng rng(6);
  const auto pts = uniform_points(rng, 5000, 20.0);
  const auto grid = OccupancyGrid::build(pts, 0.5);
  EXPECT_EQ(overlap(grid, pts, Pose::from_translation({1000, 0, 0})), 0.0);
}

TEST(Overlap, ConstructedHalfSplit) {
  Rng rng(7);
  const auto pts = uniform_points(rng, 4000, 20.0);
  const auto grid = OccupancyGrid::build(pts, 0.5);
  std::vector<Eigen::Vector3d> source(pts.begin(), pts.begin() + 2000);
  for (int i = 0; i < 2000; ++i) source.push_back(test::random_vec(rng, 5.0) + Eigen::Vector3d(500, 0, 0));
  EXPECT_EQ(overlap(grid, source, Pose::identity()), 0.5);
}

TEST(Overlap, PermutationInvariantAndMatchesOracle) {
  Rng rng(8);
  const auto target = uniform_points(rng, 20000, 10.0);
  const auto grid = OccupancyGrid::build(target, 0.5);
  const auto oracle = test::naive_voxel_set(target, 0.5);
  auto source = uniform_points(rng, 5000, 12.0);
  const Pose pose = test::random_pose(rng, 1.0, 0.5);
  std::size_t hits = 0;
  for (const auto& p : source) hits += oracle.count(test::naive_voxel(pose * p, 0.5));
  const double want = static_cast<double>(hits) / static_cast<double>(source.size());
  EXPECT_EQ(overlap(grid, source, pose), want);
  std::shuffle(source.begin(), source.end(), rng);
  EXPECT_EQ(overlap(grid, source, pose), want);
}

TEST(Overlap, StrideSubsamples) {
  Rng rng(9);
  const auto pts = uniform_points(rng, 1000, 5.0);
  const auto grid = OccupancyGrid::build(pts, 0.5);
  std::vector<Eigen::Vector3d> source;
  for (int i = 0; i < 500; ++i) {
    source.push_back(pts[static_cast<std::size_t>(i)]);
    source.emplace_back(900, 900, 900);
  }
  EXPECT_EQ(overlap(grid, source, Pose::identity(), 2), 1.0);
  EXPECT_EQ(overlap(grid, source, Pose::identity(), 1), 0.5);
}

TEST(Overlap, EmptySource) {
  const auto grid = OccupancyGrid::build({{0, 0, 0}}, 0.5);
  try {
    (void)overlap(grid, {}, Pose::identity());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptySource);
  }
}

}  // namespace
}  // namespace egicp
