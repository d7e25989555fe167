#include <cmath>
#include <memory>

#include <gtest/gtest.h>

#include "egicp/error.hpp"
#include "egicp/gicp.hpp"
#include "test_support.hpp"

namespace egicp {
namespace {

using test::Rng;

GaussianCloud random_cloud(Rng& rng, std::size_t n, double extent) {
  std::vector<Eigen::Vector3d> means;
  std::vector<Eigen::Matrix3d> covs;
  for (std::size_t i = 0; i < n; ++i) {
    means.push_back(test::random_vec(rng, extent));
    covs.push_back(test::random_spd(rng));
  }
  return {means, covs};
}

TEST(Correspondences, SelfMatchAtIdentity) {
  Rng rng(1);
  const auto cloud = estimate_covariances(test::structured_points(rng, 500));
  const auto corr = find_correspondences(cloud, cloud, Pose::identity(), 2.0);
  ASSERT_EQ(corr.size(), cloud.size());
  for (std::size_t i = 0; i < corr.size(); ++i) {
    EXPECT_TRUE(corr[i].valid);
    EXPECT_EQ(corr[i].source_index, i);
    EXPECT_EQ(corr[i].target_index, i);
  }
}

TEST(Correspondences, FarAwayAllInvalid) {
  Rng rng(2);
  const auto cloud = estimate_covariances(test::structured_points(rng, 300));
  const auto corr = find_correspondences(cloud, cloud, Pose::from_translation({40, 0, 0}), 2.0);
  for (const auto& c : corr) {
    EXPECT_FALSE(c.valid);
  }
}

TEST(Correspondences, MatchLinearScanOracle) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto source = random_cloud(rng, 200, 3.0);
    const auto target = random_cloud(rng, 200, 3.0);
    const Pose pose = test::random_pose(rng, 1.0);
    const double max_dist = 0.6;
    const auto corr = find_correspondences(source, target, pose, max_dist);
    for (std::size_t i = 0; i < source.size(); ++i) {
      const auto want = test::linear_scan(target.means(), pose * source.mean(i));
      ASSERT_EQ(corr[i].target_index, want.index);
      ASSERT_EQ(corr[i].valid, want.sq_dist <= max_dist * max_dist);
    }
  }
}

TEST(Correspondences, EmptyCloudRejected) {
  const GaussianCloud empty(std::vector<Eigen::Vector3d>{}, std::vector<Eigen::Matrix3d>{});
  Rng rng(4);
  const auto cloud = random_cloud(rng, 10, 1.0);
  try {
    (void)find_correspondences(empty, cloud, Pose::identity());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyCloud);
  }
}

TEST(LinearizePoint, ZeroResidualWhenAligned) {
  Rng rng(5);
  const Pose t = test::random_pose(rng);
  const Eigen::Vector3d mu = test::random_vec(rng);
  const auto pl = linearize_point(t * mu, test::random_spd(rng), mu, test::random_spd(rng), t);
  EXPECT_LE(pl.residual.norm(), 1e-12);
}

TEST(LinearizePoint, UnitWhiteningIsIdentity) {
  const Eigen::Matrix3d half = 0.5 * Eigen::Matrix3d::Identity();
  const Eigen::Vector3d a(1, 2, 3), b(0.5, -1, 2);
  const auto pl = linearize_point(a, half, b, half, Pose::identity());
  EXPECT_LE((pl.residual - (a - b)).norm(), 1e-15);
}

TEST(LinearizePoint, MahalanobisOracle) {
  Rng rng(6);
  for (int k = 0; k < 1000; ++k) {
    const Pose t = test::random_pose(rng);
    const Eigen::Vector3d mu_t = test::random_vec(rng, 3), mu_s = test::random_vec(rng, 3);
    const Eigen::Matrix3d cov_t = test::random_spd(rng), cov_s = test::random_spd(rng);
    const auto pl = linearize_point(mu_t, cov_t, mu_s, cov_s, t);
    const Eigen::Vector3d d = mu_t - t * mu_s;
    const Eigen::Matrix3d m = cov_t + t.rotation * cov_s * t.rotation.transpose();
    const double want = d.dot(m.inverse() * d);
    EXPECT_LE(test::rel_err(pl.residual.squaredNorm(), want), 1e-10);
  }
}

TEST(LinearizePoint, JacobianMatchesCentralDifferences) {
  Rng rng(7);
  const double h = 1e-6;
  for (int k = 0; k < 1000; ++k) {
    const Pose t = test::random_pose(rng);
    const Eigen::Vector3d mu_t = test::random_vec(rng, 3), mu_s = test::random_vec(rng, 3);
    const Eigen::Matrix3d cov_t = test::random_spd(rng), cov_s = test::random_spd(rng);
    const auto pl = linearize_point(mu_t, cov_t, mu_s, cov_s, t);
    // Whitening frozen at t on both sides.
    const Eigen::Matrix3d m = cov_t + t.rotation * cov_s * t.rotation.transpose();
    const Eigen::Matrix3d l_inv = Eigen::Matrix3d(m.llt().matrixL()).inverse();
    Matrix36d fd;
    for (int j = 0; j < 6; ++j) {
      Vector6d dx = Vector6d::Zero();
      dx(j) = h;
      const Eigen::Vector3d ep = l_inv * (mu_t - boxplus(t, Twist(dx)) * mu_s);
      const Eigen::Vector3d em = l_inv * (mu_t - boxplus(t, Twist(Vector6d(-dx))) * mu_s);
      fd.col(j) = (ep - em) / (2 * h);
    }
    EXPECT_LE(test::rel_err(pl.jacobian, fd), 1e-5);
  }
}

TEST(LinearizePoint, SingularCombinedCovariance) {
  const Eigen::Matrix3d zero = Eigen::Matrix3d::Zero();
  try {
    (void)linearize_point({0, 0, 0}, zero, {1, 0, 0}, zero, Pose::identity());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingularInformationMatrix);
  }
}

TEST(LinearizeFull, PerfectAlignmentHasZeroGradient) {
  Rng rng(8);
  const auto cloud = estimate_covariances(test::structured_points(rng, 1000));
  const auto full = linearize_full(cloud, cloud, Pose::identity());
  EXPECT_EQ(full.factor.c, 0.0);
  EXPECT_TRUE(full.factor.b.isZero(0.0));
  EXPECT_EQ(full.factor.point_count, cloud.size());
}

TEST(LinearizeFull, SinglePoint) {
  Rng rng(9);
  const auto target = random_cloud(rng, 50, 3.0);
  const GaussianCloud source({Eigen::Vector3d(0.1, 0.2, 0.3)}, {test::random_spd(rng)});
  const Pose t = test::random_pose(rng, 0.5, 0.3);
  const auto full = linearize_full(source, target, t, 100.0);
  const auto corr = find_correspondence(0, source, target, t, 100.0);
  const auto pl = linearize_point(source, target, corr, t);
  EXPECT_EQ(full.factor.point_count, 1u);
  EXPECT_LE(test::rel_err(full.factor.H, pl.jacobian.transpose() * pl.jacobian), 1e-15);
}

TEST(LinearizeFull, MatchesDirectSumAndStackedProduct) {
  Rng rng(10);
  for (int trial = 0; trial < 5; ++trial) {
    const auto target = estimate_covariances(test::structured_points(rng, 500, 0.01));
    const auto source = estimate_covariances(test::structured_points(rng, 500, 0.01));
    const Pose t = test::random_pose(rng, 0.2, 0.05);
    const auto full = linearize_full(source, target, t);

    Matrix6d h = Matrix6d::Zero();
    Vector6d b = Vector6d::Zero();
    double c = 0.0;
    std::size_t valid = 0;
    for (std::size_t i = 0; i < source.size(); ++i) {
      const auto nn = test::linear_scan(target.means(), t * source.mean(i));
      if (nn.sq_dist > 4.0) continue;
      const auto pl = linearize_point(target.mean(nn.index), target.covariance(nn.index), source.mean(i),
                                      source.covariance(i), t);
      h += pl.jacobian.transpose() * pl.jacobian;
      b += pl.jacobian.transpose() * pl.residual;
      c += pl.residual.squaredNorm();
      ++valid;
    }
    EXPECT_EQ(full.factor.point_count, valid);
    EXPECT_LE(test::rel_err(full.factor.H, h), 1e-12);
    EXPECT_LE(test::rel_err(full.factor.b, b), 1e-12);
    EXPECT_LE(test::rel_err(full.factor.c, c), 1e-12);

    // Bank entries reproduce the factor; H equals the stacked product on the first 100.
    QuadraticFactor from_bank;
    for (const auto& e : full.bank.entries) from_bank.add(e);
    EXPECT_LE(test::rel_err(from_bank.H, full.factor.H), 1e-12);
    EXPECT_LE(test::rel_err(from_bank.b, full.factor.b), 1e-12);

    Eigen::MatrixXd j(300, 6);
    QuadraticFactor first;
    for (int k = 0; k < 100; ++k) {
      j.middleRows<3>(3 * k) = full.bank.entries[static_cast<std::size_t>(k)].jacobian;
      first.add(full.bank.entries[static_cast<std::size_t>(k)]);
    }
    EXPECT_LE(test::rel_err(first.H, j.transpose() * j), 1e-12);

    EXPECT_LE((full.factor.H - full.factor.H.transpose()).cwiseAbs().maxCoeff(), 1e-12 * full.factor.H.norm());
    Eigen::SelfAdjointEigenSolver<Matrix6d> eig(full.factor.H);
    EXPECT_GE(eig.eigenvalues()(0), -1e-9 * full.factor.H.trace());
    EXPECT_GE(full.factor.c, 0.0);
  }
}

TEST(EvaluateCost, EqualsConstantTerm) {
  Rng rng(11);
  const auto target = estimate_covariances(test::structured_points(rng, 800, 0.01));
  const auto source = estimate_covariances(test::structured_points(rng, 800, 0.01));
  for (int k = 0; k < 100; ++k) {
    const Pose t = test::random_pose(rng, 0.5, 0.2);
    const auto full = linearize_full(source, target, t);
    EXPECT_LE(test::rel_err(evaluate_cost(source, target, t), full.factor.c), 1e-12);
    EXPECT_EQ(full.factor.evaluate(Vector6d::Zero()), full.factor.c);
  }
  EXPECT_EQ(evaluate_cost(target, target, Pose::identity()), 0.0);
}

TEST(EvaluateCost, GaussNewtonStepDecreasesCost) {
  Rng rng(12);
  const auto pts = test::structured_points(rng, 3000);
  const auto target = estimate_covariances(pts);
  const auto source = estimate_covariances(pts);
  for (int k = 0; k < 10; ++k) {
    const Pose start = Pose(test::random_rotation(rng, 0.02), 0.2 * test::random_axis(rng));
    const auto full = linearize_full(source, target, start);
    const Vector6d dx = -full.factor.H.ldlt().solve(full.factor.b);
    const double after = evaluate_cost(source, target, boxplus(start, Twist(dx)));
    EXPECT_LE(after, full.factor.c);
  }
}

TEST(EvaluateCost, NoValidCorrespondences) {
  Rng rng(13);
  const auto cloud = random_cloud(rng, 20, 1.0);
  try {
    (void)linearize_full(cloud, cloud, Pose::from_translation({100, 0, 0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoValidCorrespondences);
  }
  EXPECT_THROW((void)evaluate_cost(cloud, cloud, Pose::from_translation({100, 0, 0})), Error);
}

}  // namespace
}  // namespace egicp
