#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <tuple>
#include <vector>

#include <Eigen/Geometry>

#include "egicp/coreset.hpp"
#include "egicp/error.hpp"
#include "egicp/gaussian_cloud.hpp"
#include "egicp/gicp.hpp"
#include "egicp/lie.hpp"
#include "egicp/metrics.hpp"
#include "egicp/synth.hpp"

namespace egicp {

/// Registration problem: source expressed in the target frame by sampling_pose.
struct CloudPair {
  std::shared_ptr<const GaussianCloud> source;
  std::shared_ptr<const GaussianCloud> target;
  Pose sampling_pose;
};

enum class BenchMethod { Coreset, Random, Quadratic };

inline const char* to_string(BenchMethod m) {
  switch (m) {
    case BenchMethod::Coreset: return "coreset";
    case BenchMethod::Random: return "random";
    case BenchMethod::Quadratic: return "quadratic";
  }
  return "unknown";
}

struct BenchRecord {
  BenchMethod method = BenchMethod::Coreset;
  std::size_t sample_size = 0;
  double displacement_trans = 0.0;  // meters
  double displacement_rot = 0.0;    // degrees
  double kld = 0.0;
  double mean_trans_err = 0.0;  // meters
  double mean_rot_err = 0.0;    // degrees

  std::size_t level = 0;
  std::size_t pair = 0;
  std::size_t trial = 0;
};

struct BenchConfig {
  std::vector<std::size_t> sizes{32, 64, 128, 256};
  double max_trans = 0.5;  // meters
  double max_rot = 5.0;    // degrees
  // Displacement magnitudes are level / (levels - 1) of the maxima, level 0 included.
  std::size_t levels = 6;
  std::size_t trials = 100;
  std::uint64_t seed = 0;
  double max_corr_dist = kDefaultMaxCorrespondenceDistance;
};

namespace detail {

inline std::mt19937_64 bench_rng(std::uint64_t seed, std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(c),
                    static_cast<std::uint32_t>(d)};
  return std::mt19937_64(seq);
}

inline Eigen::Vector3d random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector3d v;
  do {
    v = Eigen::Vector3d(n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-12);
  return v.normalized();
}

struct Scores {
  double kld = 0.0;
  MeanError mean;
};

inline Scores score(const QuadraticFactor& ref, const QuadraticFactor& test) {
  try {
    return {kld_gaussian(ref.H, test.H), mean_vector_error(ref, test)};
  } catch (const Error& e) {
    if (e.code() != ErrorCode::SingularMatrix) {
      throw;
    }
    const double inf = std::numeric_limits<double>::infinity();
    return {inf, {inf, inf}};
  }
}

// Uniform draw of `size` bank entries without replacement, weight n / size each.
inline Coreset random_subset(const ResidualBank& bank, std::size_t size, std::mt19937_64& rng) {
  const std::size_t n = bank.entries.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t m = std::min(size, n);
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  Coreset out;
  out.sampling_pose = bank.pose;
  const double w = static_cast<double>(n) / static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i) {
    out.indices.push_back(bank.entries[order[i]].source_index);
    out.weights.push_back(w);
  }
  return out;
}

}  // namespace detail

/**
 * @brief Approximation quality of the coreset, random-sampling and frozen
 * quadratic factors away from the sampling pose.
 *
 * For every pair the full factor is linearized at the sampling pose. Each
 * trial perturbs the sampling pose by a rotation of level * max_rot about a
 * random axis and a translation of level * max_trans along a random
 * direction, recomputes the full factor there as reference and compares the
 * three approximations against it. The frozen quadratic does not depend on
 * the sample size; it is reported once per size so every bucket is complete.
 */
inline std::vector<BenchRecord> bench_approximation(const std::vector<CloudPair>& pairs, const BenchConfig& config) {
  if (pairs.empty() || config.sizes.empty() || config.levels == 0 || config.trials == 0) {
    throw Error(ErrorCode::InvalidArgument, "benchmark needs pairs, sizes, levels and trials");
  }
  std::vector<BenchRecord> records;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& pair = pairs[p];
    if (!pair.source || !pair.target) {
      throw Error(ErrorCode::EmptyCloud, "benchmark pair is missing a cloud");
    }
    const auto& source = *pair.source;
    const auto& target = *pair.target;
    const auto sampled = linearize_full(source, target, pair.sampling_pose, config.max_corr_dist);

    std::vector<Coreset> coresets;
    for (auto size : config.sizes) {
      coresets.push_back(extract_coreset(sampled.bank, size));
    }

    for (std::size_t level = 0; level < config.levels; ++level) {
      const double f = config.levels == 1 ? 0.0 : static_cast<double>(level) / static_cast<double>(config.levels - 1);
      const double trans = f * config.max_trans;
      const double rot = f * config.max_rot;
      for (std::size_t trial = 0; trial < config.trials; ++trial) {
        auto rng = detail::bench_rng(config.seed, p, level, trial, 0);
        const Eigen::Vector3d axis = detail::random_unit(rng);
        const Eigen::Vector3d dir = detail::random_unit(rng);
        const Pose offset(Eigen::AngleAxisd(deg2rad(rot), axis).toRotationMatrix(), trans * dir);
        const Pose perturbed = pair.sampling_pose * offset;

        const auto reference = linearize_full(source, target, perturbed, config.max_corr_dist).factor;
        const auto quadratic = detail::score(reference, shift_quadratic(sampled.factor, perturbed));

        const auto emit = [&](BenchMethod method, std::size_t size, const detail::Scores& s) {
          records.push_back({method, size, trans, rot, s.kld, s.mean.trans, s.mean.rot, level, p, trial});
        };

        for (std::size_t k = 0; k < config.sizes.size(); ++k) {
          const auto size = config.sizes[k];
          emit(BenchMethod::Coreset, size,
               detail::score(reference,
                             relinearize_coreset(coresets[k], source, target, perturbed, config.max_corr_dist)));

          auto draw_rng = detail::bench_rng(config.seed, p, level, trial, size);
          const auto subset = detail::random_subset(sampled.bank, size, draw_rng);
          detail::Scores random;
          try {
            random = detail::score(reference, relinearize_coreset(subset, source, target, perturbed,
                                                                  config.max_corr_dist));
          } catch (const Error& e) {
            if (e.code() != ErrorCode::NoValidCorrespondences) {
              throw;
            }
            const double inf = std::numeric_limits<double>::infinity();
            random = {inf, {inf, inf}};
          }
          emit(BenchMethod::Random, size, random);
          emit(BenchMethod::Quadratic, size, quadratic);
        }
      }
    }
  }

  std::sort(records.begin(), records.end(), [](const BenchRecord& a, const BenchRecord& b) {
    return std::tie(a.method, a.sample_size, a.level, a.pair, a.trial) <
           std::tie(b.method, b.sample_size, b.level, b.pair, b.trial);
  });
  return records;
}

/**
 * @brief Consecutive-frame pairs of a synthetic scene with independently
 * resampled surfaces; source = frame k + 1, target = frame k, sampling pose
 * = ground-truth relative pose.
 */
inline std::vector<CloudPair> scene_pairs(SceneKind kind, double noise_sigma, std::size_t pair_count,
                                          std::uint64_t seed, const CovarianceConfig& covariance = {}) {
  if (pair_count == 0) {
    throw Error(ErrorCode::InvalidArgument, "pair_count must be at least 1");
  }
  SceneOptions options;
  options.resample_per_frame = true;
  // Loop frames are spread over the whole circle; use a fine spacing and keep the first pairs.
  const std::size_t frames = kind == SceneKind::Loop ? std::max<std::size_t>(pair_count + 1, 64) : pair_count + 1;
  const auto scene = synth_scene(kind, noise_sigma, frames, seed, options);
  std::vector<CloudPair> pairs;
  for (std::size_t k = 0; k < pair_count; ++k) {
    CloudPair pair;
    pair.target = std::make_shared<const GaussianCloud>(estimate_covariances(scene.clouds[k], covariance));
    pair.source = std::make_shared<const GaussianCloud>(estimate_covariances(scene.clouds[k + 1], covariance));
    pair.sampling_pose = scene.trajectory[k].inverse() * scene.trajectory[k + 1];
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

struct BenchSummary {
  BenchMethod method = BenchMethod::Coreset;
  std::size_t sample_size = 0;
  std::size_t level = 0;
  double displacement_trans = 0.0;
  double displacement_rot = 0.0;
  std::size_t count = 0;
  double kld = 0.0;
  double mean_trans_err = 0.0;
  double mean_rot_err = 0.0;
};

/// Means over pairs and trials for every (method, size, displacement level).
inline std::vector<BenchSummary> summarize(const std::vector<BenchRecord>& records) {
  std::map<std::tuple<BenchMethod, std::size_t, std::size_t>, BenchSummary> buckets;
  for (const auto& r : records) {
    auto& s = buckets[{r.method, r.sample_size, r.level}];
    s.method = r.method;
    s.sample_size = r.sample_size;
    s.level = r.level;
    s.displacement_trans = r.displacement_trans;
    s.displacement_rot = r.displacement_rot;
    ++s.count;
    s.kld += r.kld;
    s.mean_trans_err += r.mean_trans_err;
    s.mean_rot_err += r.mean_rot_err;
  }
  std::vector<BenchSummary> out;
  for (auto& [key, s] : buckets) {
    const auto n = static_cast<double>(s.count);
    s.kld /= n;
    s.mean_trans_err /= n;
    s.mean_rot_err /= n;
    out.push_back(s);
  }
  return out;
}

}  // namespace egicp
