// Command-line front end: registration, approximation benchmark, overlap,
// full pipeline, synthetic data and ATE evaluation.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "egicp/egicp.hpp"

namespace fs = std::filesystem;
using namespace egicp;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

std::shared_ptr<const GaussianCloud> load_cloud(const std::string& path, const CovarianceConfig& cfg) {
  return std::make_shared<const GaussianCloud>(estimate_covariances(read_ply(path), cfg));
}

struct RegisterArgs {
  std::string source, target, out, init;
  std::size_t coreset_size = 128;
  bool no_coreset = false;
  double max_corr_dist = kDefaultMaxCorrespondenceDistance;
  int max_iterations = 50;
};

int run_register(const RegisterArgs& a) {
  const CovarianceConfig cov;
  const auto target = load_cloud(a.target, cov);
  const auto source = load_cloud(a.source, cov);

  PoseGraph graph;
  graph.add_pose(Pose::identity(), true);
  graph.add_pose(a.init.empty() ? Pose::identity() : parse_pose(a.init));
  graph.add_factor(0, 1, target, source);

  OptimizerConfig cfg;
  cfg.max_iterations = a.max_iterations;
  cfg.linearization.enable_coreset = !a.no_coreset;
  cfg.linearization.coreset_size = a.coreset_size;
  cfg.linearization.max_corr_dist = a.max_corr_dist;
  const auto report = optimize(graph, cfg);

  const auto& ev = report.evaluations;
  std::cout << "pose: " << format_pose(graph.pose(1)) << '\n'
            << std::setprecision(10) << "cost: " << report.final_full_cost << '\n'
            << "iterations: " << report.iterations << '\n'
            << "termination: " << to_string(report.termination) << '\n'
            << "full_linearizations: " << ev.full_linearizations << '\n'
            << "coreset_linearizations: " << ev.coreset_linearizations << '\n'
            << "coreset_extractions: " << ev.coreset_extractions << '\n'
            << "residual_evaluations: " << ev.residual_evaluations << '\n';
  for (const auto& w : report.warnings) {
    std::cerr << "warning: " << w << '\n';
  }
  if (!a.out.empty()) {
    write_trajectory(a.out, {{0.0, graph.pose(1)}});
  }
  return 0;
}

struct BenchArgs {
  std::string scene = "room";
  std::vector<std::size_t> sizes{32, 64, 128, 256};
  double max_trans = 0.5;
  double max_rot = 5.0;
  std::size_t trials = 100;
  std::size_t levels = 6;
  std::size_t pairs = 4;
  double noise = 0.01;
  std::uint64_t seed = 0;
  std::string out;
  std::string plot_dir;
};

int run_bench(const BenchArgs& a) {
  BenchConfig cfg;
  cfg.sizes = a.sizes;
  cfg.max_trans = a.max_trans;
  cfg.max_rot = a.max_rot;
  cfg.trials = a.trials;
  cfg.levels = a.levels;
  cfg.seed = a.seed;
  const auto pairs = scene_pairs(parse_scene_kind(a.scene), a.noise, a.pairs, a.seed);
  const auto records = bench_approximation(pairs, cfg);
  if (a.out.empty() || a.out == "-") {
    write_bench_csv(std::cout, records);
  } else {
    write_bench_csv(fs::path(a.out), records);
  }

  const auto summary = summarize(records);
  if (!a.plot_dir.empty()) {
    fs::create_directories(a.plot_dir);
    for (const auto& s : summary) {
      const auto name = fs::path(a.plot_dir) / (std::string(to_string(s.method)) + "_" + std::to_string(s.sample_size) + ".dat");
      const bool fresh = !fs::exists(name) || s.level == 0;
      std::ofstream f(name, fresh ? std::ios::trunc : std::ios::app);
      if (fresh) {
        f << "# displacement_trans displacement_rot kld mean_trans_err mean_rot_err\n";
      }
      f << std::setprecision(10) << s.displacement_trans << ' ' << s.displacement_rot << ' ' << s.kld << ' '
        << s.mean_trans_err << ' ' << s.mean_rot_err << '\n';
    }
  }
  if (!a.out.empty() && a.out != "-") {
    std::cout << std::left << std::setw(10) << "method" << std::setw(6) << "size" << std::setw(10) << "trans"
              << std::setw(8) << "rot" << std::setw(14) << "kld" << std::setw(14) << "trans_err" << "rot_err\n";
    for (const auto& s : summary) {
      std::cout << std::setw(10) << to_string(s.method) << std::setw(6) << s.sample_size << std::setw(10)
                << s.displacement_trans << std::setw(8) << s.displacement_rot << std::setw(14) << s.kld
                << std::setw(14) << s.mean_trans_err << s.mean_rot_err << '\n';
    }
  }
  return 0;
}

struct OverlapArgs {
  std::string source, target, pose;
  double resolution = 0.5;
};

int run_overlap(const OverlapArgs& a) {
  const auto grid = OccupancyGrid::build(read_ply(a.target), a.resolution);
  const Pose pose = a.pose.empty() ? Pose::identity() : parse_pose(a.pose);
  std::cout << std::setprecision(10) << overlap(grid, read_ply(a.source), pose) << '\n';
  return 0;
}

struct PipelineArgs {
  std::string scans, config, out_traj, out_global;
};

std::vector<fs::path> list_ply(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw Error(ErrorCode::Io, "'" + dir.string() + "' is not a directory");
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".ply") {
      files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

int run_pipeline_cmd(const PipelineArgs& a) {
  PipelineConfig cfg = apply_config({}, a.config.empty() ? ConfigMap{} : read_config(a.config));
  std::vector<std::vector<Eigen::Vector3d>> scans;
  for (const auto& f : list_ply(a.scans)) {
    scans.push_back(read_ply(f));
  }
  if (scans.empty()) {
    throw Error(ErrorCode::EmptyCloud, "no .ply files in '" + a.scans + "'");
  }
  const auto result = run_pipeline(scans, cfg);
  write_trajectory(a.out_traj, to_records(result.odometry, cfg.frame_interval));
  if (!a.out_global.empty()) {
    write_trajectory(a.out_global, to_records(result.global, cfg.frame_interval));
  }
  std::cout << "frames: " << scans.size() << '\n'
            << "degenerate_frames: " << result.degenerate_frames.size() << '\n'
            << "submaps: " << result.submap_count << '\n'
            << "global_factors: " << result.global_factor_count << '\n';
  return 0;
}

struct SynthArgs {
  std::string kind = "room";
  std::size_t frames = 10;
  double noise = 0.0;
  std::uint64_t seed = 0;
  std::string out;
  bool resample = false;
  bool ascii = false;
  double frame_interval = 0.1;
};

int run_synth(const SynthArgs& a) {
  SceneOptions options;
  options.resample_per_frame = a.resample;
  const auto scene = synth_scene(parse_scene_kind(a.kind), a.noise, a.frames, a.seed, options);
  fs::create_directories(a.out);
  for (std::size_t k = 0; k < scene.clouds.size(); ++k) {
    std::ostringstream name;
    name << "frame_" << std::setw(6) << std::setfill('0') << k << ".ply";
    write_ply(fs::path(a.out) / name.str(), scene.clouds[k], a.ascii ? PlyFormat::Ascii : PlyFormat::BinaryLittleEndian);
  }
  write_trajectory(fs::path(a.out) / "ground_truth.txt", to_records(scene.trajectory, a.frame_interval));
  std::cout << "wrote " << scene.clouds.size() << " frames to " << a.out << '\n';
  return 0;
}

struct AteArgs {
  std::string estimate, truth;
};

int run_eval_ate(const AteArgs& a) {
  std::cout << std::setprecision(10) << ate(read_trajectory(a.estimate), read_trajectory(a.truth)) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coreset-accelerated GICP registration and mapping tools"};
  app.require_subcommand(1);

  RegisterArgs reg;
  auto* reg_cmd = app.add_subcommand("register", "Register a source cloud to a target cloud");
  reg_cmd->add_option("--source", reg.source, "Source PLY")->required()->check(CLI::ExistingFile);
  reg_cmd->add_option("--target", reg.target, "Target PLY")->required()->check(CLI::ExistingFile);
  reg_cmd->add_option("--coreset-size", reg.coreset_size, "Coreset target size")->capture_default_str();
  reg_cmd->add_flag("--no-coreset", reg.no_coreset, "Always linearize every residual");
  reg_cmd->add_option("--max-corr-dist", reg.max_corr_dist, "Correspondence distance gate [m]")->capture_default_str();
  reg_cmd->add_option("--max-iterations", reg.max_iterations, "LM iteration cap")->capture_default_str();
  reg_cmd->add_option("--init", reg.init, "Initial pose \"tx ty tz qx qy qz qw\"");
  reg_cmd->add_option("--out", reg.out, "Write the final pose in trajectory format");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench-approx", "Approximation benchmark on a synthetic scene");
  bench_cmd->add_option("--scene", bench.scene, "room, corridor or loop")
      ->check(CLI::IsMember({"room", "corridor", "loop"}))
      ->capture_default_str();
  bench_cmd->add_option("--sizes", bench.sizes, "Sample sizes")->delimiter(',')->capture_default_str();
  bench_cmd->add_option("--max-trans", bench.max_trans, "Largest displacement [m]")->capture_default_str();
  bench_cmd->add_option("--max-rot", bench.max_rot, "Largest displacement [deg]")->capture_default_str();
  bench_cmd->add_option("--trials", bench.trials, "Trials per displacement level")->capture_default_str();
  bench_cmd->add_option("--levels", bench.levels, "Displacement levels including zero")->capture_default_str();
  bench_cmd->add_option("--pairs", bench.pairs, "Frame pairs drawn from the scene")->capture_default_str();
  bench_cmd->add_option("--noise", bench.noise, "Point noise sigma [m]")->capture_default_str();
  bench_cmd->add_option("--seed", bench.seed, "Random seed")->capture_default_str();
  bench_cmd->add_option("--out", bench.out, "CSV output ('-' or empty for stdout)");
  bench_cmd->add_option("--plot-dir", bench.plot_dir, "Write per-method gnuplot data files here");

  OverlapArgs ov;
  auto* ov_cmd = app.add_subcommand("overlap", "Overlap ratio of a source cloud with a target grid");
  ov_cmd->add_option("--source", ov.source, "Source PLY")->required()->check(CLI::ExistingFile);
  ov_cmd->add_option("--target", ov.target, "Target PLY")->required()->check(CLI::ExistingFile);
  ov_cmd->add_option("--pose", ov.pose, "Source-to-target pose \"tx ty tz qx qy qz qw\"");
  ov_cmd->add_option("--resolution", ov.resolution, "Voxel size [m]")->capture_default_str();

  PipelineArgs pipe;
  auto* pipe_cmd = app.add_subcommand("pipeline", "Odometry and global submap optimization over a scan directory");
  pipe_cmd->add_option("--scans", pipe.scans, "Directory of PLY scans (sorted by name)")->required();
  pipe_cmd->add_option("--config", pipe.config, "key=value configuration file")->check(CLI::ExistingFile);
  pipe_cmd->add_option("--out-traj", pipe.out_traj, "Odometry trajectory output")->required();
  pipe_cmd->add_option("--out-global", pipe.out_global, "Globally optimized trajectory output");

  SynthArgs syn;
  auto* syn_cmd = app.add_subcommand("synth", "Generate a synthetic scan sequence");
  syn_cmd->add_option("--kind", syn.kind, "room, corridor or loop")
      ->check(CLI::IsMember({"room", "corridor", "loop"}))
      ->capture_default_str();
  syn_cmd->add_option("--frames", syn.frames, "Number of frames")->capture_default_str();
  syn_cmd->add_option("--noise", syn.noise, "Point noise sigma [m]")->capture_default_str();
  syn_cmd->add_option("--seed", syn.seed, "Random seed")->capture_default_str();
  syn_cmd->add_option("--out", syn.out, "Output directory")->required();
  syn_cmd->add_flag("--resample", syn.resample, "Sample the surfaces independently for every frame");
  syn_cmd->add_flag("--ascii", syn.ascii, "Write ascii PLY");
  syn_cmd->add_option("--frame-interval", syn.frame_interval, "Seconds between frames")->capture_default_str();

  AteArgs ate_args;
  auto* ate_cmd = app.add_subcommand("eval-ate", "Absolute trajectory error after rigid alignment");
  ate_cmd->add_option("--estimate", ate_args.estimate, "Estimated trajectory")->required()->check(CLI::ExistingFile);
  ate_cmd->add_option("--truth", ate_args.truth, "Ground-truth trajectory")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*reg_cmd) return run_register(reg);
    if (*bench_cmd) return run_bench(bench);
    if (*ov_cmd) return run_overlap(ov);
    if (*pipe_cmd) return run_pipeline_cmd(pipe);
    if (*syn_cmd) return run_synth(syn);
    if (*ate_cmd) return run_eval_ate(ate_args);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return is_numerical(e.code()) ? kExitNumerical : kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
