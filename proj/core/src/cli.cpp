#include "rcnet/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include "rcnet/approximator.hpp"
#include "rcnet/bit_extract.hpp"
#include "rcnet/errors.hpp"
#include "rcnet/floor_net.hpp"
#include "rcnet/merge.hpp"
#include "rcnet/serialize.hpp"
#include "rcnet/target.hpp"
#include "rcnet/train.hpp"
#include "rcnet/verify.hpp"

namespace rcnet {
namespace {

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

void print_shape(const char* tag, const RCNet& net) {
  std::cout << tag << " d_in=" << net.d_in() << " d_block=" << net.d_block()
            << " d_out=" << net.d_out() << " width=" << net.width()
            << " depth=" << net.depth() << " reps=" << net.reps << "\n";
}

Vec to_vec(const std::vector<double>& v) {
  Vec x(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) x(static_cast<Eigen::Index>(i)) = v[i];
  return x;
}

double meta_number(const NetMeta& meta, const std::string& key, double fallback) {
  const auto it = meta.numbers.find(key);
  return it == meta.numbers.end() ? fallback : it->second;
}

struct FloorArgs {
  int n = 1;
  int m = -1;
  double delta = 0.5;
  std::string out;
  double probe = std::numeric_limits<double>::quiet_NaN();
};

struct PointFitArgs {
  std::vector<double> values;
  double epsilon = 0.0;
  int m = 0;
  std::string out;
  int probe = -1;
};

struct MergeArgs {
  std::string first, second, out;
  double bound = 1.0;
};

struct ConstructArgs {
  std::string target;
  std::string mode = "gap";
  int reps = 1;
  int dim = 0;  // 0 = infer from the target description
  double p = 2.0;
  std::string out;
};

struct EvalArgs {
  std::string net;
  std::vector<double> x;
};

struct VerifyArgs {
  std::string net;
  std::string target;  // optional override of the stored description
  int grid = -1;       // -1 = dimension default
  std::int64_t mc = 100000;
  double p = 2.0;
  std::uint64_t seed = 0x5EED;
};

struct TrainArgs {
  std::string task;
  int n = -1;
  std::vector<int> reps;
  int trials = -1;
  int epochs = -1;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string metrics;
};

int infer_dim(const std::string& spec) {
  if (spec.rfind("trig2d", 0) == 0) return 2;
  return 1;
}

int run_floor(const FloorArgs& a) {
  FloorNetSpec spec;
  spec.n = a.n;
  spec.m = a.m < 0 ? a.n : a.m;
  spec.delta = a.delta;
  const RCNet net = build_floor_rcnet(spec);
  NetMeta meta;
  meta.strings["kind"] = "floor";
  meta.numbers["n"] = spec.n;
  meta.numbers["m"] = spec.m;
  meta.numbers["delta"] = spec.delta;
  save_rcnet(net, a.out, &meta);
  print_shape("floor", net);
  std::cout << "saved " << a.out << "\n";
  if (!std::isnan(a.probe)) {
    Vec x(1);
    x(0) = a.probe;
    std::cout << "value(" << fmt(a.probe) << ") = " << fmt(eval_rcnet_scalar(net, x))
              << "\n";
  }
  return 0;
}

int run_pointfit(const PointFitArgs& a) {
  PointFitSpec spec;
  spec.values = a.values;
  spec.epsilon = a.epsilon;
  spec.m = a.m;
  const RCNet net = build_point_fit_rcnet(spec, kResidualScale);
  NetMeta meta;
  meta.strings["kind"] = "pointfit";
  meta.numbers["n"] = static_cast<double>(a.values.size());
  meta.numbers["epsilon"] = a.epsilon;
  meta.numbers["m"] = spec.m;
  save_rcnet(net, a.out, &meta);
  print_shape("pointfit", net);
  std::cout << "saved " << a.out << "\n";
  if (a.probe >= 0) {
    Vec x(1);
    x(0) = a.probe;
    std::cout << "value(" << a.probe << ") = " << fmt(eval_rcnet_scalar(net, x))
              << "\n";
  }
  return 0;
}

int run_merge(const MergeArgs& a) {
  const RCNet first = load_rcnet(a.first);
  const RCNet second = load_rcnet(a.second);
  if (first.d_out() != second.d_in())
    throw ValidationError("output dimension of the first net must match the input of the second");
  const MergedNet merged = merge_with_affines(
      first.pre, first.block, first.reps, compose(second.pre, first.post),
      second.block, second.reps, second.post, a.bound);
  NetMeta meta;
  meta.strings["kind"] = "merged";
  meta.numbers["bound_M"] = merged.cert.bound_M;
  meta.numbers["state_sup"] = merged.cert.state_sup;
  meta.numbers["domain"] = a.bound;
  save_rcnet(merged.net, a.out, &meta);
  print_shape("merged", merged.net);
  std::cout << "selector_M=" << fmt(merged.cert.bound_M)
            << " state_sup=" << fmt(merged.cert.state_sup) << "\n";
  std::cout << "saved " << a.out << "\n";
  return 0;
}

int run_construct(const ConstructArgs& a) {
  const int d = a.dim > 0 ? a.dim : infer_dim(a.target);
  const TargetFunction target = parse_target_spec(a.target, d);
  RCNet net;
  NetMeta meta;
  meta.strings["kind"] = "approximator";
  meta.strings["mode"] = a.mode;
  meta.strings["target"] = a.target;
  meta.numbers["dim"] = d;
  meta.numbers["r"] = a.reps;
  if (a.mode == "gap") {
    GapNet gap = build_gap_rcnet(target, a.reps);
    meta.numbers["bound"] = gap.report.off_trifling_bound;
    meta.numbers["K"] = gap.report.K;
    meta.numbers["delta"] = gap.report.delta;
    net = std::move(gap.net);
  } else if (a.mode == "lp") {
    LpNet lp = build_lp_rcnet(target, a.reps, a.p);
    meta.numbers["bound"] = lp.bound_lp;
    meta.numbers["K"] = lp.gap.K;
    meta.numbers["delta"] = lp.gap.delta;
    meta.numbers["p"] = lp.p;
    meta.numbers["clip_bound"] = lp.clip_bound;
    net = std::move(lp.net);
  } else if (a.mode == "linf") {
    LinfNet li = build_linf_rcnet(target, a.reps);
    meta.numbers["bound"] = li.bound_sup;
    meta.numbers["K"] = li.gap.K;
    meta.numbers["delta"] = li.gap.delta;
    meta.numbers["probe_offset"] = li.probe_offset;
    net = std::move(li.net);
  } else {
    throw ValidationError("mode must be gap, lp, or linf");
  }
  save_rcnet(net, a.out, &meta);
  print_shape(a.mode.c_str(), net);
  std::cout << "target=" << a.target << " K=" << fmt(meta_number(meta, "K", 0))
            << " bound=" << fmt(meta_number(meta, "bound", 0)) << "\n";
  std::cout << "saved " << a.out << "\n";
  return 0;
}

int run_eval(const EvalArgs& a) {
  const RCNet net = load_rcnet(a.net);
  if (static_cast<int>(a.x.size()) != net.d_in())
    throw ValidationError("--x must list exactly d_in coordinates");
  const Vec y = eval_rcnet(net, to_vec(a.x));
  for (Eigen::Index i = 0; i < y.size(); ++i)
    std::cout << (i ? "," : "") << fmt(y(i));
  std::cout << "\n";
  return 0;
}

int run_verify(const VerifyArgs& a) {
  NetMeta meta;
  const RCNet net = load_rcnet(a.net, &meta);
  std::string target_spec = a.target;
  if (target_spec.empty()) {
    const auto it = meta.strings.find("target");
    if (it == meta.strings.end())
      throw ValidationError("net has no stored target; pass --target");
    target_spec = it->second;
  }
  const TargetFunction target = parse_target_spec(target_spec, net.d_in());

  VerifySpec spec;
  spec.grid_per_dim = a.grid > 0 ? a.grid : default_grid_per_dim(net.d_in());
  spec.mc_samples = a.mc;
  spec.p = a.p;
  spec.seed = a.seed;
  spec.K = static_cast<int>(meta_number(meta, "K", 0));
  spec.delta = meta_number(meta, "delta", 0.0);
  const ErrorReport report = measure_errors(net, target, spec);

  std::cout << "target " << target_spec << "\n"
            << "grid_points " << report.grid_points << "\n"
            << "sup_all " << fmt(report.sup_all) << "\n"
            << "grid_points_off " << report.grid_points_off << "\n"
            << "sup_off " << fmt(report.sup_off) << "\n"
            << "mc_samples " << report.mc_samples << "\n"
            << "mc_lp " << fmt(report.mc_lp) << "\n"
            << "mc_se " << fmt(report.mc_se) << "\n";

  const auto bound_it = meta.numbers.find("bound");
  if (bound_it != meta.numbers.end()) {
    const double bound = bound_it->second;
    const auto mode_it = meta.strings.find("mode");
    const std::string mode = mode_it == meta.strings.end() ? "gap" : mode_it->second;
    double measured = report.sup_off;
    if (mode == "linf") measured = report.sup_all;
    if (mode == "lp") measured = report.mc_lp - 3.0 * report.mc_se;
    std::cout << "mode " << mode << "\n"
              << "bound " << fmt(bound) << "\n";
    const bool ok = measured <= bound;
    std::cout << "within_bound " << (ok ? "yes" : "no") << "\n";
    if (!ok)
      throw NumericError("measured error " + fmt(measured) +
                         " exceeds the certified bound " + fmt(bound));
  }
  return 0;
}

int run_train(const TrainArgs& a) {
  const bool spiral = a.task == "spiral";
  const int n = a.n > 0 ? a.n : (spiral ? 30 : 50);
  TrainConfig cfg = spiral ? spiral_defaults(n) : trig_defaults(n);
  if (!a.reps.empty()) cfg.reps = a.reps;
  if (a.trials > 0) cfg.trials = a.trials;
  if (a.epochs > 0) {
    cfg.epochs = a.epochs;
    if (cfg.tail > cfg.epochs) cfg.tail = cfg.epochs;
  }
  if (a.seed_set) cfg.seed = a.seed;
  cfg.metrics_path = a.metrics;

  const ExperimentResult result = run_experiment(cfg);
  const char* metric_name = spiral ? "accuracy" : "mse";
  for (const TrainRunResult& run : result.runs) {
    std::cout << "task=" << a.task << " n=" << cfg.n << " r=" << run.r
              << " retained_" << metric_name << "=" << fmt(run.retained_mean)
              << " trials=[";
    for (std::size_t i = 0; i < run.trial_scores.size(); ++i)
      std::cout << (i ? "," : "") << fmt(run.trial_scores[i]);
    std::cout << "]\n";
  }
  bool monotone = true;
  for (std::size_t i = 1; i < result.runs.size(); ++i) {
    const double prev = result.runs[i - 1].retained_mean;
    const double cur = result.runs[i].retained_mean;
    if (spiral ? (cur <= prev) : (cur >= prev)) monotone = false;
  }
  if (result.runs.size() > 1)
    std::cout << "trend " << (monotone ? (spiral ? "increasing" : "decreasing") : "mixed")
              << "\n";
  return 0;
}

}  // namespace

int dispatch(int argc, const char* const* argv) {
  CLI::App app{"repeated-composition ReLU network toolkit"};
  app.set_config("--config", "", "read options from a TOML file");
  bool show_config = false;
  app.add_flag("--show-config", show_config,
               "print the effective configuration and exit");
  app.require_subcommand(0, 1);

  FloorArgs fl;
  auto* floor_cmd =
      app.add_subcommand("floor", "build a net computing floor(x) on plateaus of [0, n]");
  floor_cmd->add_option("--n", fl.n, "number of unit plateaus (domain [0, n])")
      ->required()
      ->check(CLI::PositiveNumber);
  floor_cmd->add_option("--m", fl.m, "block repetitions, at least n (default n)");
  floor_cmd->add_option("--delta", fl.delta, "ramp width between plateaus")
      ->capture_default_str();
  floor_cmd->add_option("--out", fl.out, "output net file (JSON)")->required();
  floor_cmd->add_option("--probe", fl.probe, "also print the net value at this x");

  PointFitArgs pf;
  auto* pointfit_cmd = app.add_subcommand(
      "pointfit", "build a net hitting given values at x = 0, 1, ..., n-1");
  pointfit_cmd->add_option("--values", pf.values, "comma-separated nonnegative values")
      ->required()
      ->delimiter(',');
  pointfit_cmd->add_option("--epsilon", pf.epsilon, "quantization step (0 = constant)")
      ->required();
  pointfit_cmd->add_option("--m", pf.m, "block repetitions (default: one per value)");
  pointfit_cmd->add_option("--out", pf.out, "output net file (JSON)")->required();
  pointfit_cmd->add_option("--probe", pf.probe, "also print the net value at this index");

  MergeArgs mg;
  auto* merge_cmd = app.add_subcommand(
      "merge", "fuse two saved nets into one shared-block net computing second(first(x))");
  merge_cmd->add_option("--first", mg.first, "net applied first")->required();
  merge_cmd->add_option("--second", mg.second, "net applied second")->required();
  merge_cmd->add_option("--bound", mg.bound, "certify over inputs in [-bound, bound]^d")
      ->capture_default_str();
  merge_cmd->add_option("--out", mg.out, "output net file (JSON)")->required();

  ConstructArgs ct;
  auto* construct_cmd =
      app.add_subcommand("construct", "build an approximator net for a target function");
  construct_cmd
      ->add_option("--target", ct.target,
                   "abs1 | sinpi | trig2d | const:<value> | csv:<path>")
      ->required();
  construct_cmd->add_option("--mode", ct.mode, "gap | lp | linf")
      ->capture_default_str()
      ->check(CLI::IsMember({"gap", "lp", "linf"}));
  construct_cmd->add_option("--reps", ct.reps, "repetition budget r")
      ->required()
      ->check(CLI::PositiveNumber);
  construct_cmd->add_option("--dim", ct.dim, "input dimension (default from target)");
  construct_cmd->add_option("--p", ct.p, "L^p exponent for --mode lp")
      ->capture_default_str();
  construct_cmd->add_option("--out", ct.out, "output net file (JSON)")->required();

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a saved net at one point");
  eval_cmd->add_option("--net", ev.net, "net file (JSON)")->required();
  eval_cmd->add_option("--x", ev.x, "comma-separated input coordinates")
      ->required()
      ->delimiter(',');

  VerifyArgs vf;
  auto* verify_cmd = app.add_subcommand(
      "verify", "measure a saved net's error against its target and check the bound");
  verify_cmd->add_option("--net", vf.net, "net file (JSON)")->required();
  verify_cmd->add_option("--target", vf.target, "override the stored target description");
  verify_cmd->add_option("--grid", vf.grid, "grid points per axis (default by dimension)");
  verify_cmd->add_option("--mc", vf.mc, "Monte Carlo samples (0 = skip)")
      ->capture_default_str();
  verify_cmd->add_option("--p", vf.p, "L^p exponent for the Monte Carlo estimate")
      ->capture_default_str();
  verify_cmd->add_option("--seed", vf.seed, "Monte Carlo seed")
      ->capture_default_str();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand(
      "train", "train parameter-shared models over several rep counts");
  train_cmd->add_option("--task", tr.task, "trig | spiral")
      ->required()
      ->check(CLI::IsMember({"trig", "spiral"}));
  train_cmd->add_option("--n", tr.n, "hidden width (default 50 trig / 30 spiral)");
  train_cmd->add_option("--reps", tr.reps, "comma-separated rep counts (default 1,2,3)")
      ->delimiter(',');
  train_cmd->add_option("--trials", tr.trials, "trials per rep count (default 6)");
  train_cmd->add_option("--epochs", tr.epochs, "training epochs (default per task)");
  train_cmd->add_option("--seed", tr.seed, "experiment seed")
      ->each([&tr](const std::string&) { tr.seed_set = true; });
  train_cmd->add_option("--metrics", tr.metrics, "per-epoch CSV output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (show_config) {
      std::cout << app.config_to_str(true, true);
      return 0;
    }
    if (floor_cmd->parsed()) return run_floor(fl);
    if (pointfit_cmd->parsed()) return run_pointfit(pf);
    if (merge_cmd->parsed()) return run_merge(mg);
    if (construct_cmd->parsed()) return run_construct(ct);
    if (eval_cmd->parsed()) return run_eval(ev);
    if (verify_cmd->parsed()) return run_verify(vf);
    if (train_cmd->parsed()) return run_train(tr);
    std::cout << app.help();
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace rcnet
