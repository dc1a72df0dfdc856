#include "spikegrad/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "spikegrad/data.hpp"
#include "spikegrad/gradcheck.hpp"
#include "spikegrad/io.hpp"
#include "spikegrad/train.hpp"

#ifndef SPIKEGRAD_VERSION
#define SPIKEGRAD_VERSION "0.0.0"
#endif

namespace spikegrad {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifestName = "manifest.txt";
constexpr int kCsvSchemaVersion = 1;

/// Usage problems found after parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const char* variant_name(bool with_reset_term) {
  return with_reset_term ? "reset_on" : "reset_off";
}

std::string join(const std::vector<std::string>& parts, const char* sep = ",") {
  std::string out;
  for (std::size_t k = 0; k < parts.size(); ++k) out += (k ? sep : "") + parts[k];
  return out;
}

std::string join_doubles(const std::vector<double>& v) {
  std::vector<std::string> parts;
  for (double d : v) parts.push_back(format_double(d));
  return join(parts);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

// Flags shared by every experiment command.
struct CommonFlags {
  double tau_m = 6.0;
  double tau_s = 2.0;
  double theta = 1.0;
  double temp = 0.3;
  bool no_reset_term = false;
  std::string out = "out";
  bool svg = false;

  LifParams lif() const { return {tau_m, tau_s, theta, temp}; }

  void add_to(CLI::App& cmd) {
    cmd.add_option("--tau-m", tau_m, "Membrane time constant (steps)")->capture_default_str();
    cmd.add_option("--tau-s", tau_s, "Synaptic time constant (steps)")->capture_default_str();
    cmd.add_option("--theta", theta, "Firing threshold")->capture_default_str();
    cmd.add_option("--temp", temp, "Surrogate sigmoid temperature")->capture_default_str();
    cmd.add_flag("--no-reset-term", no_reset_term,
                 "Drop the reset term from the temporal Jacobian");
    cmd.add_option("--out", out, "Output directory")
        ->envname("SPIKEGRAD_OUT")
        ->capture_default_str();
    cmd.add_flag("--svg", svg, "Also write SVG plots");
  }

  void record(KeyValues& kv) const {
    kv.emplace_back("flag.tau-m", format_double(tau_m));
    kv.emplace_back("flag.tau-s", format_double(tau_s));
    kv.emplace_back("flag.theta", format_double(theta));
    kv.emplace_back("flag.temp", format_double(temp));
    kv.emplace_back("flag.no-reset-term", no_reset_term ? "true" : "false");
    kv.emplace_back("flag.svg", svg ? "true" : "false");
  }
};

// Tracks artifacts and keeps the manifest current: written as "running"
// before any work, rewritten as "complete" with the artifact list after.
class RunRecorder {
 public:
  RunRecorder(std::string command, const fs::path& out_dir, KeyValues config)
      : command_(std::move(command)), dir_(out_dir), config_(std::move(config)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + dir_.string());
    write("running");
  }

  fs::path file(const std::string& name) {
    artifacts_.push_back(name);
    return dir_ / name;
  }

  void note(std::string key, std::string value) {
    extra_.emplace_back(std::move(key), std::move(value));
  }

  void finish() { write("complete"); }

 private:
  void write(const char* status) const {
    KeyValues kv{{"format", "spikegrad-manifest 1"},
                 {"tool_version", SPIKEGRAD_VERSION},
                 {"command", command_},
                 {"status", status},
                 {"csv_schema", std::to_string(kCsvSchemaVersion)},
                 {"rng", Rng::kAlgorithm}};
    kv.insert(kv.end(), config_.begin(), config_.end());
    kv.insert(kv.end(), extra_.begin(), extra_.end());
    kv.emplace_back("artifact", kManifestName);
    for (const auto& a : artifacts_) kv.emplace_back("artifact", a);
    write_key_values(dir_ / kManifestName, kv);
  }

  std::string command_;
  fs::path dir_;
  KeyValues config_;
  KeyValues extra_;
  std::vector<std::string> artifacts_;
};

std::vector<std::uint64_t> resolve_seeds(const std::string& text, std::uint64_t base) {
  std::vector<std::uint64_t> seeds;
  if (text.find(',') != std::string::npos) {
    for (const auto& s : split(text, ',')) seeds.push_back(std::stoull(s));
  } else {
    const auto n = std::stoull(text);
    for (std::uint64_t k = 0; k < n; ++k) seeds.push_back(base + k);
  }
  if (seeds.empty()) throw UsageError("--seeds: need at least one seed");
  return seeds;
}

std::vector<std::string> seed_strings(const std::vector<std::uint64_t>& seeds) {
  std::vector<std::string> out;
  for (auto s : seeds) out.push_back(std::to_string(s));
  return out;
}

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::vector<double> iota_x(std::size_t n) {
  std::vector<double> x(n);
  for (std::size_t k = 0; k < n; ++k) x[k] = static_cast<double>(k);
  return x;
}

// --- gradcheck ------------------------------------------------------------

struct GradcheckFlags {
  CommonFlags common;
  std::size_t instances = 100;
  double tol = 1e-5;
  std::uint64_t seed = 0;
  double fd_step = kDefaultFdStep;
  std::string fd_precision = "binary128";
};

int cmd_gradcheck(const GradcheckFlags& f, std::ostream& out) {
  if (f.instances == 0) throw UsageError("--instances must be >= 1");
  if (!(f.tol > 0.0)) throw UsageError("--tol must be > 0");
  if (!(f.fd_step > 0.0)) throw UsageError("--fd-step must be > 0");
  const FdPrecision precision =
      f.fd_precision == "binary64" ? FdPrecision::binary64 : FdPrecision::binary128;

  KeyValues config{{"flag.instances", std::to_string(f.instances)},
                   {"flag.tol", format_double(f.tol)},
                   {"flag.seed", std::to_string(f.seed)},
                   {"flag.fd-step", format_double(f.fd_step)},
                   {"flag.fd-precision", f.fd_precision},
                   {"flag.temp", format_double(f.common.temp)}};
  RunRecorder rec("gradcheck", f.common.out, config);
  rec.note("seeds", std::to_string(f.seed) + ".." + std::to_string(f.seed + f.instances - 1));
  rec.note("rel_err_floor", format_double(kRelErrFloor));

  CsvTable table({"instance_id", "seed", "layers", "max_rel_err"});
  double suite_max = 0.0;
  double no_reset_max = 0.0;
  double no_reset_min = std::numeric_limits<double>::infinity();
  std::size_t active = 0;
  for (std::size_t k = 0; k < f.instances; ++k) {
    const auto r = run_oracle_instance(f.seed + k, f.common.temp, f.fd_step, precision);
    table.add_row({std::to_string(k), std::to_string(r.seed), std::to_string(r.layers),
                   format_double(r.max_rel_err)});
    suite_max = std::max(suite_max, r.max_rel_err);
    if (r.reset_active) {
      ++active;
      no_reset_max = std::max(no_reset_max, r.max_rel_err_no_reset);
      no_reset_min = std::min(no_reset_min, r.max_rel_err_no_reset);
    }
  }
  table.write(rec.file("gradcheck.csv"));
  rec.finish();

  out << "instances: " << f.instances << " (fd step " << format_double(f.fd_step) << ", "
      << f.fd_precision << ", rel-err floor " << format_double(kRelErrFloor) << ")\n"
      << "max relative error: " << format_double(suite_max) << " (tol "
      << format_double(f.tol) << ")\n";
  if (active > 0)
    out << "without reset term, " << active << " instances with active reset: max "
        << format_double(no_reset_max) << ", min " << format_double(no_reset_min) << "\n";
  const bool pass = suite_max <= f.tol;
  out << (pass ? "PASS" : "FAIL") << "\n";
  return pass ? kExitOk : kExitCheckFailed;
}

// --- toy ------------------------------------------------------------------

struct ToyFlags {
  CommonFlags common;
  double lr = 0.005;
  std::size_t iterations = 200;
  std::uint64_t seed = 0;
  bool phases = false;
};

TrainConfig toy_config(const CommonFlags& c, double lr, std::size_t iterations) {
  TrainConfig cfg;
  cfg.lr = lr;
  cfg.iterations = iterations;
  cfg.lif = c.lif();
  cfg.grad = {!c.no_reset_term, c.temp};
  return cfg;
}

int cmd_toy(const ToyFlags& f, std::ostream& out) {
  if (!(f.lr >= 0.0)) throw UsageError("--lr must be >= 0");
  if (f.iterations == 0) throw UsageError("--iterations must be >= 1");
  TrainConfig cfg = toy_config(f.common, f.lr, f.iterations);
  cfg.seed = f.seed;
  cfg.validate();
  const ToySetup setup;

  KeyValues config{{"flag.lr", format_double(f.lr)},
                   {"flag.iterations", std::to_string(f.iterations)},
                   {"flag.seed", std::to_string(f.seed)},
                   {"flag.phases", f.phases ? "true" : "false"}};
  f.common.record(config);
  RunRecorder rec("toy", f.common.out, config);
  rec.note("seeds", std::to_string(f.seed));
  rec.note("variants", variant_name(cfg.grad.with_reset_term));
  rec.note("weight_init", cfg.weight_init.describe());
  rec.note("toy_setup", "inputs=50 steps=100 p_input=0.1 p_target=0.05");

  const TrialResult r = run_toy_trial(cfg, setup);
  const std::string variant = variant_name(cfg.grad.with_reset_term);
  CsvTable table({"iteration", "seed", "variant", "loss"});
  for (std::size_t it = 0; it < r.losses.size(); ++it)
    table.add_row({std::to_string(it), std::to_string(f.seed), variant,
                   format_double(r.losses[it])});
  table.write(rec.file("toy.csv"));

  if (f.phases) {
    const auto& rep = r.last_report;
    CsvTable phases({"step", "phase_a", "phase_b", "phase_c", "phase_d"});
    for (std::size_t t = 0; t < rep.phase_a.cols(); ++t)
      phases.add_row({std::to_string(t), format_double(rep.phase_a(0, t)),
                      format_double(rep.phase_b(0, t)), format_double(rep.phase_c(0, t)),
                      format_double(rep.phase_d(0, t))});
    phases.write(rec.file("phases.csv"));
  }

  Checkpoint ckpt{kCheckpointVersion, config, r.final_weights};
  write_checkpoint(rec.file("toy_weights.ckpt"), ckpt);

  if (f.common.svg)
    write_line_plot(rec.file("toy.svg"), "Single-neuron loss (seed " + std::to_string(f.seed) + ")",
                    "iteration", "Van Rossum loss",
                    {{variant, iota_x(r.losses.size()), r.losses, kColors[0], false}});
  rec.finish();

  out << "final loss: " << format_double(r.losses.back()) << "\n"
      << "converged at: "
      << (r.converged_at ? std::to_string(*r.converged_at) : std::string("never")) << "\n";
  return kExitOk;
}

// --- sweep ----------------------------------------------------------------

struct SweepFlags {
  CommonFlags common;
  std::string lrs = "0.001,0.005,0.01,0.02";
  std::string seeds = "20";
  std::uint64_t seed = 0;
  std::size_t iterations = 200;
};

int cmd_sweep(const SweepFlags& f, std::ostream& out) {
  std::vector<double> lrs;
  for (const auto& s : split(f.lrs, ',')) {
    try {
      lrs.push_back(parse_double(s));
    } catch (const std::invalid_argument&) {
      throw UsageError("--lrs: bad value '" + s + "'");
    }
    if (!(lrs.back() >= 0.0)) throw UsageError("--lrs: learning rates must be >= 0");
  }
  if (lrs.empty()) throw UsageError("--lrs: need at least one learning rate");
  if (f.iterations == 0) throw UsageError("--iterations must be >= 1");
  std::vector<std::uint64_t> seeds;
  try {
    seeds = resolve_seeds(f.seeds, f.seed);
  } catch (const std::logic_error&) {
    throw UsageError("--seeds: expected a count or a comma-separated list");
  }
  TrainConfig base = toy_config(f.common, 0.0, f.iterations);
  base.validate();

  KeyValues config{{"flag.lrs", join_doubles(lrs)},
                   {"flag.seeds", f.seeds},
                   {"flag.seed", std::to_string(f.seed)},
                   {"flag.iterations", std::to_string(f.iterations)}};
  f.common.record(config);
  RunRecorder rec("sweep", f.common.out, config);
  rec.note("seeds", join(seed_strings(seeds)));
  rec.note("variants", "reset_on,reset_off");
  rec.note("weight_init", base.weight_init.describe());

  const SweepResult sweep = lr_sweep(base, lrs, seeds);
  CsvTable table({"lr", "iteration", "variant", "mean_loss", "std_loss"});
  for (const auto& cell : sweep.cells)
    for (std::size_t it = 0; it < cell.curves.mean.size(); ++it)
      table.add_row({format_double(cell.lr), std::to_string(it),
                     variant_name(cell.with_reset_term), format_double(cell.curves.mean[it]),
                     format_double(cell.curves.std[it])});
  table.write(rec.file("sweep.csv"));

  if (f.common.svg) {
    for (double lr : lrs) {
      std::vector<PlotSeries> series;
      for (bool reset : {true, false}) {
        const auto& c = sweep.cell(lr, reset).curves;
        const auto x = iota_x(c.mean.size());
        std::vector<double> lo(c.mean.size()), hi(c.mean.size());
        for (std::size_t k = 0; k < lo.size(); ++k) {
          lo[k] = c.mean[k] - c.std[k];
          hi[k] = c.mean[k] + c.std[k];
        }
        const char* color = kColors[reset ? 0 : 1];
        series.push_back({variant_name(reset), x, c.mean, color, false});
        series.push_back({"", x, lo, color, true});
        series.push_back({"", x, hi, color, true});
      }
      write_line_plot(rec.file("sweep_lr" + format_double(lr) + ".svg"),
                      "lr " + format_double(lr) + ": mean loss, +/- 1 std over " +
                          std::to_string(seeds.size()) + " seeds",
                      "iteration", "Van Rossum loss", series);
    }
  }
  rec.finish();

  for (const auto& cell : sweep.cells)
    out << "lr " << format_double(cell.lr) << " " << variant_name(cell.with_reset_term)
        << ": final mean " << format_double(cell.curves.mean.back()) << " std "
        << format_double(cell.curves.std.back()) << "\n";
  return kExitOk;
}

// --- mnist ----------------------------------------------------------------

struct MnistFlags {
  CommonFlags common;
  std::string images;
  std::string labels;
  std::size_t subset = 1000;
  std::size_t epochs = 10;
  std::size_t batch = 32;
  double lr = ClassifierConfig{}.lr;
  std::uint64_t seed = 0;
  std::size_t steps = 30;
  std::size_t hidden = 100;
};

int cmd_mnist(const MnistFlags& f, std::ostream& out) {
  if (f.subset == 0) throw UsageError("--subset must be >= 1");
  if (f.batch == 0) throw UsageError("--batch must be >= 1");
  if (!(f.lr >= 0.0)) throw UsageError("--lr must be >= 0");
  ClassifierConfig cfg;
  cfg.hidden = {f.hidden};
  cfg.n_steps = f.steps;
  cfg.epochs = f.epochs;
  cfg.batch = f.batch;
  cfg.lr = f.lr;
  cfg.lif = f.common.lif();
  cfg.seed = f.seed;
  cfg.validate();

  // Loaded before the manifest so a missing dataset leaves no output behind.
  const LabeledImages all = load_idx(f.images, f.labels);
  if (all.size() < 2 * f.subset)
    throw UsageError("--subset " + std::to_string(f.subset) + " needs " +
                     std::to_string(2 * f.subset) + " images, file has " +
                     std::to_string(all.size()));
  const LabeledImages train = all.slice(0, f.subset);
  const LabeledImages test = all.slice(f.subset, f.subset);

  KeyValues config{{"flag.mnist-images", f.images},
                   {"flag.mnist-labels", f.labels},
                   {"flag.subset", std::to_string(f.subset)},
                   {"flag.epochs", std::to_string(f.epochs)},
                   {"flag.batch", std::to_string(f.batch)},
                   {"flag.lr", format_double(f.lr)},
                   {"flag.seed", std::to_string(f.seed)},
                   {"flag.steps", std::to_string(f.steps)},
                   {"flag.hidden", std::to_string(f.hidden)}};
  f.common.record(config);
  RunRecorder rec("mnist", f.common.out, config);
  rec.note("seeds", std::to_string(f.seed));
  rec.note("variants", f.common.no_reset_term ? "reset_off" : "reset_on,reset_off");
  rec.note("weight_init", cfg.weight_init.describe());
  rec.note("encoding", "rate p_max=" + format_double(cfg.p_max) +
                           " target_period=" + std::to_string(cfg.target_period));
  rec.note("split", "train=[0," + std::to_string(f.subset) + ") test=[" +
                        std::to_string(f.subset) + "," + std::to_string(2 * f.subset) + ")");

  std::vector<ClassifierRun> runs;
  if (!f.common.no_reset_term) runs.push_back(train_classifier_variant(train, test, cfg, true));
  runs.push_back(train_classifier_variant(train, test, cfg, false));

  CsvTable table({"epoch", "seed", "variant", "train_acc", "test_acc"});
  for (const auto& run : runs)
    for (const auto& e : run.epochs)
      table.add_row({std::to_string(e.epoch), std::to_string(f.seed),
                     variant_name(run.with_reset_term), format_double(e.train_acc),
                     format_double(e.test_acc)});
  table.write(rec.file("mnist.csv"));

  for (const auto& run : runs)
    write_checkpoint(rec.file(std::string("mnist_") + variant_name(run.with_reset_term) + ".ckpt"),
                     Checkpoint{kCheckpointVersion, config, run.final_weights});

  if (f.common.svg) {
    std::vector<PlotSeries> series;
    for (std::size_t k = 0; k < runs.size(); ++k) {
      std::vector<double> x, train_acc, test_acc;
      for (const auto& e : runs[k].epochs) {
        x.push_back(static_cast<double>(e.epoch));
        train_acc.push_back(e.train_acc);
        test_acc.push_back(e.test_acc);
      }
      const std::string v = variant_name(runs[k].with_reset_term);
      series.push_back({v + " test", x, test_acc, kColors[k], false});
      series.push_back({v + " train", x, train_acc, kColors[k], true});
    }
    write_line_plot(rec.file("mnist.svg"), "MNIST subset accuracy", "epoch", "accuracy", series);
  }
  rec.finish();

  for (const auto& run : runs)
    out << variant_name(run.with_reset_term)
        << ": final test accuracy " << format_double(run.epochs.back().test_acc) << "\n";
  return kExitOk;
}

// --- replay ---------------------------------------------------------------

std::vector<std::string> replay_args(const fs::path& manifest, const std::string& out_override) {
  const KeyValues kv = read_key_values(manifest);
  std::string command;
  std::vector<std::string> args;
  for (const auto& [key, value] : kv) {
    if (key == "command") command = value;
    if (key.rfind("flag.", 0) != 0) continue;
    const std::string flag = "--" + key.substr(5);
    if (value == "true") {
      args.push_back(flag);
    } else if (value != "false") {
      args.push_back(flag);
      args.push_back(value);
    }
  }
  if (command.empty()) throw UsageError(manifest.string() + ": no command recorded");
  args.insert(args.begin(), command);
  args.push_back("--out");
  args.push_back(out_override.empty() ? manifest.parent_path().string() : out_override);
  return args;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Surrogate-gradient BPTT for leaky integrate-and-fire networks", "spikegrad"};
  app.set_version_flag("--version", SPIKEGRAD_VERSION);
  app.set_config("--config", "", "Read flags from an INI/TOML file; command-line flags win");
  app.require_subcommand(1);

  GradcheckFlags gc;
  auto* gradcheck = app.add_subcommand("gradcheck", "Check BPTT against finite differences");
  gradcheck->add_option("--instances", gc.instances, "Number of random instances")
      ->capture_default_str();
  gradcheck->add_option("--tol", gc.tol, "Maximum accepted relative error")
      ->capture_default_str();
  gradcheck->add_option("--seed", gc.seed, "Seed of the first instance")->capture_default_str();
  gradcheck->add_option("--fd-step", gc.fd_step, "Central-difference step")
      ->capture_default_str();
  gradcheck->add_option("--fd-precision", gc.fd_precision, "Loss arithmetic for differences")
      ->check(CLI::IsMember({"binary128", "binary64"}))
      ->capture_default_str();
  gc.common.add_to(*gradcheck);

  ToyFlags toy;
  auto* toy_cmd = app.add_subcommand("toy", "Single-neuron training run");
  toy_cmd->add_option("--lr", toy.lr, "Learning rate")->capture_default_str();
  toy_cmd->add_option("--iterations", toy.iterations, "SGD iterations")->capture_default_str();
  toy_cmd->add_option("--seed", toy.seed, "Data and initialization seed")->capture_default_str();
  toy_cmd->add_flag("--phases", toy.phases, "Write the gradient phases of the last iteration");
  toy.common.add_to(*toy_cmd);

  SweepFlags sw;
  auto* sweep = app.add_subcommand("sweep", "Learning-rate sweep, reset term on vs off");
  sweep->add_option("--lrs", sw.lrs, "Comma-separated learning rates")->capture_default_str();
  sweep->add_option("--seeds", sw.seeds, "Seed count, or comma-separated seed list")
      ->capture_default_str();
  sweep->add_option("--seed", sw.seed, "First seed when --seeds is a count")
      ->capture_default_str();
  sweep->add_option("--iterations", sw.iterations, "SGD iterations")->capture_default_str();
  sw.common.add_to(*sweep);

  MnistFlags mn;
  auto* mnist = app.add_subcommand("mnist", "Dense classifier on an MNIST subset");
  mnist->add_option("--mnist-images", mn.images, "IDX image file")->required();
  mnist->add_option("--mnist-labels", mn.labels, "IDX label file")->required();
  mnist->add_option("--subset", mn.subset, "Training (and test) images")->capture_default_str();
  mnist->add_option("--epochs", mn.epochs, "Training epochs")->capture_default_str();
  mnist->add_option("--batch", mn.batch, "Mini-batch size")->capture_default_str();
  mnist->add_option("--lr", mn.lr, "Learning rate")->capture_default_str();
  mnist->add_option("--seed", mn.seed, "Seed shared by both variants")->capture_default_str();
  mnist->add_option("--steps", mn.steps, "Time-steps per image")->capture_default_str();
  mnist->add_option("--hidden", mn.hidden, "Hidden layer width")->capture_default_str();
  mn.common.add_to(*mnist);

  std::string manifest_path;
  std::string replay_out;
  auto* replay = app.add_subcommand("replay", "Re-run a command from its manifest");
  replay->add_option("manifest", manifest_path, "manifest.txt of an earlier run")->required();
  replay->add_option("--out", replay_out, "Output directory (default: the manifest's)");

  std::vector<const char*> argv{"spikegrad"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gradcheck) return cmd_gradcheck(gc, out);
    if (*toy_cmd) return cmd_toy(toy, out);
    if (*sweep) return cmd_sweep(sw, out);
    if (*mnist) return cmd_mnist(mn, out);
    if (*replay) return run_cli(replay_args(manifest_path, replay_out), out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IdxError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::runtime_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitUsage;
}

}  // namespace spikegrad
