// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "spikegrad/cli.hpp"
#include "spikegrad/gradcheck.hpp"
#include "spikegrad/gradients.hpp"
#include "spikegrad/io.hpp"
#include "spikegrad/train.hpp"

using namespace spikegrad;
namespace fs = std::filesystem;

namespace {

const fs::path kData = SPIKEGRAD_TEST_DATA;
const fs::path kTmp = SPIKEGRAD_TEST_TMP;

// Lower of the two final test accuracies of the first verified MNIST run,
// rounded down to a whole percent.
constexpr double kMnistBaseline = 0.77;

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Outcome oracle_suite(std::vector<OracleResult>& results) {
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    results.push_back(run_oracle_instance(seed, 0.3));
    worst = std::max(worst, results.back().max_rel_err);
  }
  const double secs = seconds_since(start);
  return {worst <= 1e-5 && secs < 30.0,
          "max rel err " + fmt("%.3g", worst) + " (<= 1e-5), " + fmt("%.1f", secs) + " s (< 30 s)"};
}

Outcome reset_necessity(const std::vector<OracleResult>& results) {
  double worst = 0.0;
  double least = std::numeric_limits<double>::infinity();
  std::size_t active = 0;
  for (const auto& r : results) {
    if (!r.reset_active) continue;
    ++active;
    worst = std::max(worst, r.max_rel_err_no_reset);
    least = std::min(least, r.max_rel_err_no_reset);
  }
  return {active > 0 && worst >= 1e-2,
          std::to_string(active) + " qualifying instances, max rel err without reset term " +
              fmt("%.3g", worst) + " (>= 1e-2), per-instance min " + fmt("%.3g", least)};
}

Outcome toy_convergence() {
  const auto start = std::chrono::steady_clock::now();
  TrainConfig cfg;
  std::vector<double> at;
  std::size_t converged = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    cfg.seed = seed;
    const TrialResult r = run_toy_trial(cfg);
    if (r.converged_at) ++converged;
    at.push_back(r.converged_at ? static_cast<double>(*r.converged_at)
                                : std::numeric_limits<double>::infinity());
  }
  std::sort(at.begin(), at.end());
  const double median = (at[24] + at[25]) / 2.0;
  const double frac = static_cast<double>(converged) / 50.0;
  const double secs = seconds_since(start);
  const std::string median_text = std::isinf(median) ? "never" : fmt("%.1f", median);
  return {median <= 60.0 && frac >= 0.8 && secs < 120.0,
          "median convergence iteration " + median_text + " (<= 60), converged " +
              std::to_string(converged) + "/50 (>= 80%), " + fmt("%.1f", secs) + " s (< 120 s)"};
}

Outcome lr_claim() {
  TrainConfig base;
  std::vector<std::uint64_t> seeds(20);
  for (std::size_t k = 0; k < seeds.size(); ++k) seeds[k] = k;
  const std::vector<double> lrs{0.001, 0.005, 0.01, 0.02};
  const SweepResult sweep = lr_sweep(base, lrs, seeds);
  bool pass = true;
  std::string detail;
  for (double lr : lrs) {
    const auto& on = sweep.cell(lr, true).curves;
    const auto& off = sweep.cell(lr, false).curves;
    const double m_on = on.mean.back(), m_off = off.mean.back();
    const double pooled = std::sqrt((on.std.back() * on.std.back() + off.std.back() * off.std.back()) / 2.0);
    bool ok;
    std::string rule;
    if (lr >= 0.01) {
      ok = m_on <= m_off;
      rule = "on <= off";
    } else {
      ok = std::abs(m_on - m_off) < pooled;
      rule = "|on-off| < pooled sd " + fmt("%.4f", pooled);
    }
    pass = pass && ok;
    detail += (detail.empty() ? "" : "; ") + fmt("lr %g: ", lr) + fmt("on %.4f ", m_on) +
              fmt("off %.4f ", m_off) + "(" + rule + (ok ? ")" : ", violated)");
  }
  return {pass, detail};
}

Outcome mnist_null() {
  const auto start = std::chrono::steady_clock::now();
  const LabeledImages all =
      load_idx(kData / "mnist-subset-images-idx3-ubyte", kData / "mnist-subset-labels-idx1-ubyte");
  ClassifierConfig cfg;
  const auto runs = train_classifier(all.slice(0, 1000), all.slice(1000, 1000), cfg);
  const double on = runs[0].epochs.back().test_acc;
  const double off = runs[1].epochs.back().test_acc;
  const double secs = seconds_since(start);
  const bool pass = std::abs(on - off) <= 0.01 && on > kMnistBaseline && off > kMnistBaseline &&
                    secs < 900.0;
  return {pass, fmt("test acc on %.3f", on) + fmt(" off %.3f", off) +
                    fmt(" (|diff| <= 0.01, both > baseline %.2f), ", kMnistBaseline) +
                    fmt("%.0f s (< 900 s)", secs)};
}

Outcome forward_fixtures() {
  Network net({DenseLifLayer(Matrix(1, 1, 3.0), {})});
  const SpikeTrain input(1, 4, std::vector<std::uint8_t>{1, 0, 0, 0});
  const auto traces = simulate_network(net, input);
  const bool u_ok = traces[0].u.values() == std::vector<double>{0.0, 1.5, 0.75, 1.0};
  const bool s_ok = traces[0].s.bits() == std::vector<std::uint8_t>{0, 1, 0, 0};
  const LifParams p;
  const double j1 = temporal_jacobian(1.0, 0, p, {true, 0.3});
  const double j2 = temporal_jacobian(1.0, 0, p, {false, 0.3});
  const double j3 = temporal_jacobian(1.3, 1, p, {true, 0.3});
  const bool j_ok = std::abs(j1 - 0.13889) <= 1e-4 && std::abs(j2 - 0.8333) <= 1e-4 &&
                    std::abs(j3 + 0.71002) <= 1e-4;
  return {u_ok && s_ok && j_ok, std::string("U ") + (u_ok ? "exact" : "mismatch") + ", S " +
                                    (s_ok ? "exact" : "mismatch") + fmt(", jacobians %.5f", j1) +
                                    fmt(" %.5f", j2) + fmt(" %.5f", j3)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  const std::vector<std::vector<std::string>> commands{
      {"gradcheck"},
      {"toy", "--phases", "--seed", "7"},
      {"toy", "--no-reset-term", "--lr", "0.02"},
      {"sweep"},
      {"mnist", "--mnist-images", (kData / "mnist-subset-images-idx3-ubyte").string(),
       "--mnist-labels", (kData / "mnist-subset-labels-idx1-ubyte").string(), "--subset", "100",
       "--epochs", "2"},
  };
  std::size_t files = 0;
  std::string detail;
  bool pass = true;
  for (std::size_t k = 0; k < commands.size(); ++k) {
    const fs::path first = kTmp / ("run_" + std::to_string(k));
    const fs::path second = kTmp / ("replay_" + std::to_string(k));
    fs::remove_all(first);
    fs::remove_all(second);
    auto args = commands[k];
    args.insert(args.end(), {"--out", first.string()});
    std::ostringstream out, err;
    const int a = run_cli(args, out, err);
    const int b = run_cli({"replay", (first / "manifest.txt").string(), "--out", second.string()}, out, err);
    if (a != kExitOk || b != kExitOk) {
      pass = false;
      detail += " " + commands[k][0] + " exited " + std::to_string(a) + "/" + std::to_string(b);
      continue;
    }
    for (const auto& entry : fs::directory_iterator(first)) {
      if (entry.path().extension() != ".csv") continue;
      ++files;
      if (slurp(entry.path()) != slurp(second / entry.path().filename())) {
        pass = false;
        detail += " " + entry.path().filename().string() + " differs";
      }
    }
  }
  return {pass && files > 0,
          std::to_string(commands.size()) + " commands, " + std::to_string(files) +
              " CSV files byte-identical after replay" + (detail.empty() ? "" : ";" + detail)};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const Outcome& o) {
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  };
  std::vector<OracleResult> oracle;
  report(1, "gradient oracle suite", oracle_suite(oracle));
  report(2, "reset-term necessity", reset_necessity(oracle));
  report(3, "toy convergence", toy_convergence());
  report(4, "learning-rate claim", lr_claim());
  report(5, "MNIST subset null result", mnist_null());
  report(6, "forward fixtures", forward_fixtures());
  report(7, "determinism", determinism());
  std::printf("%d of 7 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
