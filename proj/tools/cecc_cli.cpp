// cecc: run, sweep, analyze and plot.

#include "cecc/runner.hpp"
#include "cecc/scenario.hpp"
#include "cecc/svg_plot.hpp"
#include "cecc/vr_traffic.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

template <class F>
int runtime_phase(F&& body) {
  try {
    return body();
  } catch (const cecc::scenario::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << '\n';
    return kExitRuntime;
  }
}

// Anything thrown while reading or validating inputs is a config error.
template <class F>
auto config_phase(F&& body) -> std::optional<decltype(body())> {
  try {
    return body();
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return std::nullopt;
  }
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw cecc::scenario::ConfigError("--in", "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void print_summary(const cecc::runner::RunSummary& s) {
  std::cout << "digest " << s.digest << "  seed " << s.seed << "  satisfaction " << s.satisfaction_rate << " (excl. slow start "
            << s.satisfaction_rate_excluding_slow_start << ")  max_bin_bytes " << s.max_bin_bytes << "  median_p9999_us "
            << s.median_p9999_delay_us << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CECC edge congestion control simulator"};
  app.require_subcommand(1);

  std::string config = "reference", out_dir;
  std::optional<std::uint64_t> seed;
  auto* run = app.add_subcommand("run", "Run one scenario and write its metric files");
  run->add_option("--config", config, "Scenario JSON file or 'reference'")->required();
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_option("--seed", seed, "Override the scenario seed");

  std::string flows_arg = "2..7", cc_arg = "cecc,cubic,bbr";
  auto* sweep = app.add_subcommand("sweep", "Run the flow-count x CCA cross product");
  sweep->add_option("--config", config, "Base scenario JSON file or 'reference'")->required();
  sweep->add_option("--flows", flows_arg, "Flow counts, 'lo..hi' or comma list");
  sweep->add_option("--cc", cc_arg, "Comma list of cecc, cubic, bbr, udp");
  sweep->add_option("--out", out_dir, "Output directory")->required();
  sweep->add_option("--seed", seed, "Override the base seed");

  auto* analyze = app.add_subcommand("analyze", "Analytical tools");
  analyze->require_subcommand(1);
  int n_flows = 2, horizon = 1;
  double sigma_us = 1000.0, window_us = 1000.0;
  std::int64_t trials = 1'000'000;
  std::uint64_t mc_seed = 1;
  std::string analyze_out;
  auto* coll = analyze->add_subcommand("collisions", "Frame collision probability, closed form and Monte Carlo");
  coll->add_option("--n", n_flows, "Number of flows")->check(CLI::PositiveNumber);
  coll->add_option("--sigma-us", sigma_us, "Frame interval jitter sigma (us)");
  coll->add_option("--horizon", horizon, "Frames elapsed (T)")->check(CLI::PositiveNumber);
  coll->add_option("--trials", trials, "Monte Carlo trials");
  coll->add_option("--window-us", window_us, "Collision window (us)");
  coll->add_option("--seed", mc_seed, "Monte Carlo seed");
  coll->add_option("--out", analyze_out, "Write CSV here instead of stdout");

  std::string plot_kind, plot_in, plot_out;
  auto* plot = app.add_subcommand("plot", "Render a CSV as SVG");
  plot->add_option("--kind", plot_kind, "box, bars or cdf")->required()->check(CLI::IsMember({"box", "bars", "cdf"}));
  plot->add_option("--in", plot_in, "Input CSV")->required();
  plot->add_option("--out", plot_out, "Output SVG")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (*run) {
    const auto cfg = config_phase([&] {
      auto c = cecc::scenario::load(config);
      if (seed) c.seed = *seed;
      return cecc::scenario::normalize(c);
    });
    if (!cfg) return kExitConfig;
    return runtime_phase([&] {
      print_summary(cecc::runner::run_to_dir(*cfg, out_dir));
      return kExitOk;
    });
  }

  if (*sweep) {
    struct Plan {
      cecc::scenario::ScenarioConfig base;
      std::vector<int> counts;
      std::vector<std::string> ccs;
    };
    const auto plan = config_phase([&] {
      Plan p{cecc::scenario::load(config), cecc::runner::parse_flow_counts(flows_arg), cecc::runner::parse_cc_labels(cc_arg)};
      if (seed) p.base.seed = *seed;
      for (const auto& cc : p.ccs)
        for (int n : p.counts) (void)cecc::runner::sweep_cell_config(p.base, cc, n);
      return p;
    });
    if (!plan) return kExitConfig;
    return runtime_phase([&] {
      const auto cells = cecc::runner::sweep(plan->base, plan->counts, plan->ccs, out_dir);
      int failed = 0;
      for (const auto& c : cells) {
        std::cout << c.cc << " x" << c.flows << ": ";
        if (c.summary) {
          print_summary(*c.summary);
        } else {
          std::cout << "FAILED " << c.error << '\n';
          ++failed;
        }
      }
      return failed ? kExitRuntime : kExitOk;
    });
  }

  if (*coll) {
    const auto model = config_phase([&] {
      cecc::vr::CollisionModel m;
      m.n_flows = n_flows;
      m.sigma_us = sigma_us;
      m.horizon_frames = horizon;
      m.window_us = window_us;
      if (m.n_flows < 2) throw std::invalid_argument("--n must be >= 2");
      if (!(m.sigma_us > 0.0)) throw std::invalid_argument("--sigma-us must be > 0");
      if (trials < 1000) throw std::invalid_argument("--trials must be >= 1000");
      return m;
    });
    if (!model) return kExitConfig;
    return runtime_phase([&] {
      const auto est = cecc::vr::collision_probability_mc(*model, trials, mc_seed);
      std::ostringstream os;
      os.precision(10);
      os << "n_flows,sigma_us,horizon_frames,closed_form,mc_estimate,mc_stderr\n";
      os << n_flows << ',' << sigma_us << ',' << horizon << ',';
      if (n_flows == 2) os << cecc::vr::collision_probability_closed_form(sigma_us, horizon, window_us);
      os << ',' << est.probability << ',' << est.stderr_ << '\n';
      if (analyze_out.empty()) {
        std::cout << os.str();
      } else {
        std::ofstream f(analyze_out);
        if (!(f << os.str())) throw std::runtime_error("cannot write '" + analyze_out + "'");
      }
      return kExitOk;
    });
  }

  if (*plot) {
    const auto svg = config_phase([&] { return cecc::plot::render(slurp(plot_in), cecc::plot::parse_kind(plot_kind)); });
    if (!svg) return kExitConfig;
    return runtime_phase([&] {
      std::ofstream f(plot_out, std::ios::binary);
      if (!(f << *svg)) throw std::runtime_error("cannot write '" + plot_out + "'");
      return kExitOk;
    });
  }
  return kExitConfig;
}
