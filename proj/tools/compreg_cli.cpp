#include "compreg/config.hpp"
#include "compreg/harness.hpp"
#include "compreg/report.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

using namespace compreg;
namespace fs = std::filesystem;

namespace {

struct Overrides {
  std::string config;
  std::string topology, algorithm, schedule, out;
  std::optional<std::uint64_t> seed;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "experiment config file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--topology", o.topology, "complete|ring|star|path|file:<path>");
  cmd->add_option("--algorithm", o.algorithm, "ocgd|congd|dinoco");
  cmd->add_option("--schedule", o.schedule, "step schedule name");
}

ExperimentConfig load(const Overrides& o) {
  ExperimentConfig c = load_config(o.config);
  try {
    if (!o.topology.empty()) c.topology = o.topology;
    if (!o.algorithm.empty()) c.algorithm = algorithm_from_string(o.algorithm);
    if (!o.schedule.empty()) c.schedule = o.schedule;
    if (o.seed) c.seed = *o.seed;
    if (!o.out.empty()) c.output = o.out;
    c.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return c;
}

int cmd_run(const Overrides& o) {
  const auto c = load(o);
  const fs::path dir = c.output;
  if (c.mode == "dsgd") {
    const auto d = run_dsgd(c, RunOptions{true, false});
    fs::create_directories(dir);
    open_output(dir / "config.txt") << serialize_config(c);
    if (!d.runs.empty()) {
      auto out = open_output(dir / "trace.csv");
      write_trace(out, d.runs.front().run.rows, c.loss.dimension);
    }
    const auto s = dsgd_summary(c, d);
    auto out = open_output(dir / "summary.txt");
    s.write(out);
    s.write(std::cout);
    return d.ok() ? 0 : 1;
  }
  const auto ex = run_experiment(c);
  write_experiment(ex, dir);
  run_summary(ex).write(std::cout);
  if (!ex.ok()) {
    std::cerr << "run failed: " << ex.runs.back().error << " (partial trace written)\n";
    return 1;
  }
  return 0;
}

int cmd_sweep(const Overrides& o, const std::string& klist) {
  auto c = load(o);
  std::vector<std::size_t> ks = klist.empty() ? c.k_sweep : detail::parse_list("--k", klist);
  if (ks.size() < 4) throw ConfigError("a sweep needs at least 4 K values");
  if (c.mode == "dsgd") throw ConfigError("sweep runs online experiments only");
  const auto sw = k_sweep(c, ks);
  const fs::path dir = c.output;
  fs::create_directories(dir);
  open_output(dir / "config.txt") << serialize_config(c);
  {
    auto out = open_output(dir / "sweep.csv");
    write_sweep_csv(out, sw);
  }
  const auto s = sweep_summary(c, sw);
  {
    auto out = open_output(dir / "summary.txt");
    s.write(out);
  }
  if (sw.error.empty()) {
    std::ostringstream csv;
    write_sweep_csv(csv, sw);
    std::istringstream in(csv.str());
    open_output(dir / "regret_vs_K.svg") << plot_csv(read_csv(in));
  }
  s.write(std::cout);
  return sw.error.empty() ? 0 : 1;
}

int cmd_verify(const Overrides& o) {
  const auto c = load(o);
  bool all = true;
  for (const auto& r : verify_config(c)) {
    std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
    all = all && r.pass;
  }
  return all ? 0 : 1;
}

int cmd_plot(const std::string& trace, const std::string& svg) {
  std::ifstream in(trace, std::ios::binary);
  if (!in) throw ReportError("cannot open '" + trace + "'");
  const auto svg_text = plot_csv(read_csv(in));
  open_output(svg) << svg_text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Composite-regret experiments for decentralized online learners"};
  app.require_subcommand(1);

  Overrides run_o, sweep_o, verify_o;
  std::uint64_t seed = 0;
  auto* run = app.add_subcommand("run", "run one experiment (seed ensemble) and write trace and summary");
  add_overrides(run, run_o);
  run->add_option("--seed", seed, "master seed");
  run->add_option("--out", run_o.out, "output directory");

  std::string klist;
  auto* sweep = app.add_subcommand("sweep", "independent runs over a list of horizons and slope fits");
  add_overrides(sweep, sweep_o);
  sweep->add_option("--k", klist, "comma-separated horizons");
  sweep->add_option("--out", sweep_o.out, "output directory");

  auto* verify = app.add_subcommand("verify", "run the invariant suite for a config");
  add_overrides(verify, verify_o);

  std::string trace, svg;
  auto* plot = app.add_subcommand("plot", "render a trace or sweep CSV as SVG");
  plot->add_option("--trace", trace, "trace or sweep CSV")->required();
  plot->add_option("--out", svg, "output SVG path")->required();

  CLI11_PARSE(app, argc, argv);
  if (run->count("--seed")) run_o.seed = seed;

  try {
    if (*run) return cmd_run(run_o);
    if (*sweep) return cmd_sweep(sweep_o, klist);
    if (*verify) return cmd_verify(verify_o);
    if (*plot) return cmd_plot(trace, svg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
