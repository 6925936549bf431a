#include "compreg/config.hpp"
#include "compreg/harness.hpp"
#include "compreg/report.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

using namespace compreg;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

constexpr double kNoBudget = std::numeric_limits<double>::infinity();

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;
  std::function<Outcome()> body;
};

std::string fmt(double v, const char* spec = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

ExperimentConfig preset(const std::string& name) {
  return load_config(std::string(COMPREG_SOURCE_DIR) + "/configs/" + name + ".cfg");
}

// Envelope tallies accumulated over every gradient-based run below.
std::map<std::string, EnvelopeTally> g_envelopes;
std::size_t g_envelope_runs = 0;

void collect(const ExperimentResult& ex) {
  for (const auto& [name, t] : ex.checks()) g_envelopes[name].merge(t);
  g_envelope_runs += ex.runs.size();
}

// DINOCO audits from the sublinearity runs, reused by the oracle criterion.
std::size_t g_audits = 0, g_audits_passed = 0;
double g_worst_slack = std::numeric_limits<double>::infinity();

Outcome mixing_validity() {
  double worst_res = 0.0, worst_psd = 0.0;
  bool symmetric = true;
  std::size_t cases = 0;
  for (auto kind : {GraphKind::complete, GraphKind::ring, GraphKind::star, GraphKind::path})
    for (std::size_t n = 2; n <= 10; ++n) {
      const auto pi = metropolis_mixing(build_graph(kind, n));
      worst_res = std::max({worst_res, pi.max_row_residual(), pi.max_column_residual()});
      symmetric = symmetric && pi.weights() == pi.weights().transpose();
      const double ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(pi.laplacian(), Eigen::EigenvaluesOnly)
                            .eigenvalues()
                            .minCoeff();
      worst_psd = std::min(worst_psd, ev);
      ++cases;
    }
  return {worst_res <= 1e-12 && symmetric && worst_psd >= -1e-12,
          std::to_string(cases) + " graphs, max residual " + fmt(worst_res) + ", symmetric " +
              (symmetric ? "yes" : "no") + ", min eig(I-Pi) " + fmt(worst_psd)};
}

Outcome ring_lambda() {
  const double l = metropolis_mixing(build_graph(GraphKind::ring, 4)).lambda();
  return {std::abs(l - 1.0 / 3.0) <= 1e-10, "lambda " + fmt(l, "%.17g")};
}

Outcome gradient_checks() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::string detail;
  bool ok = true;
  for (auto fam : {LossFamily::quadratic, LossFamily::absolute_drift, LossFamily::pseudo_sigmoid,
                   LossFamily::sine_quadratic}) {
    SequenceParams sp;
    sp.family = fam;
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
      const auto f = make_loss(sp, make_point({u(rng)}));
      const double x = u(rng), h = 1e-6;
      const double fd = (f.value(make_point({x + h})) - f.value(make_point({x - h}))) / (2.0 * h);
      const double g = f.gradient(make_point({x}))(0);
      worst = std::max(worst, std::abs(g - fd) / std::max(std::abs(g), 1e-3));
    }
    ok = ok && worst <= 1e-5;
    detail += (detail.empty() ? "" : ", ") + to_string(fam) + " " + fmt(worst, "%.2e");
  }
  return {ok, "worst relative error: " + detail};
}

Outcome strongly_convex() {
  auto c = preset("strongly_convex");
  const auto ex = run_experiment(c, RunOptions{false, false});
  collect(ex);
  const auto& r = ex.runs.front();
  const bool within = r.ok() && r.sc_regret <= r.envelope;
  std::map<double, double> curve;
  for (std::size_t K : {100, 1000, 10000}) {
    c.horizon = K;
    const auto e = run_experiment(c, RunOptions{false, false});
    collect(e);
    curve[static_cast<double>(K)] = e.sc().mean;
  }
  const double slope = log_log_slope(curve);
  return {within && slope <= 0.2, "K=1000 SC " + fmt(r.sc_regret) + " <= envelope " + fmt(r.envelope) +
                                       " (G_run " + fmt(r.G_run) + "), slope " + fmt(slope, "%.3f") +
                                       " <= 0.2"};
}

Outcome convex_static() {
  const auto c = preset("convex_static");
  bool within = true;
  std::map<double, double> curve;
  std::string worst;
  double worst_ratio = 0.0;
  for (std::size_t K : c.k_sweep) {
    auto ck = c;
    ck.horizon = K;
    const auto ex = run_experiment(ck, RunOptions{false, false});
    collect(ex);
    const auto& r = ex.runs.front();
    within = within && r.ok() && r.sc_regret <= r.envelope;
    worst_ratio = std::max(worst_ratio, r.sc_regret / r.envelope);
    curve[static_cast<double>(K)] = r.sc_regret;
  }
  const double slope = sublinearity_slope(curve);
  return {within && slope >= 0.35 && slope <= 0.65,
          "max SC/envelope " + fmt(worst_ratio, "%.3g") + ", slope " + fmt(slope, "%.3f") + " in [0.35, 0.65]"};
}

Outcome congd() {
  const auto c = preset("congd_sigmoid");
  std::map<double, double> curve;
  std::string zeta;
  bool ok = true;
  for (std::size_t K : {100, 1000, 10000, 100000}) {
    auto ck = c;
    ck.horizon = K;
    const auto ex = run_experiment(ck, RunOptions{false, false});
    collect(ex);
    ok = ok && ex.ok();
    const auto& r = ex.runs.front();
    curve[static_cast<double>(K)] = r.dc_regret;
    zeta = std::isnan(r.zeta_envelope) ? "not computable" : fmt(r.zeta_envelope);
  }
  const double slope = sublinearity_slope(curve);
  return {ok && slope <= 0.75, "DC slope " + fmt(slope, "%.3f") + " <= 0.75 (zeta surrogate envelope at K=1e5: " +
                                   zeta + ", logged only)"};
}

Outcome envelopes() {
  // The sqrt-k schedule is exercised here as well.
  const auto ex = run_experiment(preset("sqrtk"), RunOptions{false, false});
  collect(ex);
  std::size_t checked = 0, violations = 0;
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& [name, t] : g_envelopes) {
    checked += t.checked;
    violations += t.violations;
    worst = std::max(worst, t.worst_excess);
  }
  return {violations == 0 && checked > 0,
          std::to_string(violations) + " violations in " + std::to_string(checked) + " checks over " +
              std::to_string(g_envelope_runs) + " runs, " + std::to_string(g_envelopes.size()) +
              " envelope kinds, worst excess " + fmt(worst)};
}

Outcome oracle_contract() {
  return {g_audits >= 100 && g_audits_passed == g_audits,
          std::to_string(g_audits_passed) + " of " + std::to_string(g_audits) +
              " audited calls passed, min slack " + fmt(g_worst_slack)};
}

Outcome sampler() {
  const double eta = 2.0;
  const std::size_t n = 100000;
  RngStream rng(99);
  std::vector<double> xs(n);
  double mean = 0.0;
  for (auto& x : xs) mean += (x = sample_exponential(eta, rng));
  mean /= static_cast<double>(n);
  const double se = (1.0 / eta) / std::sqrt(static_cast<double>(n));
  const bool mean_ok = std::abs(mean - 1.0 / eta) <= 3.0 * se;
  bool tail_ok = true;
  for (double o : {0.1, 0.5, 1.0}) {
    double hits = 0;
    for (double x : xs) hits += x >= o;
    const double p = std::exp(-eta * o);
    tail_ok = tail_ok && std::abs(hits / n - p) <= 3.0 * std::sqrt(p * (1 - p) / n);
  }
  // P(X >= 0.6 | X >= 0.2) against P(X >= 0.4).
  double above_p = 0, above_po = 0, above_o = 0;
  for (double x : xs) {
    above_p += x >= 0.2;
    above_po += x >= 0.6;
    above_o += x >= 0.4;
  }
  const double ratio = (above_po / above_p) / (above_o / n);
  const bool memoryless = std::abs(ratio - 1.0) <= 0.03;
  return {mean_ok && tail_ok && memoryless, "mean " + fmt(mean) + " vs " + fmt(1.0 / eta) + " (3 SE " +
                                                fmt(3 * se) + "), tails " + (tail_ok ? "ok" : "off") +
                                                ", memorylessness ratio " + fmt(ratio, "%.4f")};
}

Outcome dinoco() {
  bool ok = true;
  std::string detail;
  for (std::size_t N : {1, 4}) {
    auto c = preset("dinoco");
    c.agents = N;
    if (N == 1) c.topology = "complete";
    std::map<double, double> sc, movement;
    bool rho_ok = true;
    for (std::size_t K : {100, 300, 1000, 3000}) {
      c.horizon = K;
      const auto ex = run_experiment(c, RunOptions{false, false});
      ok = ok && ex.ok();
      sc[static_cast<double>(K)] = ex.sc().mean;
      movement[static_cast<double>(K)] = ex.movement().mean;
      for (const auto& r : ex.runs) {
        rho_ok = rho_ok && r.oracle.rho <= 1.0 / std::sqrt(static_cast<double>(K));
        ok = ok && std::abs(r.step.eta - 1.0 / std::sqrt(static_cast<double>(K))) <= 1e-15;
        for (const auto& a : r.audits) {
          ++g_audits;
          g_audits_passed += a.result.pass;
          g_worst_slack = std::min(g_worst_slack, a.result.slack);
        }
      }
    }
    const double s = log_log_slope(sc), m = log_log_slope(movement);
    const bool pass = rho_ok && s <= 0.8 && m < 1.0;
    ok = ok && pass;
    detail += (detail.empty() ? "" : "; ") + std::string("N=") + std::to_string(N) + ": SC slope " +
              fmt(s, "%.3f") + ", movement slope " + fmt(m, "%.3f") + ", rho " + (rho_ok ? "ok" : "too large") +
              (pass ? "" : " [fails]");
  }
  return {ok, detail};
}

Outcome dsgd_gap() {
  ExperimentConfig c;
  c.mode = "dsgd";
  c.topology = "complete";
  c.agents = 2;
  c.loss.curvature = 2.0;
  c.loss.center_offset = 0.2;
  c.loss.heterogeneity = 0.3;
  c.dsgd_samples = 10;
  c.horizon = 10000;
  c.schedule = "ocgd_convex_static";
  const auto d = run_dsgd(c);
  const auto& r = d.runs.front();
  return {d.ok() && r.gap <= d.envelope && r.jensen,
          "gap " + fmt(r.gap) + " <= envelope " + fmt(d.envelope) + ", Jensen " + (r.jensen ? "holds" : "fails")};
}

Outcome trivial_exactness() {
  ExperimentConfig c;
  c.loss.center_offset = 0.4;
  c.horizon = 500;
  c.start_at_minimizer = true;
  c.schedule = "constant";
  c.alpha = 0.1;
  const auto at_min = run_experiment(c).runs.front();

  ExperimentConfig single = c;
  single.agents = 1;
  single.topology = "complete";
  single.start_at_minimizer = false;
  single.loss.drift = DriftKind::sinusoidal;
  const auto one = run_experiment(single).runs.front();
  double net1 = 0.0;
  for (const auto& row : one.rows) net1 = std::max(net1, std::abs(row.network_loss));

  // Consensus states on every topology, with the scale of the DINOCO constant.
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double net_consensus = 0.0;
  std::size_t states = 0;
  for (auto kind : {GraphKind::complete, GraphKind::ring, GraphKind::star, GraphKind::path})
    for (std::size_t n = 2; n <= 10; ++n)
      for (int dim : {1, 2}) {
        const auto pi = metropolis_mixing(build_graph(kind, n));
        Eigen::RowVectorXd common(dim);
        for (int j = 0; j < dim; ++j) common(j) = u(rng);
        const Eigen::MatrixXd x = common.replicate(static_cast<Eigen::Index>(n), 1);
        for (std::size_t i = 0; i < n; ++i)
          for (double cc : {0.5, 50.0})
            for (auto norm : {NetworkNorm::l2sq, NetworkNorm::l1})
              net_consensus = std::max(net_consensus, std::abs(network_share(x, pi, cc, i, norm)));
        ++states;
      }

  const bool ok = at_min.ok() && one.ok() && std::abs(at_min.sc_regret) <= 1e-9 && net1 == 0.0 &&
                  net_consensus == 0.0;
  return {ok, "regret at minimiser " + fmt(at_min.sc_regret) + ", N=1 network loss " + fmt(net1) +
                  ", network loss over " + std::to_string(states) + " consensus states " + fmt(net_consensus)};
}

std::string trace_csv(const ExperimentConfig& c) {
  const auto ex = run_experiment(c);
  std::ostringstream out;
  for (const auto& r : ex.runs) write_trace(out, r.rows, c.loss.dimension);
  return out.str();
}

Outcome byte_identical() {
  std::size_t bytes = 0;
  bool same = true;
  for (const char* name : {"strongly_convex", "congd_sigmoid", "dinoco"}) {
    auto c = preset(name);
    c.horizon = std::min<std::size_t>(c.horizon, 300);
    c.ensemble = std::min<std::size_t>(c.ensemble, 3);
    const auto a = trace_csv(c), b = trace_csv(c);
    same = same && a == b && !a.empty();
    bytes += a.size();
  }
  return {same, std::to_string(bytes) + " bytes compared across 3 presets"};
}

}  // namespace

int main() {
  // The DINOCO criterion runs before the oracle criterion, whose audits it
  // collects; envelope collection likewise precedes criterion 7.
  const std::vector<Criterion> order = {
      {1, "mixing validity", 1, mixing_validity},
      {2, "ring-4 spectral constant", 1, ring_lambda},
      {3, "finite-difference gradients", 5, gradient_checks},
      {4, "strongly convex OCGD", 30, strongly_convex},
      {5, "constant-step OCGD static regret", 120, convex_static},
      {6, "CONGD dynamic regret", 120, congd},
      {10, "DINOCO sublinearity", 300, dinoco},
      {7, "consensus and gradient envelopes", kNoBudget, envelopes},
      {8, "oracle contract", 30, oracle_contract},
      {9, "exponential sampler", 5, sampler},
      {11, "sampled-gradient gap", 30, dsgd_gap},
      {12, "trivial exactness", kNoBudget, trivial_exactness},
      {13, "byte-identical traces", kNoBudget, byte_identical},
  };
  std::map<int, std::string> lines;
  bool all = true;
  for (const auto& cr : order) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = cr.body();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > cr.budget_seconds) {
      o.pass = false;
      o.detail += "; over time budget " + fmt(cr.budget_seconds) + " s";
    }
    all = all && o.pass;
    char head[128];
    std::snprintf(head, sizeof head, "%s %2d %-36s %7.2fs  ", o.pass ? "PASS" : "FAIL", cr.id, cr.name.c_str(),
                  secs);
    lines[cr.id] = head + o.detail;
  }
  for (const auto& [id, line] : lines) std::cout << line << "\n";
  std::cout << (all ? "all criteria passed" : "some criteria failed") << "\n";
  return all ? 0 : 1;
}
