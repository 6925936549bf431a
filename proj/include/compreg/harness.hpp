// Experiment runner: builds the problem from a config, runs seed ensembles
// and K-sweeps, checks per-round envelopes, and hosts the sampled-quadratic
// (DSGD) preset and the invariant suite behind `verify`.
#pragma once

#include "compreg/algorithms.hpp"
#include "compreg/config.hpp"
#include "compreg/losses.hpp"
#include "compreg/oracle.hpp"
#include "compreg/regret.hpp"
#include "compreg/topology.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace compreg {

class RunError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kEnvelopeTolerance = 1e-9;
inline const double kMissing = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// Problem construction.

inline Graph make_graph(const ExperimentConfig& c) {
  if (c.topology.rfind("file:", 0) == 0) return read_edge_list(c.topology.substr(5), c.agents);
  return build_graph(graph_kind_from_string(c.topology), c.agents);
}

inline MixingMatrix make_mixing(const ExperimentConfig& c, const Graph& g) {
  return c.mixing == "uniform" ? uniform_mixing(g) : metropolis_mixing(g);
}

inline Domain make_domain(const ExperimentConfig& c) {
  return Domain::box(c.domain_lower, c.domain_upper, c.loss.dimension);
}

/// Euclidean diameter of the box.
inline double diameter(const Domain& d) { return (d.upper - d.lower).norm(); }

inline MinimizerOptions comparator_options(const ExperimentConfig& c) {
  MinimizerOptions o;
  o.grid_points = c.comparator_grid_points;
  if (c.comparator_method == "grid") o.method = MinimizerMethod::grid;
  else if (c.comparator_method == "bisection") o.method = MinimizerMethod::bisection;
  return o;
}

struct Problem {
  Graph graph;
  MixingMatrix pi;
  Domain domain;
  LossSequence seq;
  Comparators comparators;
};

inline std::unique_ptr<Problem> make_problem(const ExperimentConfig& c, LossSequence seq) {
  Graph g = make_graph(c);
  if (g.n_agents() != seq.n_agents()) throw ConfigError("loss sequence and topology disagree on N");
  MixingMatrix pi = make_mixing(c, g);
  auto comps = compute_comparators(seq, comparator_options(c));
  Domain dom = seq.domain();
  return std::make_unique<Problem>(Problem{std::move(g), std::move(pi), std::move(dom), std::move(seq), std::move(comps)});
}

inline std::unique_ptr<Problem> make_problem(const ExperimentConfig& c, std::uint64_t loss_seed) {
  SequenceParams p = c.loss;
  p.horizon = c.horizon;
  p.n_agents = c.agents;
  p.seed = loss_seed;
  return make_problem(c, make_drifting_sequence(p, make_domain(c)));
}

// ---------------------------------------------------------------------------
// Step sizes.

struct ResolvedStep {
  StepSchedule schedule;
  std::optional<TheoremSchedule> theorem;
  double G = 0.0;    // constant used by the schedule (analytic unless configured)
  double P_K = 0.0;  // path variation used by the schedule
  double eta = 0.0;  // DINOCO
};

inline double configured_or(const std::string& v, double fallback) {
  return v == "auto" ? fallback : std::stod(v);
}

inline ResolvedStep resolve_step(const ExperimentConfig& c, const Problem& p) {
  ResolvedStep r;
  const double K = static_cast<double>(p.seq.horizon());
  r.G = configured_or(c.G, p.seq.stacked_lipschitz());
  r.P_K = configured_or(c.P_K, p.comparators.path_variation);
  if (c.algorithm == Algorithm::dinoco) {
    switch (c.eta_scheme) {
      case EtaScheme::fixed: r.eta = c.oracle_eta; break;
      case EtaScheme::theorem: r.eta = 1.0 / std::sqrt(K); break;
      case EtaScheme::theorem_network: r.eta = 1.0 / std::sqrt(static_cast<double>(p.pi.size()) * K); break;
    }
    return r;
  }
  if (c.schedule == "constant") r.schedule = {ScheduleKind::constant, c.alpha, "constant"};
  else if (c.schedule == "inverse_k") r.schedule = {ScheduleKind::inverse_k, c.alpha, "inverse_k"};
  else if (c.schedule == "inverse_sqrt_k") r.schedule = {ScheduleKind::inverse_sqrt_k, c.alpha, "inverse_sqrt_k"};
  else {
    r.theorem = theorem_schedule_from_string(c.schedule);
    ScheduleConstants k;
    if (c.loss.family == LossFamily::quadratic) k.mu = c.loss.curvature;
    k.G = r.G;
    k.lambda = p.pi.lambda();
    k.N = static_cast<double>(p.pi.size());
    k.D = diameter(p.domain);
    k.P_K = r.P_K;
    k.K = K;
    r.schedule = schedule_from_theorem(*r.theorem, k);
  }
  return r;
}

/// Oracle grid for a DINOCO run: bounds of the cumulative objective after K
/// rounds, sized so that rho <= c/sqrt(K) and beta <= c/K.
inline OracleSpec dinoco_oracle_spec(const ExperimentConfig& c, const Problem& p, double eta) {
  const double K = static_cast<double>(p.seq.horizon());
  double off = 0.0;
  for (std::size_t i = 0; i < p.pi.size(); ++i) off = std::max(off, 1.0 - p.pi(i, i));
  double g = 0.0, l2 = 0.0;
  for (std::size_t k = 1; k <= p.seq.horizon(); ++k)
    for (const auto& f : p.seq.round(k)) {
      g = std::max(g, f.lipschitz(p.domain));
      l2 = std::max(l2, f.curvature_bound());
    }
  const double D = diameter(p.domain);
  const double lip = K * (g + off / eta * D), curv = K * (l2 + off / eta);
  const double lo = p.domain.lower(0), hi = p.domain.upper(0);
  if (c.oracle_grid_points > 0) return certify_grid(lo, hi, c.oracle_grid_points, lip, curv);
  return spec_for_horizon(lo, hi, p.seq.horizon(), lip, curv, c.oracle_c);
}

// ---------------------------------------------------------------------------
// Single run.

struct TraceRow {
  std::size_t k = 0;
  std::size_t agent = 0;
  Point x;
  double f_loss = 0.0;
  double network_loss = 0.0;
  double V = 0.0;
  double sc_regret = 0.0;
  double dc_regret = 0.0;
  double consensus_residual = 0.0;
  double lemma12_envelope = kMissing;
  double corollary1_value = kMissing;
  double corollary1_envelope = kMissing;
};

struct EnvelopeTally {
  std::size_t checked = 0;
  std::size_t violations = 0;
  double worst_excess = -std::numeric_limits<double>::infinity();  // max(value - bound)

  void record(double value, double bound) {
    ++checked;
    worst_excess = std::max(worst_excess, value - bound);
    if (!(value <= bound + kEnvelopeTolerance)) ++violations;
  }
  void merge(const EnvelopeTally& o) {
    checked += o.checked;
    violations += o.violations;
    worst_excess = std::max(worst_excess, o.worst_excess);
  }
};

struct RunOptions {
  bool keep_rows = true;
  bool keep_states = false;
};

struct RunResult {
  std::uint64_t seed = 0;
  std::size_t horizon = 0;
  std::size_t completed_rounds = 0;
  std::string error;  // set when the run stopped early

  ResolvedStep step;
  OracleSpec oracle;
  double lambda = 0.0;
  double path_variation = 0.0;

  double sc_regret = 0.0;
  double dc_regret = 0.0;
  double recomputation_error = 0.0;
  double min_network_loss = 0.0;
  double network_l1_total = 0.0;
  double movement_l1 = 0.0;  // sum_k |x_{k+1} - x_k|_1

  double G_run = 0.0;       // max_k |grad F_k(x_k)|
  double G_envelope = 0.0;  // constant used by the terminal envelope
  std::string envelope_name;
  std::string envelope_regret;  // "sc" or "dc"
  double envelope = kMissing;

  double alpha_hat_min = std::numeric_limits<double>::infinity();
  double zeta_surrogate = kMissing;
  double zeta_envelope = kMissing;

  std::map<std::string, EnvelopeTally> checks;
  std::vector<AuditRecord> audits;
  std::vector<TraceRow> rows;
  std::vector<Eigen::MatrixXd> states;

  bool ok() const { return error.empty(); }
  std::size_t violations() const {
    std::size_t v = 0;
    for (const auto& [name, t] : checks) v += t.violations;
    return v;
  }
  std::size_t audits_passed() const {
    std::size_t n = 0;
    for (const auto& a : audits) n += a.result.pass;
    return n;
  }
};

namespace detail {

inline void terminal_envelope(RunResult& r, const ExperimentConfig& c, const Problem& p) {
  if (!r.step.theorem) return;
  EnvelopeConstants e;
  e.lambda = r.lambda;
  e.N = static_cast<double>(p.pi.size());
  e.D = diameter(p.domain);
  e.K = static_cast<double>(r.horizon);
  e.P_K = r.step.P_K;
  if (c.loss.family == LossFamily::quadratic) e.mu = c.loss.curvature;
  switch (*r.step.theorem) {
    case TheoremSchedule::ocgd_strongly_convex:
      r.G_envelope = r.G_run;
      r.envelope_name = "strongly_convex_regret";
      r.envelope_regret = "sc";
      break;
    case TheoremSchedule::ocgd_convex_static:
      r.G_envelope = r.step.G;
      r.envelope_name = "static_regret";
      r.envelope_regret = "sc";
      break;
    case TheoremSchedule::ocgd_convex_dynamic:
      r.G_envelope = r.step.G;
      r.envelope_name = "dynamic_regret";
      r.envelope_regret = "dc";
      break;
    case TheoremSchedule::ocgd_convex_sqrtk:
      r.G_envelope = r.step.G;
      r.envelope_name = "sqrtk_regret";
      r.envelope_regret = "sc";
      break;
    case TheoremSchedule::congd_dynamic: {
      r.G_envelope = r.G_run;
      if (std::isfinite(r.alpha_hat_min) && r.alpha_hat_min > 0.0) {
        r.zeta_surrogate = std::max(r.G_run, 2.0 / (1.0 - r.lambda) / r.alpha_hat_min);
        e.zeta = r.zeta_surrogate;
        r.zeta_envelope = bound_envelope("congd_dynamic_regret", e);
      }
      return;
    }
  }
  e.G = r.G_envelope;
  r.envelope = bound_envelope(r.envelope_name, e);
}

}  // namespace detail

/// One seeded run over the problem's horizon, starting at the origin (or at
/// the static comparator when configured).
inline RunResult run_single(const ExperimentConfig& c, const Problem& p, std::uint64_t seed,
                            const RunOptions& opt = {}) {
  RunResult r;
  r.seed = seed;
  r.horizon = p.seq.horizon();
  r.lambda = p.pi.lambda();
  r.path_variation = p.comparators.path_variation;
  r.step = resolve_step(c, p);

  const std::size_t K = p.seq.horizon(), N = p.pi.size();
  const bool dinoco = c.algorithm == Algorithm::dinoco;
  const bool ocgd = c.algorithm == Algorithm::ocgd;

  AgentState s = AgentState::origin(N, p.domain.dimension());
  if (c.start_at_minimizer)
    for (std::size_t i = 0; i < N; ++i) s.x.row(static_cast<Eigen::Index>(i)) = p.comparators.static_point.transpose();

  std::unique_ptr<Dinoco> learner;
  if (dinoco) {
    r.oracle = dinoco_oracle_spec(c, p, r.step.eta);
    const std::size_t calls = N * (K > 1 ? K - 1 : 1);
    const std::size_t stride = c.oracle_audit_calls > 0 ? std::max<std::size_t>(1, calls / c.oracle_audit_calls) : 0;
    learner = std::make_unique<Dinoco>(p.pi, p.domain, r.step.eta, r.oracle, seed, stride);
    s = learner->initial_state();
  }

  RegretLedger ledger(p.comparators.static_point);
  GeometricSum S(r.step.schedule, r.lambda);
  std::vector<double> sk(K, 0.0), alphas(K, 0.0), grad_v(K, kMissing), disagreement(K, 0.0);
  std::vector<std::vector<double>> residuals(K);
  r.min_network_loss = std::numeric_limits<double>::infinity();
  if (opt.keep_rows) r.rows.reserve(K * N);

  try {
    for (std::size_t k = 1; k <= K; ++k) {
      const auto& losses = p.seq.round(k);
      const double alpha = dinoco ? 0.0 : r.step.schedule.alpha(k);
      const double cc = dinoco ? 1.0 / (2.0 * r.step.eta) : 1.0 / (2.0 * alpha);
      const auto& rec = ledger.update(s.x, losses, p.pi, cc, p.comparators.per_round[k - 1]);
      r.min_network_loss = std::min(r.min_network_loss, rec.played.network_loss);
      r.network_l1_total += composite_value(s.x, losses, p.pi, cc, NetworkNorm::l1).network_loss;
      const auto res = consensus_residual(s.x);
      r.G_run = std::max(r.G_run, stacked_gradient_norm(s.x, losses));
      sk[k - 1] = S.value();
      alphas[k - 1] = alpha;
      residuals[k - 1] = res.per_agent;
      if (!dinoco) {
        disagreement[k - 1] = scaled_disagreement(s.x, p.pi, alpha);
        if (ocgd) grad_v[k - 1] = composite_gradient_norm(s.x, losses, p.pi, alpha);
        // alpha_hat = |(I - Pi) x| / alpha; rounding-level disagreement counts as consensus.
        if (c.algorithm == Algorithm::congd && disagreement[k - 1] * alpha > kZeroGradient)
          r.alpha_hat_min = std::min(r.alpha_hat_min, disagreement[k - 1]);
      }
      if (opt.keep_states) r.states.push_back(s.x);
      if (opt.keep_rows)
        for (std::size_t i = 0; i < N; ++i) {
          TraceRow row;
          row.k = k;
          row.agent = i;
          row.x = s.agent(i);
          row.f_loss = losses[i].value(row.x);
          row.network_loss = network_share(s.x, p.pi, cc, i);
          row.V = row.f_loss + row.network_loss;
          row.sc_regret = rec.sc_regret;
          row.dc_regret = rec.dc_regret;
          row.consensus_residual = res.per_agent[i];
          r.rows.push_back(std::move(row));
        }
      if (!std::isfinite(rec.sc_regret) || !std::isfinite(rec.dc_regret) || !std::isfinite(r.G_run))
        throw RunError("non-finite loss or gradient at round " + std::to_string(k));
      r.completed_rounds = k;
      if (k == K) break;
      AgentState next = dinoco ? learner->step(s, losses)
                        : ocgd ? ocgd_step(s, losses, p.pi, alpha, p.domain)
                               : congd_step(s, losses, p.pi, alpha, p.domain);
      if (!next.x.allFinite()) throw RunError("non-finite state at round " + std::to_string(k + 1));
      r.movement_l1 += (next.x - s.x).cwiseAbs().sum();
      s = std::move(next);
      S.advance();
    }
  } catch (const std::exception& e) {
    r.error = e.what();
  }

  r.sc_regret = ledger.sc_regret();
  r.dc_regret = ledger.dc_regret();
  r.recomputation_error = ledger.recomputation_error();
  if (learner) r.audits = learner->audits();

  // Per-round envelopes use the largest gradient norm seen along the run.
  if (!dinoco) {
    const double G = r.G_run, lam = r.lambda;
    const double Gc = ocgd ? G : 1.0;
    for (std::size_t k = 1; k <= r.completed_rounds; ++k) {
      const double bound = Gc * sk[k - 1];
      for (double d : residuals[k - 1]) r.checks["consensus"].record(d, bound);
      if (ocgd) {
        const double general = G * (1.0 + 2.0 * sk[k - 1] / alphas[k - 1]);
        r.checks["gradient_general"].record(grad_v[k - 1], general);
        const auto kind = r.step.schedule.kind;
        if (kind == ScheduleKind::constant) r.checks["gradient_norm"].record(grad_v[k - 1], gradient_constant(G, lam));
        if (kind == ScheduleKind::inverse_k && k >= 2)
          r.checks["disagreement_inverse_k"].record(disagreement[k - 1], 2.0 * G / (1.0 - lam));
        if (kind == ScheduleKind::inverse_sqrt_k && k >= 2)
          r.checks["disagreement_inverse_sqrt_k"].record(disagreement[k - 1], 3.42 * G / (1.0 - lam));
      }
    }
    if (opt.keep_rows)
      for (auto& row : r.rows) {
        row.lemma12_envelope = Gc * sk[row.k - 1];
        if (ocgd) {
          row.corollary1_value = grad_v[row.k - 1];
          row.corollary1_envelope = G * (1.0 + 2.0 * sk[row.k - 1] / alphas[row.k - 1]);
        }
      }
  }
  if (r.completed_rounds == K) {
    detail::terminal_envelope(r, c, p);
    if (std::isfinite(r.envelope)) {
      const double regret = r.envelope_regret == "dc" ? r.dc_regret : r.sc_regret;
      r.checks["terminal_" + r.envelope_name].record(regret, r.envelope);
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Ensembles.

struct Stat {
  double mean = 0.0;
  double stderr_ = 0.0;
};

inline Stat mean_and_stderr(const std::vector<double>& xs) {
  Stat s;
  if (xs.empty()) return s;
  const double n = static_cast<double>(xs.size());
  for (double x : xs) s.mean += x;
  s.mean /= n;
  if (xs.size() > 1) {
    double var = 0.0;
    for (double x : xs) var += (x - s.mean) * (x - s.mean);
    s.stderr_ = std::sqrt(var / (n - 1.0) / n);
  }
  return s;
}

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<RunResult> runs;
  std::vector<std::uint64_t> loss_seeds;

  bool ok() const {
    for (const auto& r : runs)
      if (!r.ok()) return false;
    return true;
  }
  template <class F>
  Stat stat(F f) const {
    std::vector<double> xs;
    for (const auto& r : runs) xs.push_back(f(r));
    return mean_and_stderr(xs);
  }
  Stat sc() const { return stat([](const RunResult& r) { return r.sc_regret; }); }
  Stat dc() const { return stat([](const RunResult& r) { return r.dc_regret; }); }
  Stat movement() const { return stat([](const RunResult& r) { return r.movement_l1; }); }
  std::size_t violations() const {
    std::size_t v = 0;
    for (const auto& r : runs) v += r.violations();
    return v;
  }
  std::map<std::string, EnvelopeTally> checks() const {
    std::map<std::string, EnvelopeTally> m;
    for (const auto& r : runs)
      for (const auto& [name, t] : r.checks) m[name].merge(t);
    return m;
  }
};

/// Ensemble member e runs with seed `run.seed + e`; with `run.vary_losses`
/// it also draws its loss sequence with seed `loss.seed + e`.
inline ExperimentResult run_experiment(const ExperimentConfig& c, const RunOptions& opt = {}) {
  c.validate();
  if (c.mode != "online") throw ConfigError("run_experiment expects experiment.mode = online");
  ExperimentResult out;
  out.config = c;
  std::unique_ptr<Problem> shared;
  for (std::size_t e = 0; e < c.ensemble; ++e) {
    const std::uint64_t loss_seed = c.loss.seed + (c.vary_losses ? e : 0);
    std::unique_ptr<Problem> own;
    if (c.vary_losses) own = make_problem(c, loss_seed);
    else if (!shared) shared = make_problem(c, loss_seed);
    const Problem& p = c.vary_losses ? *own : *shared;
    out.loss_seeds.push_back(loss_seed);
    out.runs.push_back(run_single(c, p, c.seed + e, opt));
    if (!out.runs.back().ok()) break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// K-sweeps.

struct SweepPoint {
  std::size_t K = 0;
  Stat sc, dc, movement;
  double envelope = kMissing;
  double zeta_envelope = kMissing;
  double path_variation = 0.0;
  double step_base = 0.0;
  std::size_t violations = 0;
  std::size_t audits = 0;
  std::size_t audits_passed = 0;
  bool ok = true;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  double sc_slope = kMissing;
  double dc_slope = kMissing;
  double movement_slope = kMissing;
  std::string slope_method;
  std::string error;

  std::map<double, double> sc_curve() const {
    std::map<double, double> m;
    for (const auto& p : points) m[static_cast<double>(p.K)] = p.sc.mean;
    return m;
  }
  std::map<double, double> dc_curve() const {
    std::map<double, double> m;
    for (const auto& p : points) m[static_cast<double>(p.K)] = p.dc.mean;
    return m;
  }
  std::map<double, double> movement_curve() const {
    std::map<double, double> m;
    for (const auto& p : points) m[static_cast<double>(p.K)] = p.movement.mean;
    return m;
  }
  /// Slopes at or above 0.9 are reported as not sublinear.
  static bool sublinear(double slope) { return slope < 0.9; }
};

/// Slope of a regret curve: the sublinearity fit when the K values allow it
/// (>= 4 points over >= 2 decades), otherwise a plain log-log fit.
inline double fit_slope(const std::map<double, double>& curve, std::string* method = nullptr) {
  try {
    const double s = sublinearity_slope(curve);
    if (method) *method = "sublinearity";
    return s;
  } catch (const RegretError&) {
    if (method) *method = "log_log";
    return log_log_slope(curve);
  }
}

/// Independent runs per K; schedules and comparators are recomputed for each
/// horizon.
inline SweepResult k_sweep(ExperimentConfig c, const std::vector<std::size_t>& ks) {
  if (ks.size() < 2) throw ConfigError("a sweep needs at least 2 K values");
  SweepResult out;
  for (std::size_t K : ks) {
    c.horizon = K;
    auto ex = run_experiment(c, RunOptions{false, false});
    SweepPoint pt;
    pt.K = K;
    pt.sc = ex.sc();
    pt.dc = ex.dc();
    pt.movement = ex.movement();
    pt.violations = ex.violations();
    pt.ok = ex.ok();
    const auto& first = ex.runs.front();
    pt.envelope = first.envelope;
    pt.zeta_envelope = first.zeta_envelope;
    pt.path_variation = first.path_variation;
    pt.step_base = c.algorithm == Algorithm::dinoco ? first.step.eta : first.step.schedule.base;
    for (const auto& r : ex.runs) {
      pt.audits += r.audits.size();
      pt.audits_passed += r.audits_passed();
    }
    out.points.push_back(pt);
    if (!pt.ok) {
      out.error = ex.runs.back().error;
      return out;
    }
  }
  out.sc_slope = fit_slope(out.sc_curve(), &out.slope_method);
  out.dc_slope = fit_slope(out.dc_curve());
  out.movement_slope = fit_slope(out.movement_curve());
  return out;
}

// ---------------------------------------------------------------------------
// Sampled-quadratic preset: per-agent datasets, i.i.d. sampling per round,
// OCGD on the sampled rounds, and the expected objective at the running
// average.

struct QuadraticDataset {
  double mu = 2.0;
  std::vector<std::vector<Point>> centers;  // [agent][sample]

  std::size_t n_agents() const { return centers.size(); }
  Point mean_center(std::size_t i) const {
    Point m = Point::Zero(centers[i].front().size());
    for (const auto& cc : centers[i]) m += cc;
    return m / static_cast<double>(centers[i].size());
  }
};

inline QuadraticDataset make_dataset(const ExperimentConfig& c) {
  QuadraticDataset d;
  d.mu = c.loss.curvature;
  std::mt19937_64 rng(c.loss.seed);
  auto u = [&] { return 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0; };
  const int n = c.loss.dimension;
  d.centers.resize(c.agents);
  for (auto& agent : d.centers) {
    Point base(n);
    for (int j = 0; j < n; ++j) base(j) = c.loss.center_offset + c.loss.heterogeneity * u();
    agent.resize(c.dsgd_samples);
    for (auto& s : agent) {
      s = base;
      for (int j = 0; j < n; ++j) s(j) += c.dsgd_spread * u();
    }
  }
  return d;
}

/// Round k, agent i draws sample index from its own (seed, i, k) stream.
inline LossSequence sample_sequence(const QuadraticDataset& d, const Domain& dom, std::size_t K,
                                    std::uint64_t seed) {
  std::vector<std::vector<LossFunction>> rows(K);
  for (std::size_t k = 1; k <= K; ++k)
    for (std::size_t i = 0; i < d.n_agents(); ++i) {
      RngStream rng(seed, i, k);
      const double u = rng.uniform_open_closed();
      const std::size_t S = d.centers[i].size();
      const auto idx = std::min(S - 1, static_cast<std::size_t>(std::ceil(u * static_cast<double>(S))) - 1);
      rows[k - 1].push_back(LossFunction::quadratic(d.mu, d.centers[i][idx]));
    }
  return LossSequence(dom, d.n_agents(), std::move(rows), "iid samples", 0.0);
}

/// E[H](x) = sum_i mean_s (mu/2)|x^i - c_is|^2 + c x^T (I - Pi) x.
inline double expected_objective(const QuadraticDataset& d, const MixingMatrix& pi, double c,
                                 const Eigen::MatrixXd& x) {
  double v = 0.0;
  for (std::size_t i = 0; i < d.n_agents(); ++i) {
    const Point xi = x.row(static_cast<Eigen::Index>(i)).transpose();
    double acc = 0.0;
    for (const auto& cc : d.centers[i]) acc += (xi - cc).squaredNorm();
    v += 0.5 * d.mu * acc / static_cast<double>(d.centers[i].size());
    v += network_share(x, pi, c, i);
  }
  return v;
}

/// Minimiser of E[H] over the box by exact cyclic coordinate minimisation.
inline Eigen::MatrixXd minimize_expected_objective(const QuadraticDataset& d, const MixingMatrix& pi, double c,
                                                   const Domain& dom) {
  const auto N = static_cast<Eigen::Index>(d.n_agents());
  const int n = dom.dimension();
  Eigen::MatrixXd means(N, n);
  for (Eigen::Index i = 0; i < N; ++i) means.row(i) = d.mean_center(static_cast<std::size_t>(i)).transpose();
  Eigen::MatrixXd x = means;
  for (Eigen::Index i = 0; i < N; ++i) x.row(i) = project_box(means.row(i).transpose(), dom).transpose();
  for (int sweep = 0; sweep < 1000000; ++sweep) {
    double change = 0.0;
    for (Eigen::Index i = 0; i < N; ++i)
      for (int j = 0; j < n; ++j) {
        double num = d.mu * means(i, j), den = d.mu;
        for (Eigen::Index l = 0; l < N; ++l) {
          if (l == i) continue;
          const double w = 2.0 * c * pi(static_cast<std::size_t>(i), static_cast<std::size_t>(l));
          num += w * x(l, j);
          den += w;
        }
        const double v = std::clamp(num / den, dom.lower(j), dom.upper(j));
        change = std::max(change, std::abs(v - x(i, j)));
        x(i, j) = v;
      }
    if (change <= 1e-15) break;
  }
  return x;
}

struct DsgdRun {
  std::uint64_t seed = 0;
  Eigen::MatrixXd x_bar;
  double objective_at_average = 0.0;  // E[H](x_bar)
  double mean_objective = 0.0;        // (1/K) sum_k E[H](x_k)
  double minimum = 0.0;               // min E[H]
  double gap = 0.0;
  bool jensen = false;
  RunResult run;
};

struct DsgdResult {
  std::vector<DsgdRun> runs;
  double alpha = 0.0;
  double c = 0.0;
  double G = 0.0;
  double lambda = 0.0;
  double envelope = 0.0;
  Stat gap;
  bool ok() const {
    for (const auto& r : runs)
      if (!r.run.ok()) return false;
    return true;
  }
};

inline DsgdResult run_dsgd(const ExperimentConfig& c, const RunOptions& opt = {false, true}) {
  c.validate();
  if (c.mode != "dsgd") throw ConfigError("run_dsgd expects experiment.mode = dsgd");
  DsgdResult out;
  const auto data = make_dataset(c);
  const Domain dom = make_domain(c);
  // Stacked Lipschitz bound over every component the sampler can draw.
  double g2 = 0.0;
  for (std::size_t i = 0; i < data.n_agents(); ++i) {
    double gi = 0.0;
    for (const auto& cc : data.centers[i]) gi = std::max(gi, LossFunction::quadratic(data.mu, cc).lipschitz(dom));
    g2 += gi * gi;
  }
  out.G = std::sqrt(g2);
  RunOptions ro = opt;
  ro.keep_states = true;
  std::vector<double> gaps;
  for (std::size_t e = 0; e < c.ensemble; ++e) {
    const std::uint64_t seed = c.seed + e;
    ExperimentConfig ce = c;
    ce.G = format_double(out.G);
    auto p = make_problem(ce, sample_sequence(data, dom, c.horizon, seed));
    DsgdRun d;
    d.seed = seed;
    d.run = run_single(ce, *p, seed, ro);
    if (d.run.step.schedule.kind != ScheduleKind::constant)
      throw ConfigError("dsgd mode requires a constant step size");
    out.alpha = d.run.step.schedule.base;
    out.c = 1.0 / (2.0 * out.alpha);
    out.lambda = p->pi.lambda();
    if (!d.run.ok()) {
      out.runs.push_back(std::move(d));
      break;
    }
    d.x_bar = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(c.agents), dom.dimension());
    for (const auto& x : d.run.states) {
      d.x_bar += x;
      d.mean_objective += expected_objective(data, p->pi, out.c, x);
    }
    const double K = static_cast<double>(d.run.states.size());
    d.x_bar /= K;
    d.mean_objective /= K;
    d.objective_at_average = expected_objective(data, p->pi, out.c, d.x_bar);
    d.minimum = expected_objective(data, p->pi, out.c, minimize_expected_objective(data, p->pi, out.c, dom));
    d.gap = d.objective_at_average - d.minimum;
    d.jensen = d.objective_at_average <= d.mean_objective + 1e-12 * (1.0 + std::abs(d.mean_objective));
    if (!opt.keep_states) d.run.states.clear();
    gaps.push_back(d.gap);
    out.runs.push_back(std::move(d));
  }
  EnvelopeConstants e;
  e.G = out.G;
  e.lambda = out.lambda;
  e.N = static_cast<double>(c.agents);
  e.D = diameter(dom);
  e.K = static_cast<double>(c.horizon);
  out.envelope = bound_envelope("dsgd_gap", e);
  out.gap = mean_and_stderr(gaps);
  return out;
}

// ---------------------------------------------------------------------------
// Invariant suite.

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

inline std::vector<CheckResult> verify_config(const ExperimentConfig& cfg, std::size_t max_rounds = 200) {
  std::vector<CheckResult> out;
  auto add = [&](std::string name, bool pass, std::string detail) {
    out.push_back({std::move(name), pass, std::move(detail)});
  };

  const auto text = serialize_config(cfg);
  add("config_round_trip", serialize_config(parse_config_string(text)) == text, "serialize -> parse -> serialize");
  cfg.validate();

  const Graph g = make_graph(cfg);
  const MixingMatrix pi = make_mixing(cfg, g);
  const Eigen::MatrixXd& w = pi.weights();
  const double psd = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(pi.laplacian(), Eigen::EigenvaluesOnly)
                         .eigenvalues()
                         .minCoeff();
  add("mixing_doubly_stochastic", pi.max_row_residual() <= 1e-12 && pi.max_column_residual() <= 1e-12,
      "row " + format_double(pi.max_row_residual()) + ", column " + format_double(pi.max_column_residual()));
  add("mixing_symmetric", w == w.transpose(), "exact");
  add("laplacian_psd", psd >= -1e-12, "min eigenvalue " + format_double(psd));
  add("spectral_gap", pi.lambda() < 1.0, "lambda " + format_double(pi.lambda()));

  ExperimentConfig c = cfg;
  c.horizon = std::min(cfg.horizon, max_rounds);
  c.ensemble = 1;
  const Domain dom = make_domain(c);

  // Finite differences of the configured family.
  {
    SequenceParams sp = c.loss;
    sp.horizon = 1;
    sp.n_agents = 1;
    std::mt19937_64 rng(c.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
      Point center(dom.dimension()), x(dom.dimension());
      for (int j = 0; j < dom.dimension(); ++j) {
        center(j) = dom.lower(j) + u(rng) * (dom.upper(j) - dom.lower(j));
        x(j) = dom.lower(j) + u(rng) * (dom.upper(j) - dom.lower(j));
      }
      const auto f = make_loss(sp, center);
      const Point gr = f.gradient(x);
      Point fd(dom.dimension());
      for (int j = 0; j < dom.dimension(); ++j) {
        const double h = 1e-6 * std::max(1.0, std::abs(x(j)));
        Point a = x, b = x;
        a(j) += h;
        b(j) -= h;
        fd(j) = (f.value(a) - f.value(b)) / (2.0 * h);
      }
      worst = std::max(worst, (gr - fd).norm() / std::max(gr.norm(), 1e-3));
    }
    add("gradient_finite_difference", worst <= 1e-5, "worst relative error " + format_double(worst));
  }

  if (c.mode == "dsgd") {
    const auto d = run_dsgd(c);
    bool jensen = d.ok();
    for (const auto& r : d.runs) jensen = jensen && r.jensen;
    add("dsgd_jensen", jensen, "E[H](x_bar) <= mean_k E[H](x_k)");
    return out;
  }

  auto p = make_problem(c, c.loss.seed);
  const auto r1 = run_single(c, *p, c.seed);
  const auto r2 = run_single(c, *p, c.seed);
  add("run_completes", r1.ok(), r1.ok() ? std::to_string(r1.completed_rounds) + " rounds" : r1.error);
  add("network_loss_nonnegative", r1.min_network_loss >= 0.0, "min " + format_double(r1.min_network_loss));
  add("ledger_recomputable", r1.recomputation_error <= 1e-9, "error " + format_double(r1.recomputation_error));
  bool same = r1.rows.size() == r2.rows.size();
  for (std::size_t j = 0; same && j < r1.rows.size(); ++j)
    same = r1.rows[j].x == r2.rows[j].x && r1.rows[j].sc_regret == r2.rows[j].sc_regret;
  add("reproducible", same, "two runs with identical seed");
  for (const auto& [name, t] : r1.checks)
    add("envelope_" + name, t.violations == 0,
        std::to_string(t.violations) + " of " + std::to_string(t.checked) + " violated, worst excess " +
            format_double(t.worst_excess));
  if (c.algorithm == Algorithm::dinoco)
    add("oracle_audits", r1.audits_passed() == r1.audits.size(),
        std::to_string(r1.audits_passed()) + " of " + std::to_string(r1.audits.size()) + " passed");
  return out;
}

}  // namespace compreg
