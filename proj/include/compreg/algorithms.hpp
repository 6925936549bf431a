// Round-synchronous update rules: consensus online gradient descent (OCGD),
// consensus online normalised gradient descent (CONGD) and the distributed
// perturbed-leader learner (DINOCO), plus the closed-form step-size schedules.
#pragma once

#include "compreg/losses.hpp"
#include "compreg/oracle.hpp"
#include "compreg/topology.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace compreg {

class AlgorithmError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Algorithm { ocgd, congd, dinoco };

inline std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::ocgd: return "ocgd";
    case Algorithm::congd: return "congd";
    case Algorithm::dinoco: return "dinoco";
  }
  return "ocgd";
}

inline Algorithm algorithm_from_string(const std::string& s) {
  if (s == "ocgd") return Algorithm::ocgd;
  if (s == "congd") return Algorithm::congd;
  if (s == "dinoco") return Algorithm::dinoco;
  throw AlgorithmError("unknown algorithm '" + s + "'");
}

/// Stacked decisions: row i is agent i's point, `round` is k.
struct AgentState {
  Eigen::MatrixXd x;
  std::size_t round = 1;

  static AgentState origin(std::size_t n_agents, int dimension) {
    return {Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_agents), dimension), 1};
  }
  std::size_t n_agents() const { return static_cast<std::size_t>(x.rows()); }
  int dimension() const { return static_cast<int>(x.cols()); }
  Point agent(std::size_t i) const { return x.row(static_cast<Eigen::Index>(i)).transpose(); }
};

inline Point project_box(const Point& y, const Domain& dom) {
  if (y.size() != dom.lower.size()) throw AlgorithmError("projection dimension mismatch");
  return y.cwiseMax(dom.lower).cwiseMin(dom.upper);
}

inline constexpr double kZeroGradient = 1e-12;

namespace detail {

/// sum_j pi_ij x^j, accumulated in a fixed j order.
inline Point mix_row(const AgentState& s, const MixingMatrix& pi, std::size_t i) {
  Point acc = Point::Zero(s.dimension());
  for (std::size_t j = 0; j < s.n_agents(); ++j)
    if (pi(i, j) != 0.0) acc += pi(i, j) * s.agent(j);
  return acc;
}

inline void check_round(const AgentState& s, const std::vector<LossFunction>& losses,
                        const MixingMatrix& pi, double alpha) {
  if (!(alpha > 0.0)) throw AlgorithmError("step size must be positive");
  if (losses.size() != s.n_agents() || pi.size() != s.n_agents())
    throw AlgorithmError("agent count mismatch");
}

}  // namespace detail

/// Agent i's next point: P(sum_j pi_ij x^j - alpha grad f^i(x^i)). Reads only
/// the round-k snapshot, so agents may be processed in any order.
inline Point ocgd_update_agent(const AgentState& s, const std::vector<LossFunction>& losses,
                               const MixingMatrix& pi, double alpha, const Domain& dom, std::size_t i) {
  const Point g = gradient(losses[i], s.agent(i), dom);
  return project_box(detail::mix_row(s, pi, i) - alpha * g, dom);
}

/// Normalised variant; an agent with a (numerically) zero gradient stays put.
inline Point congd_update_agent(const AgentState& s, const std::vector<LossFunction>& losses,
                                const MixingMatrix& pi, double alpha, const Domain& dom, std::size_t i) {
  const Point xi = s.agent(i);
  const Point g = gradient(losses[i], xi, dom);
  const double norm = g.norm();
  if (!(norm > kZeroGradient)) return xi;
  return project_box(detail::mix_row(s, pi, i) - alpha * (g / norm), dom);
}

inline AgentState ocgd_step(const AgentState& s, const std::vector<LossFunction>& losses,
                            const MixingMatrix& pi, double alpha, const Domain& dom) {
  detail::check_round(s, losses, pi, alpha);
  AgentState next{Eigen::MatrixXd(s.x.rows(), s.x.cols()), s.round + 1};
  for (std::size_t i = 0; i < s.n_agents(); ++i)
    next.x.row(static_cast<Eigen::Index>(i)) = ocgd_update_agent(s, losses, pi, alpha, dom, i).transpose();
  return next;
}

inline AgentState congd_step(const AgentState& s, const std::vector<LossFunction>& losses,
                             const MixingMatrix& pi, double alpha, const Domain& dom) {
  detail::check_round(s, losses, pi, alpha);
  AgentState next{Eigen::MatrixXd(s.x.rows(), s.x.cols()), s.round + 1};
  for (std::size_t i = 0; i < s.n_agents(); ++i)
    next.x.row(static_cast<Eigen::Index>(i)) = congd_update_agent(s, losses, pi, alpha, dom, i).transpose();
  return next;
}

/// Record of one audited oracle call.
struct AuditRecord {
  std::size_t round = 0;
  std::size_t agent = 0;
  double sigma = 0.0;
  OracleAudit result;
};

/// Perturbed-leader learner. Each agent keeps the cumulative objective
/// sum_{l<=k} (f^i_l + r^i_l) as a LossSum; r^i_l(x) = (1/(2 eta)) sum_j pi_ij
/// (x - x^j_l)^2 with neighbour points frozen at their round-l values.
class Dinoco {
 public:
  Dinoco(const MixingMatrix& pi, Domain dom, double eta, OracleSpec spec,
         std::uint64_t master_seed, std::size_t audit_stride = 0)
      : pi_(pi),
        dom_(std::move(dom)),
        eta_(eta),
        oracle_(spec),
        seed_(master_seed),
        audit_stride_(audit_stride),
        history_(pi.size(), LossSum(1)) {
    if (!(eta > 0.0)) throw AlgorithmError("eta must be positive");
    if (dom_.dimension() != 1) throw AlgorithmError("dinoco requires n = 1");
    if (!dom_.contains(Point::Zero(1))) throw AlgorithmError("domain must contain the origin");
  }

  AgentState initial_state() const { return AgentState::origin(pi_.size(), 1); }
  double eta() const { return eta_; }
  const GridOracle& oracle() const { return oracle_; }
  const std::vector<AuditRecord>& audits() const { return audits_; }
  const std::vector<double>& last_sigma() const { return sigma_; }
  const LossSum& history(std::size_t agent) const { return history_.at(agent); }

  /// Absorbs round k's losses at the played state and returns x_{k+1}.
  AgentState step(const AgentState& s, const std::vector<LossFunction>& losses) {
    const std::size_t n = pi_.size();
    if (losses.size() != n || s.n_agents() != n) throw AlgorithmError("agent count mismatch");
    for (std::size_t i = 0; i < n; ++i) {
      history_[i].add(losses[i], dom_);
      for (std::size_t j = 0; j < n; ++j)
        if (j != i && pi_(i, j) > 0.0) history_[i].add_quadratic(pi_(i, j) / eta_, s.agent(j), dom_);
    }
    AgentState next{Eigen::MatrixXd(static_cast<Eigen::Index>(n), 1), s.round + 1};
    sigma_.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      RngStream rng(seed_, i, next.round);
      const double sigma = sample_exponential(eta_, rng);
      sigma_[i] = sigma;
      const double x = oracle_.minimize(history_[i], sigma);
      next.x(static_cast<Eigen::Index>(i), 0) = x;
      if (audit_stride_ > 0 && calls_ % audit_stride_ == 0)
        audits_.push_back({s.round, i, sigma, oracle_.verify(history_[i], sigma, x)});
      ++calls_;
    }
    return next;
  }

 private:
  const MixingMatrix& pi_;
  Domain dom_;
  double eta_;
  GridOracle oracle_;
  std::uint64_t seed_;
  std::size_t audit_stride_;
  std::size_t calls_ = 0;
  std::vector<LossSum> history_;
  std::vector<double> sigma_;
  std::vector<AuditRecord> audits_;
};

// ---------------------------------------------------------------------------
// Step-size schedules.

enum class ScheduleKind { constant, inverse_k, inverse_sqrt_k };

struct StepSchedule {
  ScheduleKind kind = ScheduleKind::constant;
  double base = 0.0;
  std::string provenance;

  double alpha(std::size_t k) const {
    const double kk = static_cast<double>(k);
    switch (kind) {
      case ScheduleKind::constant: return base;
      case ScheduleKind::inverse_k: return base / kk;
      case ScheduleKind::inverse_sqrt_k: return base / std::sqrt(kk);
    }
    return base;
  }
};

enum class TheoremSchedule {
  ocgd_strongly_convex,
  ocgd_convex_static,
  ocgd_convex_dynamic,
  ocgd_convex_sqrtk,
  congd_dynamic,
};

inline std::string to_string(TheoremSchedule t) {
  switch (t) {
    case TheoremSchedule::ocgd_strongly_convex: return "ocgd_strongly_convex";
    case TheoremSchedule::ocgd_convex_static: return "ocgd_convex_static";
    case TheoremSchedule::ocgd_convex_dynamic: return "ocgd_convex_dynamic";
    case TheoremSchedule::ocgd_convex_sqrtk: return "ocgd_convex_sqrtk";
    case TheoremSchedule::congd_dynamic: return "congd_dynamic";
  }
  return "";
}

inline TheoremSchedule theorem_schedule_from_string(const std::string& s) {
  for (auto t : {TheoremSchedule::ocgd_strongly_convex, TheoremSchedule::ocgd_convex_static,
                 TheoremSchedule::ocgd_convex_dynamic, TheoremSchedule::ocgd_convex_sqrtk,
                 TheoremSchedule::congd_dynamic})
    if (to_string(t) == s) return t;
  throw AlgorithmError("unknown schedule '" + s + "'");
}

struct ScheduleConstants {
  std::optional<double> mu, G, lambda, N, D, P_K, K;
};

namespace detail {
inline double need(const std::optional<double>& v, const char* name) {
  if (!v) throw AlgorithmError(std::string("schedule needs constant '") + name + "'");
  return *v;
}
inline double need_positive(const std::optional<double>& v, const char* name) {
  const double x = need(v, name);
  if (!(x > 0.0)) throw AlgorithmError(std::string("constant '") + name + "' must be positive");
  return x;
}
inline double need_lambda(const std::optional<double>& v) {
  const double x = need(v, "lambda");
  if (!(x >= 0.0 && x < 1.0)) throw AlgorithmError("constant 'lambda' must lie in [0, 1)");
  return x;
}
}  // namespace detail

/// C = G (1 + 2 / (1 - lambda)).
inline double gradient_constant(double G, double lambda) { return G * (1.0 + 2.0 / (1.0 - lambda)); }

inline StepSchedule schedule_from_theorem(TheoremSchedule which, const ScheduleConstants& c) {
  using detail::need;
  using detail::need_lambda;
  using detail::need_positive;
  StepSchedule s;
  s.provenance = to_string(which);
  switch (which) {
    case TheoremSchedule::ocgd_strongly_convex: {
      s.kind = ScheduleKind::inverse_k;
      s.base = 1.0 / need_positive(c.mu, "mu");
      break;
    }
    case TheoremSchedule::ocgd_convex_static: {
      const double N = need_positive(c.N, "N"), D = need_positive(c.D, "D");
      const double C = gradient_constant(need_positive(c.G, "G"), need_lambda(c.lambda));
      s.base = std::sqrt(N) * D / (C * std::sqrt(need_positive(c.K, "K")));
      break;
    }
    case TheoremSchedule::ocgd_convex_dynamic: {
      const double N = need_positive(c.N, "N"), D = need_positive(c.D, "D");
      const double P = need(c.P_K, "P_K");
      if (P < 0.0) throw AlgorithmError("constant 'P_K' must be nonnegative");
      const double C = gradient_constant(need_positive(c.G, "G"), need_lambda(c.lambda));
      const double nd = std::sqrt(N) * D;
      s.base = std::sqrt(nd * (nd + 3.0 * P)) / (C * std::sqrt(need_positive(c.K, "K")));
      break;
    }
    case TheoremSchedule::ocgd_convex_sqrtk: {
      const double N = need_positive(c.N, "N"), D = need_positive(c.D, "D");
      const double G = need_positive(c.G, "G"), lambda = need_lambda(c.lambda);
      s.kind = ScheduleKind::inverse_sqrt_k;
      s.base = std::sqrt(N) * D / (G * (1.0 + 3.42 / (1.0 - lambda)));
      break;
    }
    case TheoremSchedule::congd_dynamic: {
      const double N = need_positive(c.N, "N"), D = need_positive(c.D, "D");
      const double P = need(c.P_K, "P_K");
      if (P < 0.0) throw AlgorithmError("constant 'P_K' must be nonnegative");
      const double nd = std::sqrt(N) * D;
      s.base = std::sqrt(nd * (nd + 3.0 * P) / need_positive(c.K, "K"));
      break;
    }
  }
  return s;
}

}  // namespace compreg
