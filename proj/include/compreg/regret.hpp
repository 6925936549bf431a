// Composite regret accounting: V(x) = sum_i f^i(x^i) + c x^T (I - Pi) x,
// static and dynamic regret ledgers, consensus residuals, closed-form bound
// envelopes and log-log slope fits.
#pragma once

#include "compreg/algorithms.hpp"
#include "compreg/losses.hpp"
#include "compreg/topology.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace compreg {

class RegretError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class NetworkNorm { l2sq, l1 };

struct CompositeValue {
  double f_loss = 0.0;
  double network_loss = 0.0;  // c x^T (I - Pi) x  (l1: c/2 sum_i sum_j pi_ij |x^i - x^j|_1)
  double double_sum = 0.0;    // c sum_i sum_j pi_ij |x^i - x^j|^2, twice network_loss
  double value = 0.0;         // f_loss + network_loss
};

/// Agent i's share of the network term: (c/2) sum_j pi_ij d(x^i, x^j).
inline double network_share(const Eigen::MatrixXd& x, const MixingMatrix& pi, double c,
                            std::size_t i, NetworkNorm norm = NetworkNorm::l2sq) {
  double acc = 0.0;
  const auto ii = static_cast<Eigen::Index>(i);
  for (std::size_t j = 0; j < pi.size(); ++j) {
    if (j == i || pi(i, j) == 0.0) continue;
    const auto diff = x.row(ii) - x.row(static_cast<Eigen::Index>(j));
    acc += pi(i, j) * (norm == NetworkNorm::l2sq ? diff.squaredNorm() : diff.cwiseAbs().sum());
  }
  return 0.5 * c * acc;
}

/// The quadratic form is evaluated through the pairwise sum, which equals
/// x^T (I - Pi) x for symmetric doubly-stochastic Pi, is nonnegative by
/// construction and exactly zero at consensus.
inline CompositeValue composite_value(const Eigen::MatrixXd& x, const std::vector<LossFunction>& losses,
                                      const MixingMatrix& pi, double c,
                                      NetworkNorm norm = NetworkNorm::l2sq) {
  if (c < 0.0) throw RegretError("regularisation constant must be nonnegative");
  if (static_cast<std::size_t>(x.rows()) != losses.size() || losses.size() != pi.size())
    throw RegretError("agent count mismatch");
  CompositeValue v;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    v.f_loss += losses[i].value(x.row(static_cast<Eigen::Index>(i)).transpose());
    v.network_loss += network_share(x, pi, c, i, norm);
  }
  v.double_sum = 2.0 * v.network_loss;
  v.value = v.f_loss + v.network_loss;
  return v;
}

struct Residual {
  double norm = 0.0;       // |x - 1 xhat^T|_F
  double agent_max = 0.0;  // max_i |x^i - xhat|
  std::vector<double> per_agent;
};

inline Residual consensus_residual(const Eigen::MatrixXd& x) {
  Residual r;
  if (x.rows() == 0) return r;
  // Deviations are taken relative to agent 0 first, so identical rows give
  // exactly zero.
  const Eigen::MatrixXd rel = x.rowwise() - x.row(0);
  const Eigen::RowVectorXd mean = rel.colwise().mean();
  r.per_agent.resize(static_cast<std::size_t>(x.rows()));
  double sq = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double d = (rel.row(i) - mean).norm();
    r.per_agent[static_cast<std::size_t>(i)] = d;
    r.agent_max = std::max(r.agent_max, d);
    sq += d * d;
  }
  r.norm = std::sqrt(sq);
  return r;
}

/// (1/alpha) |(I - Pi) x|_F.
inline double scaled_disagreement(const Eigen::MatrixXd& x, const MixingMatrix& pi, double alpha) {
  return (pi.laplacian() * x).norm() / alpha;
}

/// |grad F(x) + (1/alpha)(I - Pi) x|_F.
inline double composite_gradient_norm(const Eigen::MatrixXd& x, const std::vector<LossFunction>& losses,
                                      const MixingMatrix& pi, double alpha) {
  Eigen::MatrixXd g = pi.laplacian() * x / alpha;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    g.row(ii) += losses[i].gradient(x.row(ii).transpose()).transpose();
  }
  return g.norm();
}

/// |grad F(x)|_F.
inline double stacked_gradient_norm(const Eigen::MatrixXd& x, const std::vector<LossFunction>& losses) {
  double sq = 0.0;
  for (std::size_t i = 0; i < losses.size(); ++i)
    sq += losses[i].gradient(x.row(static_cast<Eigen::Index>(i)).transpose()).squaredNorm();
  return std::sqrt(sq);
}

struct RoundRecord {
  std::size_t k = 0;
  double c = 0.0;
  CompositeValue played;
  double static_value = 0.0;   // V_k at the replicated static comparator
  double dynamic_value = 0.0;  // V_k at the replicated round-k comparator
  double sc_regret = 0.0;      // running
  double dc_regret = 0.0;      // running
  double residual = 0.0;
};

class RegretLedger {
 public:
  RegretLedger() = default;
  explicit RegretLedger(Point static_comparator) : static_(std::move(static_comparator)) {}

  void set_static_comparator(Point p) { static_ = std::move(p); }

  /// Appends round k. The static comparator must be set; the dynamic one is
  /// passed per round.
  const RoundRecord& update(const Eigen::MatrixXd& x, const std::vector<LossFunction>& losses,
                            const MixingMatrix& pi, double c, const std::optional<Point>& dynamic_comparator,
                            NetworkNorm norm = NetworkNorm::l2sq) {
    if (!static_) throw RegretError("static comparator missing");
    if (!dynamic_comparator) throw RegretError("dynamic comparator missing");
    RoundRecord r;
    r.k = records_.size() + 1;
    r.c = c;
    r.played = composite_value(x, losses, pi, c, norm);
    r.static_value = comparator_value(*static_, losses, pi, c, norm);
    r.dynamic_value = comparator_value(*dynamic_comparator, losses, pi, c, norm);
    sc_ += r.played.value - r.static_value;
    dc_ += r.played.value - r.dynamic_value;
    r.sc_regret = sc_;
    r.dc_regret = dc_;
    r.residual = consensus_residual(x).norm;
    records_.push_back(r);
    return records_.back();
  }

  const std::vector<RoundRecord>& records() const { return records_; }
  std::size_t rounds() const { return records_.size(); }
  double sc_regret() const { return sc_; }
  double dc_regret() const { return dc_; }

  /// Largest gap between the running totals and a fresh summation of the
  /// stored per-round pieces.
  double recomputation_error() const {
    double sc = 0.0, dc = 0.0, err = 0.0;
    for (const auto& r : records_) {
      sc += r.played.value - r.static_value;
      dc += r.played.value - r.dynamic_value;
      err = std::max({err, std::abs(sc - r.sc_regret), std::abs(dc - r.dc_regret)});
    }
    return err;
  }

 private:
  static double comparator_value(const Point& p, const std::vector<LossFunction>& losses,
                                 const MixingMatrix& pi, double c, NetworkNorm norm) {
    Eigen::MatrixXd stacked(static_cast<Eigen::Index>(losses.size()), p.size());
    for (Eigen::Index i = 0; i < stacked.rows(); ++i) stacked.row(i) = p.transpose();
    const auto v = composite_value(stacked, losses, pi, c, norm);
    if (v.network_loss != 0.0) throw RegretError("replicated comparator has network loss");
    return v.value;
  }

  std::optional<Point> static_;
  std::vector<RoundRecord> records_;
  double sc_ = 0.0;
  double dc_ = 0.0;
};

// ---------------------------------------------------------------------------
// Bound envelopes.

struct EnvelopeConstants {
  std::optional<double> G, mu, lambda, N, D, P_K, K, zeta;
};

/// S_k = sum_{s=1}^{k-1} alpha_s lambda^{k-1-s}, advanced one round at a time
/// via S_{k+1} = lambda S_k + alpha_k.
class GeometricSum {
 public:
  GeometricSum(const StepSchedule& schedule, double lambda) : schedule_(schedule), lambda_(lambda) {}
  double value() const { return sum_; }
  std::size_t k() const { return k_; }
  void advance() {
    sum_ = lambda_ * sum_ + schedule_.alpha(k_);
    ++k_;
  }

 private:
  StepSchedule schedule_;
  double lambda_;
  double sum_ = 0.0;
  std::size_t k_ = 1;
};

namespace detail {
inline double env_need(const std::optional<double>& v, const char* name) {
  if (!v) throw RegretError(std::string("envelope needs constant '") + name + "'");
  return *v;
}
}  // namespace detail

/// Names:
///   strongly_convex_regret   G^2/(2 mu) (1 + 2/(1-lambda))^2 (1 + log K)
///   static_regret            D C sqrt(N K)
///   dynamic_regret           sqrt(sqrt(N) D (sqrt(N) D + 3 P_K)) C sqrt(K)
///   sqrtk_regret             (3 sqrt(N) D G / 2)(1 + 3.42/(1-lambda)) sqrt(K)
///   congd_dynamic_regret     zeta (1 + 1/(1-lambda)) sqrt(K (N D^2 + 3 sqrt(N) D P_K))
///   consensus                G sum_{s<k} alpha_s lambda^{k-1-s}
///   consensus_normalized     sum_{s<k} alpha_s lambda^{k-1-s}
///   gradient_norm            C = G (1 + 2/(1-lambda))
///   disagreement_inverse_k   2 G / (1-lambda)
///   disagreement_inverse_sqrt_k  3.42 G / (1-lambda)
///   dsgd_gap                 sqrt(N) D G (1 + 2/(1-lambda)) / sqrt(K)
inline double bound_envelope(const std::string& name, const EnvelopeConstants& c,
                             const StepSchedule& schedule = {}, std::size_t k = 1) {
  using detail::env_need;
  auto lambda = [&] {
    const double l = env_need(c.lambda, "lambda");
    if (!(l >= 0.0 && l < 1.0)) throw RegretError("lambda must lie in [0, 1)");
    return l;
  };
  auto C = [&] { return gradient_constant(env_need(c.G, "G"), lambda()); };
  if (name == "strongly_convex_regret") {
    const double G = env_need(c.G, "G"), mu = env_need(c.mu, "mu");
    const double f = 1.0 + 2.0 / (1.0 - lambda());
    return G * G / (2.0 * mu) * f * f * (1.0 + std::log(env_need(c.K, "K")));
  }
  if (name == "static_regret")
    return env_need(c.D, "D") * C() * std::sqrt(env_need(c.N, "N") * env_need(c.K, "K"));
  if (name == "dynamic_regret") {
    const double nd = std::sqrt(env_need(c.N, "N")) * env_need(c.D, "D");
    return std::sqrt(nd * (nd + 3.0 * env_need(c.P_K, "P_K"))) * C() * std::sqrt(env_need(c.K, "K"));
  }
  if (name == "sqrtk_regret") {
    const double nd = std::sqrt(env_need(c.N, "N")) * env_need(c.D, "D");
    return 1.5 * nd * env_need(c.G, "G") * (1.0 + 3.42 / (1.0 - lambda())) *
           std::sqrt(env_need(c.K, "K"));
  }
  if (name == "congd_dynamic_regret") {
    const double N = env_need(c.N, "N"), D = env_need(c.D, "D");
    return env_need(c.zeta, "zeta") * (1.0 + 1.0 / (1.0 - lambda())) *
           std::sqrt(env_need(c.K, "K") * (N * D * D + 3.0 * std::sqrt(N) * D * env_need(c.P_K, "P_K")));
  }
  if (name == "consensus" || name == "consensus_normalized") {
    if (k < 1) throw RegretError("rounds are 1-based");
    GeometricSum s(schedule, lambda());
    while (s.k() < k) s.advance();
    return name == "consensus" ? env_need(c.G, "G") * s.value() : s.value();
  }
  if (name == "gradient_norm") return C();
  if (name == "disagreement_inverse_k") return 2.0 * env_need(c.G, "G") / (1.0 - lambda());
  if (name == "disagreement_inverse_sqrt_k") return 3.42 * env_need(c.G, "G") / (1.0 - lambda());
  if (name == "dsgd_gap")
    return std::sqrt(env_need(c.N, "N")) * env_need(c.D, "D") * C() / std::sqrt(env_need(c.K, "K"));
  throw RegretError("unknown envelope '" + name + "'");
}

// ---------------------------------------------------------------------------
// Slope fits.

/// Least-squares slope of log(regret) against log(K); regrets clipped at 1e-12.
inline double log_log_slope(const std::map<double, double>& curve) {
  if (curve.size() < 2) throw RegretError("slope fit needs at least 2 points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(curve.size());
  for (auto [k, r] : curve) {
    if (!(k > 0.0)) throw RegretError("K values must be positive");
    const double lx = std::log(k), ly = std::log(std::max(r, 1e-12));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// As log_log_slope, but requires at least 4 K values spanning 2 decades.
inline double sublinearity_slope(const std::map<double, double>& curve) {
  if (curve.size() < 4) throw RegretError("sublinearity slope needs at least 4 K values");
  if (curve.rbegin()->first < 100.0 * curve.begin()->first)
    throw RegretError("sublinearity slope needs K values spanning 2 decades");
  return log_log_slope(curve);
}

}  // namespace compreg
