// Per-round, per-agent loss families over a box domain.
//
// Families:
//   quadratic        w * (mu/2) |x - c|^2                      strongly convex
//   absolute_drift   w * huber_knee(|x - c|)                   convex, |grad| <= w
//   pseudo_sigmoid   w / (1 + exp(-s * sum_j (x_j - c_j)))     pseudo-convex
//   sine_quadratic   w * (|x - c|^2 / 2 + a sum_j sin^2(omega (x_j - c_j)))
//
// `w` is a positive scale used to check scale-invariance properties; it is 1
// everywhere else. Decisions live in at most two dimensions.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace compreg {

/// Decision vector of one agent; dimension 1 or 2, stored inline.
using Point = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 2, 1>;

class LossError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline Point make_point(std::initializer_list<double> values) {
  Point p(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double v : values) p(i++) = v;
  return p;
}

struct Domain {
  Point lower;
  Point upper;

  Domain(Point lo, Point hi) : lower(std::move(lo)), upper(std::move(hi)) {
    if (lower.size() != upper.size() || lower.size() < 1 || lower.size() > 2)
      throw LossError("domain dimension must be 1 or 2");
    for (Eigen::Index j = 0; j < lower.size(); ++j) {
      if (!(lower(j) < upper(j))) throw LossError("domain needs lower < upper");
      if (lower(j) > 0.0 || upper(j) < 0.0) throw LossError("domain must contain the origin");
    }
  }

  static Domain box(double lo, double hi, int dimension = 1) {
    return Domain(Point::Constant(dimension, lo), Point::Constant(dimension, hi));
  }

  int dimension() const { return static_cast<int>(lower.size()); }
  /// max_j (upper_j - lower_j)
  double diameter_inf() const { return (upper - lower).maxCoeff(); }

  bool contains(const Point& x, double slack = 1e-12) const {
    if (x.size() != lower.size()) return false;
    for (Eigen::Index j = 0; j < x.size(); ++j)
      if (!(x(j) >= lower(j) - slack && x(j) <= upper(j) + slack)) return false;
    return true;
  }

  /// Largest Euclidean distance from `c` to any point of the box.
  double max_distance_from(const Point& c) const {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < c.size(); ++j) {
      const double d = std::max(std::abs(lower(j) - c(j)), std::abs(upper(j) - c(j)));
      acc += d * d;
    }
    return std::sqrt(acc);
  }
};

enum class LossFamily { quadratic, absolute_drift, pseudo_sigmoid, sine_quadratic };

inline std::string to_string(LossFamily f) {
  switch (f) {
    case LossFamily::quadratic: return "quadratic";
    case LossFamily::absolute_drift: return "absolute-drift";
    case LossFamily::pseudo_sigmoid: return "pseudo-sigmoid";
    case LossFamily::sine_quadratic: return "nonconvex-sine-quadratic";
  }
  return "quadratic";
}

inline LossFamily loss_family_from_string(const std::string& s) {
  if (s == "quadratic") return LossFamily::quadratic;
  if (s == "absolute-drift" || s == "absolute_drift") return LossFamily::absolute_drift;
  if (s == "pseudo-sigmoid" || s == "pseudo_sigmoid") return LossFamily::pseudo_sigmoid;
  if (s == "nonconvex-sine-quadratic" || s == "sine-quadratic" || s == "sine_quadratic")
    return LossFamily::sine_quadratic;
  throw LossError("unknown loss family '" + s + "'");
}

inline bool is_convex(LossFamily f) {
  return f == LossFamily::quadratic || f == LossFamily::absolute_drift;
}

namespace detail {
inline double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}
// max |d^2/dz^2 logistic(z)| = 1 / (6 sqrt 3)
inline constexpr double kLogisticCurvature = 0.096225044864937627;
}  // namespace detail

struct LossFunction {
  LossFamily family = LossFamily::quadratic;
  Point center = Point::Zero(1);
  double curvature = 1.0;   // mu (quadratic)
  double amplitude = 1.0;   // a (sine-quadratic)
  double frequency = 3.0;   // omega (sine-quadratic)
  double steepness = 4.0;   // s (pseudo-sigmoid)
  double knee = 1e-3;       // Huber knee (absolute-drift)
  double scale = 1.0;       // w

  static LossFunction quadratic(double mu, Point c) {
    LossFunction f;
    f.family = LossFamily::quadratic;
    f.curvature = mu;
    f.center = std::move(c);
    return f;
  }
  static LossFunction absolute_drift(Point c, double knee = 1e-3) {
    LossFunction f;
    f.family = LossFamily::absolute_drift;
    f.center = std::move(c);
    f.knee = knee;
    return f;
  }
  static LossFunction pseudo_sigmoid(double s, Point c) {
    LossFunction f;
    f.family = LossFamily::pseudo_sigmoid;
    f.steepness = s;
    f.center = std::move(c);
    return f;
  }
  static LossFunction sine_quadratic(double a, double omega, Point c) {
    LossFunction f;
    f.family = LossFamily::sine_quadratic;
    f.amplitude = a;
    f.frequency = omega;
    f.center = std::move(c);
    return f;
  }

  int dimension() const { return static_cast<int>(center.size()); }

  LossFunction scaled(double factor) const {
    LossFunction f = *this;
    f.scale *= factor;
    return f;
  }

  /// Unchecked value; callers guarantee x is inside the domain.
  double value(const Point& x) const {
    const Point d = x - center;
    switch (family) {
      case LossFamily::quadratic:
        return scale * 0.5 * curvature * d.squaredNorm();
      case LossFamily::absolute_drift: {
        const double r = d.norm();
        return scale * (r <= knee ? r * r / (2.0 * knee) : r - 0.5 * knee);
      }
      case LossFamily::pseudo_sigmoid:
        return scale * detail::logistic(steepness * d.sum());
      case LossFamily::sine_quadratic: {
        double s2 = 0.0;
        for (Eigen::Index j = 0; j < d.size(); ++j) {
          const double s = std::sin(frequency * d(j));
          s2 += s * s;
        }
        return scale * (0.5 * d.squaredNorm() + amplitude * s2);
      }
    }
    return 0.0;
  }

  Point gradient(const Point& x) const {
    const Point d = x - center;
    switch (family) {
      case LossFamily::quadratic:
        return scale * curvature * d;
      case LossFamily::absolute_drift: {
        const double r = d.norm();
        if (r <= knee) return (scale / knee) * d;
        return (scale / r) * d;
      }
      case LossFamily::pseudo_sigmoid: {
        const double sg = detail::logistic(steepness * d.sum());
        return Point::Constant(d.size(), scale * steepness * sg * (1.0 - sg));
      }
      case LossFamily::sine_quadratic: {
        Point g = d;
        for (Eigen::Index j = 0; j < d.size(); ++j)
          g(j) += amplitude * frequency * std::sin(2.0 * frequency * d(j));
        return scale * g;
      }
    }
    return Point::Zero(d.size());
  }

  /// Analytic bound on |gradient| over the box.
  double lipschitz(const Domain& dom) const {
    const double reach = dom.max_distance_from(center);
    const double n = static_cast<double>(center.size());
    switch (family) {
      case LossFamily::quadratic:
        return scale * curvature * reach;
      case LossFamily::absolute_drift:
        return scale * std::min(1.0, reach / knee);
      case LossFamily::pseudo_sigmoid:
        return scale * std::abs(steepness) * std::sqrt(n) / 4.0;
      case LossFamily::sine_quadratic: {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < center.size(); ++j) {
          const double dj = std::max(std::abs(dom.lower(j) - center(j)),
                                     std::abs(dom.upper(j) - center(j)));
          acc += (dj + amplitude * frequency) * (dj + amplitude * frequency);
        }
        return scale * std::sqrt(acc);
      }
    }
    return 0.0;
  }

  /// Bound on the largest Hessian eigenvalue magnitude over the box.
  double curvature_bound() const {
    const double n = static_cast<double>(center.size());
    switch (family) {
      case LossFamily::quadratic: return scale * curvature;
      case LossFamily::absolute_drift: return scale / knee;
      case LossFamily::pseudo_sigmoid:
        return scale * steepness * steepness * n * detail::kLogisticCurvature;
      case LossFamily::sine_quadratic:
        return scale * (1.0 + 2.0 * amplitude * frequency * frequency);
    }
    return 0.0;
  }
};

/// Checked evaluation: throws "out of domain" when x leaves the box.
inline double evaluate(const LossFunction& f, const Point& x, const Domain& dom) {
  if (!dom.contains(x)) throw LossError("out of domain");
  return f.value(x);
}

inline Point gradient(const LossFunction& f, const Point& x, const Domain& dom) {
  if (!dom.contains(x)) throw LossError("out of domain");
  return f.gradient(x);
}

/// Uniform grid on a 1-D interval with cached trigonometric tables, so that
/// collapsed sine terms cost one multiply-add per point. The cache makes a
/// Grid1D single-threaded.
class Grid1D {
 public:
  Grid1D(double lower, double upper, std::size_t points) : lower_(lower), upper_(upper) {
    if (points < 2) throw LossError("grid needs at least 2 points");
    xs_.resize(points);
    const double h = (upper - lower) / static_cast<double>(points - 1);
    for (std::size_t j = 0; j < points; ++j) xs_[j] = lower + h * static_cast<double>(j);
    xs_.back() = upper;
    spacing_ = h;
  }

  std::size_t size() const { return xs_.size(); }
  double spacing() const { return spacing_; }
  double lower() const { return lower_; }
  double upper() const { return upper_; }
  const std::vector<double>& points() const { return xs_; }
  double operator[](std::size_t j) const { return xs_[j]; }

  /// cos(2 omega x_j) and sin(2 omega x_j).
  const std::pair<std::vector<double>, std::vector<double>>& trig(double omega) const {
    auto it = trig_.find(omega);
    if (it != trig_.end()) return it->second;
    std::vector<double> c(xs_.size()), s(xs_.size());
    for (std::size_t j = 0; j < xs_.size(); ++j) {
      c[j] = std::cos(2.0 * omega * xs_[j]);
      s[j] = std::sin(2.0 * omega * xs_[j]);
    }
    return trig_.emplace(omega, std::make_pair(std::move(c), std::move(s))).first->second;
  }

 private:
  double lower_, upper_, spacing_ = 0.0;
  std::vector<double> xs_;
  mutable std::map<double, std::pair<std::vector<double>, std::vector<double>>> trig_;
};

/// A sum of losses in one shared variable. Quadratic parts and sine parts with
/// equal (amplitude, frequency) collapse into sufficient statistics, so
/// cumulative objectives over thousands of rounds stay O(1) to evaluate.
/// Huber and sigmoid terms are kept individually.
class LossSum {
 public:
  explicit LossSum(int dimension = 1)
      : dim_(dimension), linear_(Point::Zero(dimension)) {}

  int dimension() const { return dim_; }
  double lipschitz_bound() const { return lipschitz_; }
  double curvature_bound() const { return curvature_; }
  std::size_t term_count() const { return terms_; }

  /// Adds (mu/2)|x - c|^2.
  void add_quadratic(double mu, const Point& c, const Domain& dom) {
    quad_ += mu;
    linear_ += mu * c;
    constant_ += 0.5 * mu * c.squaredNorm();
    lipschitz_ += mu * dom.max_distance_from(c);
    curvature_ += mu;
    ++terms_;
  }

  void add(const LossFunction& f, const Domain& dom) {
    if (f.dimension() != dim_) throw LossError("loss dimension mismatch");
    switch (f.family) {
      case LossFamily::quadratic:
        add_quadratic_raw(f.scale * f.curvature, f.center);
        break;
      case LossFamily::sine_quadratic: {
        add_quadratic_raw(f.scale, f.center);
        auto& g = sine_group(f.frequency);
        const double half = 0.5 * f.scale * f.amplitude;
        for (int j = 0; j < dim_; ++j) {
          g.constant += half;
          g.cos_coef(j) += half * std::cos(2.0 * f.frequency * f.center(j));
          g.sin_coef(j) += half * std::sin(2.0 * f.frequency * f.center(j));
        }
        break;
      }
      case LossFamily::absolute_drift:
      case LossFamily::pseudo_sigmoid:
        raw_.push_back(f);
        break;
    }
    lipschitz_ += f.lipschitz(dom);
    curvature_ += f.curvature_bound();
    ++terms_;
  }

  double value(const Point& x) const {
    double v = 0.5 * quad_ * x.squaredNorm() - linear_.dot(x) + constant_;
    for (const auto& g : sines_)
      for (int j = 0; j < dim_; ++j)
        v += g.constant / dim_ - g.cos_coef(j) * std::cos(2.0 * g.frequency * x(j)) -
             g.sin_coef(j) * std::sin(2.0 * g.frequency * x(j));
    for (const auto& f : raw_) v += f.value(x);
    return v;
  }

  Point gradient(const Point& x) const {
    Point g = quad_ * x - linear_;
    for (const auto& s : sines_)
      for (int j = 0; j < dim_; ++j)
        g(j) += 2.0 * s.frequency *
                (s.cos_coef(j) * std::sin(2.0 * s.frequency * x(j)) -
                 s.sin_coef(j) * std::cos(2.0 * s.frequency * x(j)));
    for (const auto& f : raw_) g += f.gradient(x);
    return g;
  }

  /// Values at every grid point (dimension 1 only).
  void evaluate_grid(const Grid1D& grid, std::vector<double>& out) const {
    if (dim_ != 1) throw LossError("grid evaluation is one-dimensional");
    const auto& xs = grid.points();
    out.resize(xs.size());
    const double q = 0.5 * quad_, b = linear_(0);
    double c0 = constant_;
    for (const auto& g : sines_) c0 += g.constant;
    for (std::size_t j = 0; j < xs.size(); ++j) out[j] = (q * xs[j] - b) * xs[j] + c0;
    for (const auto& g : sines_) {
      const auto& [cs, sn] = grid.trig(g.frequency);
      const double a = g.cos_coef(0), s = g.sin_coef(0);
      for (std::size_t j = 0; j < xs.size(); ++j) out[j] -= a * cs[j] + s * sn[j];
    }
    Point p(1);
    for (const auto& f : raw_)
      for (std::size_t j = 0; j < xs.size(); ++j) {
        p(0) = xs[j];
        out[j] += f.value(p);
      }
  }

  /// True when every term is convex or every term is an increasing sigmoid,
  /// so a sign change of the derivative brackets the global minimiser in 1-D.
  bool unimodal() const {
    if (!sines_.empty()) return false;
    bool sigmoid = false, convex = quad_ > 0.0;
    for (const auto& f : raw_) {
      if (f.family == LossFamily::pseudo_sigmoid) {
        if (f.steepness < 0.0) return false;
        sigmoid = true;
      } else {
        convex = true;
      }
    }
    return !(sigmoid && convex);
  }

 private:
  struct SineGroup {
    double frequency;
    double constant = 0.0;
    Point cos_coef, sin_coef;
  };

  void add_quadratic_raw(double mu, const Point& c) {
    quad_ += mu;
    linear_ += mu * c;
    constant_ += 0.5 * mu * c.squaredNorm();
  }

  SineGroup& sine_group(double frequency) {
    for (auto& g : sines_)
      if (g.frequency == frequency) return g;
    sines_.push_back({frequency, 0.0, Point::Zero(dim_), Point::Zero(dim_)});
    return sines_.back();
  }

  int dim_;
  double quad_ = 0.0;
  Point linear_;
  double constant_ = 0.0;
  std::vector<SineGroup> sines_;
  std::vector<LossFunction> raw_;
  double lipschitz_ = 0.0;
  double curvature_ = 0.0;
  std::size_t terms_ = 0;
};

// ---------------------------------------------------------------------------
// Minimisers used as regret comparators.

enum class MinimizerMethod { automatic, grid, bisection };

struct MinimizerOptions {
  std::size_t grid_points = 10001;  // per axis in 1-D
  std::size_t grid_points_2d = 401;  // per axis in 2-D
  MinimizerMethod method = MinimizerMethod::automatic;
};

namespace detail {

// Bisection on the derivative inside [a, b]; assumes f'(a) < 0 < f'(b).
inline double derivative_root(const LossSum& sum, double a, double b) {
  Point p(1);
  for (int it = 0; it < 200 && b - a > 0.0; ++it) {
    const double m = 0.5 * (a + b);
    if (m <= a || m >= b) break;
    p(0) = m;
    if (sum.gradient(p)(0) < 0.0) a = m;
    else b = m;
  }
  return 0.5 * (a + b);
}

inline double minimize_1d_bisection(const LossSum& sum, double lo, double hi) {
  Point p(1);
  p(0) = lo;
  if (sum.gradient(p)(0) >= 0.0) return lo;
  p(0) = hi;
  if (sum.gradient(p)(0) <= 0.0) return hi;
  return derivative_root(sum, lo, hi);
}

inline double minimize_1d_grid(const LossSum& sum, const Grid1D& grid) {
  std::vector<double> vals;
  sum.evaluate_grid(grid, vals);
  std::size_t best = 0;
  for (std::size_t j = 1; j < vals.size(); ++j)
    if (vals[j] < vals[best]) best = j;
  // One local bisection pass on the bracketing cells.
  const std::size_t lo = best == 0 ? 0 : best - 1;
  const std::size_t hi = std::min(best + 1, grid.size() - 1);
  Point pa(1), pb(1);
  pa(0) = grid[lo];
  pb(0) = grid[hi];
  double x = grid[best];
  const double ga = sum.gradient(pa)(0), gb = sum.gradient(pb)(0);
  if (ga < 0.0 && gb > 0.0) {
    const double r = derivative_root(sum, grid[lo], grid[hi]);
    Point pr(1), pbest(1);
    pr(0) = r;
    pbest(0) = x;
    if (sum.value(pr) < sum.value(pbest)) x = r;
  }
  return x;
}

inline Point minimize_2d_grid(const LossSum& sum, const Domain& dom, std::size_t per_axis) {
  if (per_axis < 2) throw LossError("grid needs at least 2 points");
  const double hx = (dom.upper(0) - dom.lower(0)) / static_cast<double>(per_axis - 1);
  const double hy = (dom.upper(1) - dom.lower(1)) / static_cast<double>(per_axis - 1);
  Point p(2), best(2);
  double best_val = std::numeric_limits<double>::infinity();
  // Lexicographic order: first coordinate outermost, strict improvement only.
  for (std::size_t a = 0; a < per_axis; ++a)
    for (std::size_t b = 0; b < per_axis; ++b) {
      p(0) = dom.lower(0) + hx * static_cast<double>(a);
      p(1) = dom.lower(1) + hy * static_cast<double>(b);
      const double v = sum.value(p);
      if (v < best_val) {
        best_val = v;
        best = p;
      }
    }
  // Local refinement: coordinate-wise bisection within one cell.
  const double h[2] = {hx, hy};
  for (int sweep = 0; sweep < 2; ++sweep)
    for (int j = 0; j < 2; ++j) {
      Point a = best, b = best;
      a(j) = std::max(dom.lower(j), best(j) - h[j]);
      b(j) = std::min(dom.upper(j), best(j) + h[j]);
      if (sum.gradient(a)(j) < 0.0 && sum.gradient(b)(j) > 0.0) {
        double lo = a(j), hi = b(j);
        Point m = best;
        for (int it = 0; it < 200; ++it) {
          m(j) = 0.5 * (lo + hi);
          if (m(j) <= lo || m(j) >= hi) break;
          if (sum.gradient(m)(j) < 0.0) lo = m(j);
          else hi = m(j);
        }
        m(j) = 0.5 * (lo + hi);
        if (sum.value(m) < sum.value(best)) best = m;
      }
    }
  return best;
}

}  // namespace detail

/// Global minimiser of `sum` over the box. Ties go to the lexicographically
/// smallest grid point. Bisection is only used when the sum is unimodal.
inline Point minimize_sum(const LossSum& sum, const Domain& dom, const MinimizerOptions& opt = {}) {
  if (sum.dimension() > 2 || dom.dimension() > 2) throw LossError("grid oracle limited to n <= 2");
  if (sum.dimension() != dom.dimension()) throw LossError("loss dimension mismatch");
  if (dom.dimension() == 2) return detail::minimize_2d_grid(sum, dom, opt.grid_points_2d);
  MinimizerMethod m = opt.method;
  if (m == MinimizerMethod::automatic)
    m = sum.unimodal() ? MinimizerMethod::bisection : MinimizerMethod::grid;
  Point x(1);
  if (m == MinimizerMethod::bisection) {
    if (!sum.unimodal()) throw LossError("bisection minimiser needs a unimodal sum");
    x(0) = detail::minimize_1d_bisection(sum, dom.lower(0), dom.upper(0));
  } else {
    x(0) = detail::minimize_1d_grid(sum, Grid1D(dom.lower(0), dom.upper(0), opt.grid_points));
  }
  return x;
}

// ---------------------------------------------------------------------------
// Loss sequences.

enum class DriftKind { none, linear, sinusoidal };

inline std::string to_string(DriftKind d) {
  switch (d) {
    case DriftKind::none: return "none";
    case DriftKind::linear: return "linear";
    case DriftKind::sinusoidal: return "sinusoidal";
  }
  return "none";
}

inline DriftKind drift_kind_from_string(const std::string& s) {
  if (s == "none") return DriftKind::none;
  if (s == "linear") return DriftKind::linear;
  if (s == "sinusoidal") return DriftKind::sinusoidal;
  throw LossError("unknown drift '" + s + "'");
}

struct SequenceParams {
  LossFamily family = LossFamily::quadratic;
  std::size_t n_agents = 1;
  std::size_t horizon = 1;
  DriftKind drift = DriftKind::none;
  double heterogeneity = 0.0;   // half-width of the per-agent center spread
  std::uint64_t seed = 1;
  int dimension = 1;
  double center_offset = 0.0;   // common base center
  double drift_amplitude = 0.2;
  double drift_shift = 0.0;     // per-round linear shift; 0 derives amplitude / (K - 1)
  double drift_exponent = 0.5;  // sinusoidal: cycles = K^exponent
  bool balanced_phases = false; // sinusoidal: agent phases spread over 2 pi
  double curvature = 2.0;
  double amplitude = 1.0;
  double frequency = 3.0;
  double steepness = 4.0;
  double knee = 1e-3;
};

class LossSequence {
 public:
  LossSequence(Domain domain, std::size_t n_agents, std::vector<std::vector<LossFunction>> rows,
               std::string drift_spec, double drift_exponent)
      : domain_(std::move(domain)),
        n_agents_(n_agents),
        rows_(std::move(rows)),
        drift_spec_(std::move(drift_spec)),
        drift_exponent_(drift_exponent) {
    if (rows_.empty()) throw LossError("loss sequence needs K >= 1");
    for (const auto& r : rows_)
      if (r.size() != n_agents_) throw LossError("ragged loss sequence");
  }

  std::size_t horizon() const { return rows_.size(); }
  std::size_t n_agents() const { return n_agents_; }
  const Domain& domain() const { return domain_; }
  /// Round k is 1-based.
  const std::vector<LossFunction>& round(std::size_t k) const { return rows_.at(k - 1); }
  const LossFunction& at(std::size_t k, std::size_t agent) const { return rows_.at(k - 1).at(agent); }
  const std::string& drift_spec() const { return drift_spec_; }
  double drift_exponent() const { return drift_exponent_; }

  LossSequence scaled(double factor) const {
    auto rows = rows_;
    for (auto& r : rows)
      for (auto& f : r) f = f.scaled(factor);
    return LossSequence(domain_, n_agents_, std::move(rows), drift_spec_, drift_exponent_);
  }

  /// Largest analytic per-agent Lipschitz constant over all rounds.
  double max_agent_lipschitz() const {
    double g = 0.0;
    for (const auto& r : rows_)
      for (const auto& f : r) g = std::max(g, f.lipschitz(domain_));
    return g;
  }

  /// Lipschitz constant of the stacked F(x) = sum_i f_i(x_i): max over rounds
  /// of sqrt(sum_i G_i^2).
  double stacked_lipschitz() const {
    double g = 0.0;
    for (const auto& r : rows_) {
      double acc = 0.0;
      for (const auto& f : r) acc += f.lipschitz(domain_) * f.lipschitz(domain_);
      g = std::max(g, std::sqrt(acc));
    }
    return g;
  }

 private:
  Domain domain_;
  std::size_t n_agents_;
  std::vector<std::vector<LossFunction>> rows_;
  std::string drift_spec_;
  double drift_exponent_;
};

inline LossFunction make_loss(const SequenceParams& p, Point center) {
  switch (p.family) {
    case LossFamily::quadratic: return LossFunction::quadratic(p.curvature, std::move(center));
    case LossFamily::absolute_drift: return LossFunction::absolute_drift(std::move(center), p.knee);
    case LossFamily::pseudo_sigmoid: return LossFunction::pseudo_sigmoid(p.steepness, std::move(center));
    case LossFamily::sine_quadratic:
      return LossFunction::sine_quadratic(p.amplitude, p.frequency, std::move(center));
  }
  throw LossError("unknown family");
}

/// Deterministic given the seed. Centers: c^i_k = offset + heterogeneity * u_i
/// + drift(i, k), with u_i uniform in [-1, 1]^n.
inline LossSequence make_drifting_sequence(const SequenceParams& p, const Domain& domain) {
  if (p.horizon < 1 || p.n_agents < 1) throw LossError("need K >= 1 and N >= 1");
  if (domain.dimension() != p.dimension) throw LossError("domain dimension mismatch");
  std::mt19937_64 rng(p.seed);
  std::vector<Point> base(p.n_agents, Point::Constant(p.dimension, p.center_offset));
  for (auto& b : base)
    for (int j = 0; j < p.dimension; ++j) {
      // 53-bit uniform in [0, 1), mapped to [-1, 1).
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      b(j) += p.heterogeneity * (2.0 * u - 1.0);
    }

  const double K = static_cast<double>(p.horizon);
  double shift = p.drift_shift;
  if (p.drift == DriftKind::linear && shift == 0.0)
    shift = p.horizon > 1 ? p.drift_amplitude / (K - 1.0) : 0.0;
  const double cycles = std::pow(K, p.drift_exponent);

  std::string spec = to_string(p.drift);
  double exponent = 0.0;
  if (p.drift == DriftKind::linear) {
    spec += " shift=" + std::to_string(shift);
    exponent = p.drift_shift == 0.0 ? 0.0 : 1.0;
  } else if (p.drift == DriftKind::sinusoidal) {
    spec += " amplitude=" + std::to_string(p.drift_amplitude) + " cycles=K^" +
            std::to_string(p.drift_exponent) + (p.balanced_phases ? " balanced" : "");
    exponent = p.drift_exponent;
  }

  std::vector<std::vector<LossFunction>> rows(p.horizon);
  for (std::size_t k = 1; k <= p.horizon; ++k) {
    auto& row = rows[k - 1];
    row.reserve(p.n_agents);
    for (std::size_t i = 0; i < p.n_agents; ++i) {
      double off = 0.0;
      const double t = static_cast<double>(k - 1);
      if (p.drift == DriftKind::linear) {
        off = shift * t;
      } else if (p.drift == DriftKind::sinusoidal) {
        const double phase = p.balanced_phases
                                 ? 2.0 * std::numbers::pi * static_cast<double>(i) /
                                       static_cast<double>(p.n_agents)
                                 : 0.0;
        off = p.drift_amplitude * std::sin(2.0 * std::numbers::pi * cycles * t / K + phase);
      }
      Point c = base[i].array() + off;
      row.push_back(make_loss(p, std::move(c)));
    }
  }
  return LossSequence(domain, p.n_agents, std::move(rows), spec, exponent);
}

/// Dynamic comparator x_{*,k}: minimiser of sum_i f^i_k over the common box.
inline Point minimizer_per_round(const LossSequence& seq, std::size_t k,
                                 const MinimizerOptions& opt = {}) {
  LossSum sum(seq.domain().dimension());
  for (const auto& f : seq.round(k)) sum.add(f, seq.domain());
  return minimize_sum(sum, seq.domain(), opt);
}

/// Static comparator x_*: minimiser of sum_k sum_i f^i_k.
inline Point best_fixed_strategy(const LossSequence& seq, const MinimizerOptions& opt = {}) {
  LossSum sum(seq.domain().dimension());
  for (std::size_t k = 1; k <= seq.horizon(); ++k)
    for (const auto& f : seq.round(k)) sum.add(f, seq.domain());
  return minimize_sum(sum, seq.domain(), opt);
}

struct Comparators {
  Point static_point;
  std::vector<Point> per_round;  // index k - 1
  double path_variation = 0.0;   // sum_k |x_{*,k} - x_{*,k+1}|
};

inline double path_variation(const std::vector<Point>& minimizers) {
  double p = 0.0;
  for (std::size_t k = 0; k + 1 < minimizers.size(); ++k)
    p += (minimizers[k] - minimizers[k + 1]).norm();
  return p;
}

inline Comparators compute_comparators(const LossSequence& seq, const MinimizerOptions& opt = {}) {
  Comparators c;
  c.per_round.reserve(seq.horizon());
  for (std::size_t k = 1; k <= seq.horizon(); ++k) c.per_round.push_back(minimizer_per_round(seq, k, opt));
  c.path_variation = path_variation(c.per_round);
  c.static_point = best_fixed_strategy(seq, opt);
  return c;
}

/// 1.05 x the largest gradient norm over `samples` uniform draws in the box.
inline double estimate_lipschitz(const LossFunction& f, const Domain& dom, std::size_t samples,
                                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double g = 0.0;
  Point x(dom.dimension());
  for (std::size_t s = 0; s < samples; ++s) {
    for (int j = 0; j < dom.dimension(); ++j) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      x(j) = dom.lower(j) + u * (dom.upper(j) - dom.lower(j));
    }
    g = std::max(g, f.gradient(x).norm());
  }
  return 1.05 * g;
}

}  // namespace compreg
