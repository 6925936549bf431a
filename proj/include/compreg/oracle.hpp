// Exponential perturbations and the approximate offline optimisation oracle
// used by the perturbed-leader learner.
//
// The oracle minimises V(x) - sigma * x over a 1-D interval by exhaustive grid
// search followed by one golden-section pass on the cells around the best grid
// point. Its suboptimality is certified from the grid spacing h:
//   rho  = min(G_V * h / 2, L2_V * h^2 / 8)   (Lipschitz / curvature cell bounds)
//   beta = h                                   (linear term, |sigma| * h / 2 <= beta |sigma|)
#pragma once

#include "compreg/losses.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace compreg {

class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent generator for (master seed, agent, round); identical inputs give
/// identical draws regardless of the order streams are created in.
class RngStream {
 public:
  RngStream(std::uint64_t master, std::uint64_t agent, std::uint64_t round)
      : engine_(splitmix64(splitmix64(splitmix64(master) ^ agent) ^ round)) {}
  explicit RngStream(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  /// Uniform in (0, 1] with 53 bits of resolution.
  double uniform_open_closed() {
    return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
  }

 private:
  std::mt19937_64 engine_;
};

/// Inverse CDF of exp(eta): X = -ln(U) / eta.
inline double exponential_from_uniform(double eta, double u) {
  if (!(eta > 0.0)) throw OracleError("exponential rate must be positive");
  if (!(u > 0.0 && u <= 1.0)) throw OracleError("uniform draw must lie in (0, 1]");
  return -std::log(u) / eta;
}

inline double sample_exponential(double eta, RngStream& rng) {
  if (!(eta > 0.0)) throw OracleError("exponential rate must be positive");
  return exponential_from_uniform(eta, rng.uniform_open_closed());
}

struct OracleSpec {
  double rho = 0.0;
  double beta = 0.0;
  std::size_t grid_points = 2001;
  double lower = -1.0;
  double upper = 1.0;

  double spacing() const {
    return (upper - lower) / static_cast<double>(grid_points - 1);
  }
};

/// Certified (rho, beta) for an objective with the given Lipschitz and
/// curvature bounds on a grid of `points` points over [lower, upper].
inline OracleSpec certify_grid(double lower, double upper, std::size_t points,
                               double lipschitz, double curvature) {
  if (points < 2) throw OracleError("oracle grid needs at least 2 points");
  OracleSpec spec;
  spec.lower = lower;
  spec.upper = upper;
  spec.grid_points = points;
  const double h = spec.spacing();
  spec.rho = std::min(lipschitz * h / 2.0, curvature * h * h / 8.0);
  spec.beta = h;
  return spec;
}

/// Smallest grid (capped at `max_points`) whose certificate satisfies
/// rho <= c / sqrt(K) and beta <= c / K, for an objective whose bounds never
/// exceed (lipschitz, curvature) during the run.
inline OracleSpec spec_for_horizon(double lower, double upper, std::size_t horizon,
                                   double lipschitz, double curvature, double c = 1.0,
                                   std::size_t max_points = 400001) {
  const double K = static_cast<double>(horizon);
  const double width = upper - lower;
  const double rho_target = c / std::sqrt(K);
  double h = c / K;  // beta target
  const double h_lip = lipschitz > 0.0 ? 2.0 * rho_target / lipschitz : h;
  const double h_curv = curvature > 0.0 ? std::sqrt(8.0 * rho_target / curvature) : h;
  h = std::min(h, std::max(h_lip, h_curv));
  auto points = static_cast<std::size_t>(std::ceil(width / h)) + 1;
  points = std::clamp<std::size_t>(points, 3, max_points);
  return certify_grid(lower, upper, points, lipschitz, curvature);
}

struct OracleAudit {
  bool pass = false;
  double returned_value = 0.0;  // V(x) - sigma x at the returned point
  double fine_infimum = 0.0;    // min over the 10x finer grid
  double allowance = 0.0;       // rho + beta |sigma|
  double slack = 0.0;           // fine_infimum + allowance - returned_value
};

/// Grid oracle bound to one OracleSpec. Holds grid caches, so one instance per
/// thread.
class GridOracle {
 public:
  explicit GridOracle(OracleSpec spec)
      : spec_(spec), grid_(spec.lower, spec.upper, spec.grid_points) {}

  const OracleSpec& spec() const { return spec_; }
  const Grid1D& grid() const { return grid_; }

  /// argmin of objective(x) - sigma x for any callable double(double).
  template <class Objective>
  double minimize(const Objective& objective, double sigma) const {
    values_.resize(grid_.size());
    for (std::size_t j = 0; j < grid_.size(); ++j) values_[j] = objective(grid_[j]);
    return finish(
        [&](double x) { return objective(x); }, sigma);
  }

  double minimize(const LossSum& sum, double sigma) const {
    sum.evaluate_grid(grid_, values_);
    Point p(1);
    return finish(
        [&](double x) {
          p(0) = x;
          return sum.value(p);
        },
        sigma);
  }

  template <class Objective>
  OracleAudit verify(const Objective& objective, double sigma, double returned_x) const {
    const Grid1D& fine = fine_grid();
    double inf = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < fine.size(); ++j) {
      const double v = objective(fine[j]) - sigma * fine[j];
      if (v < inf) inf = v;
    }
    return audit(objective(returned_x) - sigma * returned_x, inf, sigma);
  }

  OracleAudit verify(const LossSum& sum, double sigma, double returned_x) const {
    const Grid1D& fine = fine_grid();
    std::vector<double> vals;
    sum.evaluate_grid(fine, vals);
    double inf = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < fine.size(); ++j) inf = std::min(inf, vals[j] - sigma * fine[j]);
    Point p(1);
    p(0) = returned_x;
    return audit(sum.value(p) - sigma * returned_x, inf, sigma);
  }

 private:
  template <class Pointwise>
  double finish(const Pointwise& objective, double sigma) const {
    std::size_t best = 0;
    double best_val = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < grid_.size(); ++j) {
      if (!std::isfinite(values_[j])) {
        std::ostringstream msg;
        msg << "non-finite objective value at x = " << grid_[j];
        throw OracleError(msg.str());
      }
      const double v = values_[j] - sigma * grid_[j];
      if (v < best_val) {
        best_val = v;
        best = j;
      }
    }
    // Golden-section pass over the two cells around the best grid point.
    double a = grid_[best == 0 ? 0 : best - 1];
    double b = grid_[std::min(best + 1, grid_.size() - 1)];
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    auto f = [&](double x) { return objective(x) - sigma * x; };
    double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < 80 && b - a > 1e-15 * (1.0 + std::abs(a)); ++it) {
      if (fc < fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - inv_phi * (b - a);
        fc = f(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + inv_phi * (b - a);
        fd = f(d);
      }
    }
    const double x = 0.5 * (a + b);
    return f(x) < best_val ? x : grid_[best];
  }

  OracleAudit audit(double returned_value, double inf, double sigma) const {
    OracleAudit r;
    r.returned_value = returned_value;
    r.fine_infimum = inf;
    r.allowance = spec_.rho + spec_.beta * std::abs(sigma);
    r.slack = inf + r.allowance - returned_value;
    r.pass = r.slack >= 0.0;
    return r;
  }

  const Grid1D& fine_grid() const {
    if (!fine_)
      fine_ = std::make_unique<Grid1D>(spec_.lower, spec_.upper, 10 * (spec_.grid_points - 1) + 1);
    return *fine_;
  }

  OracleSpec spec_;
  Grid1D grid_;
  mutable std::vector<double> values_;
  mutable std::unique_ptr<Grid1D> fine_;
};

/// One-shot convenience wrappers.
template <class Objective>
double offline_minimize(const Objective& objective, double sigma, const OracleSpec& spec) {
  return GridOracle(spec).minimize(objective, sigma);
}

template <class Objective>
OracleAudit verify_oracle_call(const Objective& objective, double sigma, double returned_x,
                               const OracleSpec& spec) {
  return GridOracle(spec).verify(objective, sigma, returned_x);
}

}  // namespace compreg
