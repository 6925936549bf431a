#include "compreg/losses.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace compreg;

namespace {

const Domain kUnit = Domain::box(-1.0, 1.0);

Point p1(double x) { return make_point({x}); }

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

LossFunction random_loss(LossFamily fam, int dim, std::mt19937_64& rng) {
  Point c(dim);
  for (int j = 0; j < dim; ++j) c(j) = uniform(rng, -0.8, 0.8);
  switch (fam) {
    case LossFamily::quadratic: return LossFunction::quadratic(uniform(rng, 0.5, 3.0), c);
    case LossFamily::absolute_drift: return LossFunction::absolute_drift(c);
    case LossFamily::pseudo_sigmoid: return LossFunction::pseudo_sigmoid(uniform(rng, 1.0, 6.0), c);
    case LossFamily::sine_quadratic:
      return LossFunction::sine_quadratic(uniform(rng, 0.2, 1.5), uniform(rng, 1.0, 4.0), c);
  }
  return LossFunction{};
}

Point central_difference(const LossFunction& f, const Point& x, double h) {
  Point g(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Point a = x, b = x;
    a(j) += h;
    b(j) -= h;
    g(j) = (f.value(a) - f.value(b)) / (2.0 * h);
  }
  return g;
}

}  // namespace

TEST(Evaluate, QuadraticValues) {
  auto f = LossFunction::quadratic(2.0, p1(0.0));
  EXPECT_DOUBLE_EQ(evaluate(f, p1(1.0), kUnit), 1.0);
  EXPECT_DOUBLE_EQ(evaluate(f, p1(0.0), kUnit), 0.0);
}

TEST(Evaluate, SineQuadraticAtCenter) {
  auto f = LossFunction::sine_quadratic(1.0, 3.0, p1(0.0));
  EXPECT_DOUBLE_EQ(evaluate(f, p1(0.0), kUnit), 0.0);
  EXPECT_NEAR(evaluate(f, p1(0.5), kUnit), 0.125 + std::pow(std::sin(1.5), 2), 1e-15);
}

TEST(Evaluate, OutOfDomain) {
  auto f = LossFunction::quadratic(2.0, p1(0.0));
  try {
    evaluate(f, p1(1.5), kUnit);
    FAIL();
  } catch (const LossError& e) {
    EXPECT_STREQ(e.what(), "out of domain");
  }
  EXPECT_THROW(gradient(f, p1(-2.0), kUnit), LossError);
}

TEST(Gradient, QuadraticValues) {
  EXPECT_DOUBLE_EQ(gradient(LossFunction::quadratic(2.0, p1(0.0)), p1(1.0), kUnit)(0), 2.0);
  EXPECT_DOUBLE_EQ(gradient(LossFunction::quadratic(2.0, p1(0.5)), p1(0.5), kUnit)(0), 0.0);
}

TEST(Gradient, SigmoidMatchesFiniteDifference) {
  auto f = LossFunction::pseudo_sigmoid(4.0, p1(0.0));
  const double fd = (f.value(p1(0.7 + 1e-6)) - f.value(p1(0.7 - 1e-6))) / 2e-6;
  EXPECT_NEAR(gradient(f, p1(0.7), kUnit)(0), fd, 1e-5 * std::abs(fd));
}

TEST(GradientProperty, FiniteDifferenceAgreement) {
  std::mt19937_64 rng(11);
  for (auto fam : {LossFamily::quadratic, LossFamily::absolute_drift, LossFamily::pseudo_sigmoid,
                   LossFamily::sine_quadratic}) {
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
      const int dim = t % 2 + 1;
      auto f = random_loss(fam, dim, rng);
      Point x(dim);
      for (int j = 0; j < dim; ++j) x(j) = uniform(rng, -1.0 + 1e-5, 1.0 - 1e-5);
      const Point g = f.gradient(x);
      const Point fd = central_difference(f, x, 1e-6);
      worst = std::max(worst, (g - fd).norm() / std::max(g.norm(), 1e-3));
    }
    EXPECT_LE(worst, 1e-5) << to_string(fam);
  }
}

TEST(LossProperty, QuadraticStrongConvexity) {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 1000; ++t) {
    const int dim = t % 2 + 1;
    auto f = random_loss(LossFamily::quadratic, dim, rng);
    Point x(dim), y(dim);
    for (int j = 0; j < dim; ++j) {
      x(j) = uniform(rng, -1, 1);
      y(j) = uniform(rng, -1, 1);
    }
    const double slack = f.value(y) - f.value(x) - f.gradient(x).dot(y - x) -
                         0.5 * f.curvature * (y - x).squaredNorm();
    EXPECT_GE(slack, -1e-10);
  }
}

TEST(LossProperty, SigmoidPseudoConvexity) {
  std::mt19937_64 rng(13);
  int checked = 0;
  for (int t = 0; t < 1000; ++t) {
    const int dim = t % 2 + 1;
    auto f = random_loss(LossFamily::pseudo_sigmoid, dim, rng);
    const double M = f.lipschitz(Domain::box(-1, 1, dim));
    Point x(dim), y(dim);
    for (int j = 0; j < dim; ++j) {
      x(j) = uniform(rng, -1, 1);
      y(j) = uniform(rng, -1, 1);
    }
    if (f.value(x) < f.value(y)) std::swap(x, y);
    const Point g = f.gradient(x);
    if (g.norm() <= 1e-9) continue;
    ++checked;
    EXPECT_LE(f.value(x) - f.value(y), M * g.dot(x - y) / g.norm() + 1e-12);
  }
  EXPECT_GT(checked, 900);
}

TEST(LossProperty, DeclaredLipschitzBoundsSampledGradients) {
  std::mt19937_64 rng(14);
  for (auto fam : {LossFamily::quadratic, LossFamily::absolute_drift, LossFamily::pseudo_sigmoid,
                   LossFamily::sine_quadratic})
    for (int dim = 1; dim <= 2; ++dim) {
      const Domain dom = Domain::box(-1, 1, dim);
      auto f = random_loss(fam, dim, rng);
      const double G = f.lipschitz(dom);
      Point x(dim);
      for (int t = 0; t < 5000; ++t) {
        for (int j = 0; j < dim; ++j) x(j) = uniform(rng, -1, 1);
        EXPECT_LE(f.gradient(x).norm(), G * (1.0 + 1e-12)) << to_string(fam);
      }
      EXPECT_LE(estimate_lipschitz(f, dom, 10000, 3), 1.05 * G * (1.0 + 1e-12));
    }
}

TEST(LossSum, MatchesTermwiseSum) {
  std::mt19937_64 rng(15);
  for (int dim = 1; dim <= 2; ++dim) {
    const Domain dom = Domain::box(-1, 1, dim);
    LossSum sum(dim);
    std::vector<LossFunction> terms;
    for (int t = 0; t < 40; ++t) {
      auto f = random_loss(static_cast<LossFamily>(t % 4), dim, rng);
      terms.push_back(f);
      sum.add(f, dom);
    }
    Point x(dim);
    for (int t = 0; t < 200; ++t) {
      for (int j = 0; j < dim; ++j) x(j) = uniform(rng, -1, 1);
      double v = 0.0;
      Point g = Point::Zero(dim);
      for (const auto& f : terms) {
        v += f.value(x);
        g += f.gradient(x);
      }
      EXPECT_NEAR(sum.value(x), v, 1e-11 * (1 + std::abs(v)));
      EXPECT_LE((sum.gradient(x) - g).norm(), 1e-10 * (1 + g.norm()));
    }
  }
}

TEST(LossSum, GridEvaluationMatchesPointwise) {
  LossSum sum(1);
  sum.add(LossFunction::sine_quadratic(0.7, 3.0, p1(0.2)), kUnit);
  sum.add(LossFunction::sine_quadratic(1.1, 2.0, p1(-0.4)), kUnit);
  sum.add(LossFunction::absolute_drift(p1(0.1)), kUnit);
  sum.add_quadratic(0.5, p1(0.3), kUnit);
  Grid1D grid(-1, 1, 257);
  std::vector<double> vals;
  sum.evaluate_grid(grid, vals);
  for (std::size_t j = 0; j < grid.size(); ++j) EXPECT_NEAR(vals[j], sum.value(p1(grid[j])), 1e-12);
}

TEST(Minimizer, TwoQuadraticsAverage) {
  std::vector<std::vector<LossFunction>> rows{{LossFunction::quadratic(2, p1(0)), LossFunction::quadratic(2, p1(1))}};
  LossSequence seq(kUnit, 2, rows, "none", 0);
  EXPECT_NEAR(minimizer_per_round(seq, 1)(0), 0.5, 1e-12);
  MinimizerOptions grid;
  grid.method = MinimizerMethod::grid;
  EXPECT_NEAR(minimizer_per_round(seq, 1, grid)(0), 0.5, 1e-12);
}

TEST(Minimizer, SingleCenterWithinSpacing) {
  LossSequence seq(kUnit, 1, {{LossFunction::quadratic(2, p1(0.3))}}, "none", 0);
  MinimizerOptions grid;
  grid.method = MinimizerMethod::grid;
  EXPECT_NEAR(minimizer_per_round(seq, 1, grid)(0), 0.3, 2.0 / 10000);
  EXPECT_NEAR(minimizer_per_round(seq, 1)(0), 0.3, 1e-12);
}

TEST(Minimizer, CenterOutsideDomainGoesToBoundary) {
  LossSequence seq(kUnit, 1, {{LossFunction::quadratic(2, p1(2.0))}}, "none", 0);
  EXPECT_DOUBLE_EQ(minimizer_per_round(seq, 1)(0), 1.0);
  MinimizerOptions grid;
  grid.method = MinimizerMethod::grid;
  EXPECT_DOUBLE_EQ(minimizer_per_round(seq, 1, grid)(0), 1.0);
}

TEST(Minimizer, NonConvexGlobalMinimum) {
  // Dense brute force as the reference.
  auto f = LossFunction::sine_quadratic(1.0, 3.0, p1(0.35));
  LossSequence seq(kUnit, 1, {{f}}, "none", 0);
  double best = -1.0, bv = 1e300;
  for (int j = 0; j <= 200000; ++j) {
    const double x = -1.0 + 2.0 * j / 200000;
    if (f.value(p1(x)) < bv) {
      bv = f.value(p1(x));
      best = x;
    }
  }
  EXPECT_NEAR(minimizer_per_round(seq, 1)(0), best, 2e-5);
}

TEST(Minimizer, TwoDimensional) {
  const Domain box2 = Domain::box(-1, 1, 2);
  LossSequence seq(box2, 1, {{LossFunction::quadratic(2, make_point({0.3, -0.6}))}}, "none", 0);
  const Point m = minimizer_per_round(seq, 1);
  EXPECT_NEAR(m(0), 0.3, 1e-9);
  EXPECT_NEAR(m(1), -0.6, 1e-9);
}

TEST(Minimizer, RejectsThreeDimensions) {
  LossSum sum(3);
  try {
    minimize_sum(sum, kUnit);
    FAIL();
  } catch (const LossError& e) {
    EXPECT_STREQ(e.what(), "grid oracle limited to n <= 2");
  }
}

TEST(BestFixed, StationaryEqualsPerRound) {
  SequenceParams p;
  p.family = LossFamily::sine_quadratic;
  p.n_agents = 3;
  p.horizon = 5;
  p.heterogeneity = 0.4;
  auto seq = make_drifting_sequence(p, kUnit);
  const double fixed = best_fixed_strategy(seq)(0);
  for (std::size_t k = 1; k <= 5; ++k) EXPECT_DOUBLE_EQ(minimizer_per_round(seq, k)(0), fixed);
}

TEST(BestFixed, TwoRoundsAverage) {
  LossSequence seq(kUnit, 1, {{LossFunction::quadratic(2, p1(0))}, {LossFunction::quadratic(2, p1(1))}}, "", 0);
  EXPECT_NEAR(best_fixed_strategy(seq)(0), 0.5, 1e-12);
  MinimizerOptions grid;
  grid.method = MinimizerMethod::grid;
  EXPECT_NEAR(best_fixed_strategy(seq, grid)(0), 0.5, 1e-12);
}

TEST(BestFixed, AllZeroLossesPickSmallestPoint) {
  auto zero = LossFunction::quadratic(0.0, p1(0.0));
  LossSequence seq(kUnit, 1, {{zero}, {zero}}, "", 0);
  EXPECT_DOUBLE_EQ(best_fixed_strategy(seq)(0), -1.0);
  MinimizerOptions grid;
  grid.method = MinimizerMethod::grid;
  EXPECT_DOUBLE_EQ(best_fixed_strategy(seq, grid)(0), -1.0);
  const Domain box2 = Domain::box(-1, 1, 2);
  auto zero2 = LossFunction::quadratic(0.0, make_point({0.0, 0.0}));
  LossSequence seq2(box2, 1, {{zero2}}, "", 0);
  const Point m = best_fixed_strategy(seq2);
  EXPECT_DOUBLE_EQ(m(0), -1.0);
  EXPECT_DOUBLE_EQ(m(1), -1.0);
}

TEST(Sequence, NoDriftHasZeroPathVariation) {
  SequenceParams p;
  p.n_agents = 2;
  p.horizon = 10;
  auto c = compute_comparators(make_drifting_sequence(p, kUnit));
  EXPECT_EQ(c.path_variation, 0.0);
  p.family = LossFamily::sine_quadratic;
  p.heterogeneity = 0.3;
  EXPECT_EQ(compute_comparators(make_drifting_sequence(p, kUnit)).path_variation, 0.0);
}

TEST(Sequence, LinearShiftPathVariation) {
  SequenceParams p;
  p.n_agents = 1;
  p.horizon = 3;
  p.drift = DriftKind::linear;
  p.drift_shift = 0.1;
  auto seq = make_drifting_sequence(p, kUnit);
  EXPECT_NEAR(compute_comparators(seq).path_variation, 0.2, 1e-12);
  EXPECT_EQ(seq.drift_exponent(), 1.0);
}

TEST(Sequence, SinusoidalPathVariationMatchesAnalytic) {
  SequenceParams p;
  p.n_agents = 2;
  p.horizon = 100;
  p.drift = DriftKind::sinusoidal;
  p.heterogeneity = 0.5;
  p.seed = 5;
  auto seq = make_drifting_sequence(p, kUnit);
  // Equal-curvature quadratics: the round minimiser is the clamped mean center.
  std::vector<Point> mins;
  for (std::size_t k = 1; k <= 100; ++k) {
    const double m = 0.5 * (seq.at(k, 0).center(0) + seq.at(k, 1).center(0));
    mins.push_back(p1(std::clamp(m, -1.0, 1.0)));
  }
  EXPECT_NEAR(compute_comparators(seq).path_variation, path_variation(mins), 1e-9);
  EXPECT_GT(path_variation(mins), 0.0);
  EXPECT_EQ(seq.drift_exponent(), 0.5);
}

TEST(Sequence, DeterministicAndHeterogeneous) {
  SequenceParams p;
  p.n_agents = 4;
  p.horizon = 7;
  p.heterogeneity = 0.5;
  p.seed = 42;
  auto a = make_drifting_sequence(p, kUnit), b = make_drifting_sequence(p, kUnit);
  for (std::size_t k = 1; k <= 7; ++k)
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(a.at(k, i).center(0), b.at(k, i).center(0));
  EXPECT_NE(a.at(1, 0).center(0), a.at(1, 1).center(0));
}

TEST(Domain, Validation) {
  EXPECT_THROW(Domain::box(0.5, 1.0), LossError);
  EXPECT_THROW(Domain::box(1.0, -1.0), LossError);
  EXPECT_DOUBLE_EQ(Domain::box(-1, 1).diameter_inf(), 2.0);
}
