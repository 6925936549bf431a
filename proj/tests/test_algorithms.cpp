#include "compreg/algorithms.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

using namespace compreg;

namespace {

const Domain kUnit = Domain::box(-1.0, 1.0);

Point p1(double x) { return make_point({x}); }

AgentState state(std::initializer_list<double> xs) {
  AgentState s = AgentState::origin(xs.size(), 1);
  Eigen::Index i = 0;
  for (double v : xs) s.x(i++, 0) = v;
  return s;
}

std::vector<LossFunction> random_row(std::size_t n, int dim, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.9, 0.9);
  std::vector<LossFunction> row;
  for (std::size_t i = 0; i < n; ++i) {
    Point c(dim);
    for (int j = 0; j < dim; ++j) c(j) = u(rng);
    row.push_back(i % 2 ? LossFunction::sine_quadratic(0.8, 3.0, c) : LossFunction::quadratic(2.0, c));
  }
  return row;
}

}  // namespace

TEST(Projection, Examples) {
  EXPECT_DOUBLE_EQ(project_box(p1(0.5), kUnit)(0), 0.5);
  EXPECT_DOUBLE_EQ(project_box(p1(3.0), kUnit)(0), 1.0);
  const Point y = project_box(make_point({-2.0, 0.2}), Domain::box(-1, 1, 2));
  EXPECT_DOUBLE_EQ(y(0), -1.0);
  EXPECT_DOUBLE_EQ(y(1), 0.2);
}

TEST(ProjectionProperty, IdempotentAndNonexpansive) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-4, 4);
  for (int t = 0; t < 1000; ++t) {
    const int dim = t % 2 + 1;
    const Domain dom = Domain::box(-1, 1, dim);
    Point y(dim), z(dim);
    for (int j = 0; j < dim; ++j) {
      y(j) = u(rng);
      z(j) = u(rng);
    }
    const Point py = project_box(y, dom), pz = project_box(z, dom);
    EXPECT_TRUE(project_box(py, dom) == py);
    EXPECT_LE((py - pz).norm(), (y - z).norm() + 1e-15);
  }
}

TEST(Ocgd, SingleAgentGradientStep) {
  auto pi = metropolis_mixing(build_graph(GraphKind::complete, 1));
  auto next = ocgd_step(state({1.0}), {LossFunction::quadratic(2, p1(0))}, pi, 0.25, kUnit);
  EXPECT_DOUBLE_EQ(next.x(0, 0), 0.5);
  EXPECT_EQ(next.round, 2u);
}

TEST(Ocgd, PureAveraging) {
  auto pi = metropolis_mixing(build_graph(GraphKind::complete, 2));
  auto zero = LossFunction::quadratic(0.0, p1(0));
  auto next = ocgd_step(state({0.0, 1.0}), {zero, zero}, pi, 0.1, kUnit);
  EXPECT_DOUBLE_EQ(next.x(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(next.x(1, 0), 0.5);
}

TEST(Ocgd, AveragingPlusGradient) {
  auto pi = metropolis_mixing(build_graph(GraphKind::complete, 2));
  auto f = LossFunction::quadratic(2.0, p1(0));
  auto next = ocgd_step(state({0.0, 1.0}), {f, f}, pi, 0.1, kUnit);
  // Hand evaluation of Pi x - alpha grad F.
  EXPECT_NEAR(next.x(0, 0), 0.5 - 0.1 * 0.0, 1e-15);
  EXPECT_NEAR(next.x(1, 0), 0.5 - 0.1 * 2.0, 1e-15);
}

TEST(Ocgd, RejectsNonPositiveStep) {
  auto pi = metropolis_mixing(build_graph(GraphKind::complete, 1));
  EXPECT_THROW(ocgd_step(state({0.0}), {LossFunction::quadratic(2, p1(0))}, pi, 0.0, kUnit), AlgorithmError);
}

TEST(Congd, NormalisedStep) {
  auto pi = metropolis_mixing(build_graph(GraphKind::complete, 1));
  auto next = congd_step(state({1.0}), {LossFunction::quadratic(4, p1(0))}, pi, 0.3, kUnit);
  EXPECT_NEAR(next.x(0, 0), 0.7, 1e-15);
}

TEST(Congd, ZeroGradientHolds) {
  auto pi = metropolis_mixing(build_graph(GraphKind::complete, 2));
  std::vector<LossFunction> row{LossFunction::quadratic(2, p1(0.3)), LossFunction::quadratic(2, p1(1.0))};
  auto next = congd_step(state({0.3, 0.9}), row, pi, 0.1, kUnit);
  EXPECT_DOUBLE_EQ(next.x(0, 0), 0.3);
  EXPECT_NEAR(next.x(1, 0), 0.6 + 0.1, 1e-15);
}

TEST(Congd, OpposingGradients) {
  auto pi = metropolis_mixing(build_graph(GraphKind::complete, 2));
  std::vector<LossFunction> row{LossFunction::quadratic(2, p1(-0.5)), LossFunction::quadratic(2, p1(0.5))};
  auto next = congd_step(state({0.0, 0.0}), row, pi, 0.1, kUnit);
  EXPECT_NEAR(next.x(0, 0), -0.1, 1e-15);
  EXPECT_NEAR(next.x(1, 0), 0.1, 1e-15);
}

TEST(StepProperty, ProcessingOrderIsIrrelevant) {
  std::mt19937_64 rng(22);
  for (int dim = 1; dim <= 2; ++dim) {
    const Domain dom = Domain::box(-1, 1, dim);
    auto pi = metropolis_mixing(build_graph(GraphKind::ring, 6));
    AgentState s = AgentState::origin(6, dim);
    for (int r = 0; r < 20; ++r) {
      auto row = random_row(6, dim, rng);
      auto a = ocgd_step(s, row, pi, 0.2, dom);
      auto c = congd_step(s, row, pi, 0.2, dom);
      std::vector<std::size_t> order(6);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng);
      for (auto i : order) {
        EXPECT_TRUE(ocgd_update_agent(s, row, pi, 0.2, dom, i).transpose() ==
                    a.x.row(static_cast<Eigen::Index>(i)));
        EXPECT_TRUE(congd_update_agent(s, row, pi, 0.2, dom, i).transpose() ==
                    c.x.row(static_cast<Eigen::Index>(i)));
      }
      s = a;
    }
  }
}

TEST(StepProperty, CompositeGradientForm) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  auto pi = metropolis_mixing(build_graph(GraphKind::star, 5));
  for (int t = 0; t < 200; ++t) {
    AgentState s = AgentState::origin(5, 1);
    for (Eigen::Index i = 0; i < 5; ++i) s.x(i, 0) = u(rng);
    auto row = random_row(5, 1, rng);
    const double alpha = 0.01 + 0.1 * (t % 5);
    // Agent-wise update with feedback grad f + (1/alpha) sum_j pi_ij (x^i - x^j).
    const Domain wide = Domain::box(-100, 100);
    auto reference = ocgd_step(s, row, pi, alpha, wide);
    for (std::size_t i = 0; i < 5; ++i) {
      double feedback = row[i].gradient(s.agent(i))(0);
      for (std::size_t j = 0; j < 5; ++j) feedback += pi(i, j) * (s.x(i, 0) - s.x(j, 0)) / alpha;
      EXPECT_NEAR(s.x(i, 0) - alpha * feedback, reference.x(static_cast<Eigen::Index>(i), 0), 1e-12);
    }
  }
}

TEST(StepProperty, CongdScaleInvariance) {
  SequenceParams p;
  p.family = LossFamily::pseudo_sigmoid;
  p.n_agents = 4;
  p.horizon = 200;
  p.drift = DriftKind::sinusoidal;
  p.heterogeneity = 0.3;
  auto seq = make_drifting_sequence(p, kUnit);
  auto scaled = seq.scaled(37.5);
  auto pi = metropolis_mixing(build_graph(GraphKind::ring, 4));
  AgentState a = AgentState::origin(4, 1), b = a;
  for (std::size_t k = 1; k <= 200; ++k) {
    a = congd_step(a, seq.round(k), pi, 0.05, kUnit);
    b = congd_step(b, scaled.round(k), pi, 0.05, kUnit);
    ASSERT_TRUE(a.x == b.x) << "round " << k;
  }
}

TEST(Dinoco, StartsAtOrigin) {
  auto pi = metropolis_mixing(build_graph(GraphKind::ring, 3));
  Dinoco d(pi, kUnit, 0.5, certify_grid(-1, 1, 2001, 1, 1), 1);
  EXPECT_TRUE(d.initial_state().x.isZero());
}

TEST(Dinoco, OracleOnSquare) {
  GridOracle oracle(certify_grid(-1, 1, 2001, 2, 2));
  LossSum sq(1);
  sq.add(LossFunction::quadratic(2.0, p1(0)), kUnit);
  EXPECT_NEAR(oracle.minimize(sq, 0.0), 0.0, oracle.spec().spacing());
  EXPECT_DOUBLE_EQ(oracle.minimize(sq, 2.0), 1.0);
}

TEST(Dinoco, StepMatchesManualOracleCall) {
  auto pi = metropolis_mixing(build_graph(GraphKind::complete, 2));
  const double eta = 0.7;
  const auto spec = certify_grid(-1, 1, 4001, 10, 10);
  Dinoco d(pi, kUnit, eta, spec, 99);
  std::vector<LossFunction> row{LossFunction::sine_quadratic(1, 3, p1(0.2)), LossFunction::quadratic(2, p1(-0.4))};
  AgentState s = state({0.1, -0.3});
  auto next = d.step(s, row);
  GridOracle oracle(spec);
  for (std::size_t i = 0; i < 2; ++i) {
    // Independent objective: f^i(x) + (1/(2 eta)) pi_ij (x - x^j)^2, minus sigma x.
    const std::size_t j = 1 - i;
    auto objective = [&](double x) {
      return row[i].value(p1(x)) + 0.5 / eta * pi(i, j) * (x - s.x(static_cast<Eigen::Index>(j), 0)) *
                                       (x - s.x(static_cast<Eigen::Index>(j), 0));
    };
    RngStream rng(99, i, 2);
    const double sigma = sample_exponential(eta, rng);
    EXPECT_DOUBLE_EQ(d.last_sigma()[i], sigma);
    // Golden-section refinement resolves x only to about sqrt(eps), so compare
    // objective values.
    const double mine = next.x(static_cast<Eigen::Index>(i), 0), ref = oracle.minimize(objective, sigma);
    EXPECT_NEAR(mine, ref, 1e-6);
    EXPECT_NEAR(objective(mine) - sigma * mine, objective(ref) - sigma * ref, 1e-12);
  }
}

TEST(Dinoco, DeterministicGivenSeed) {
  auto pi = metropolis_mixing(build_graph(GraphKind::ring, 4));
  SequenceParams p;
  p.family = LossFamily::sine_quadratic;
  p.n_agents = 4;
  p.horizon = 30;
  p.heterogeneity = 0.5;
  auto seq = make_drifting_sequence(p, kUnit);
  auto run = [&](std::uint64_t seed) {
    Dinoco d(pi, kUnit, 0.3, certify_grid(-1, 1, 1001, 1, 1), seed);
    AgentState s = d.initial_state();
    std::vector<double> trace;
    for (std::size_t k = 1; k <= 30; ++k) {
      s = d.step(s, seq.round(k));
      for (Eigen::Index i = 0; i < 4; ++i) trace.push_back(s.x(i, 0));
    }
    return trace;
  };
  EXPECT_EQ(run(5), run(5));
  EXPECT_NE(run(5), run(6));
}

TEST(Schedule, CongdFormula) {
  ScheduleConstants c;
  c.N = 4;
  c.D = 2;
  c.P_K = 0;
  c.K = 100;
  auto s = schedule_from_theorem(TheoremSchedule::congd_dynamic, c);
  EXPECT_NEAR(s.alpha(1), 0.4, 1e-15);
  EXPECT_NEAR(s.alpha(77), 0.4, 1e-15);
  EXPECT_EQ(s.provenance, "congd_dynamic");
}

TEST(Schedule, StronglyConvex) {
  ScheduleConstants c;
  c.mu = 2;
  auto s = schedule_from_theorem(TheoremSchedule::ocgd_strongly_convex, c);
  EXPECT_DOUBLE_EQ(s.alpha(1), 0.5);
  EXPECT_DOUBLE_EQ(s.alpha(2), 0.25);
}

TEST(Schedule, ConvexStatic) {
  ScheduleConstants c;
  c.N = 1;
  c.D = 2;
  c.G = 1;
  c.lambda = 0;
  c.K = 400;
  EXPECT_NEAR(schedule_from_theorem(TheoremSchedule::ocgd_convex_static, c).alpha(10), 1.0 / 30.0, 1e-15);
}

TEST(Schedule, ConvexDynamicAndSqrtK) {
  ScheduleConstants c;
  c.N = 4;
  c.D = 2;
  c.G = 1;
  c.lambda = 0.5;
  c.K = 100;
  c.P_K = 1;
  // C = 5, sqrt(N) D = 4.
  EXPECT_NEAR(schedule_from_theorem(TheoremSchedule::ocgd_convex_dynamic, c).alpha(3),
              std::sqrt(4.0 * 7.0) / (5.0 * 10.0), 1e-15);
  auto s = schedule_from_theorem(TheoremSchedule::ocgd_convex_sqrtk, c);
  EXPECT_NEAR(s.alpha(4), 4.0 / (1.0 + 6.84) / 2.0, 1e-15);
}

TEST(Schedule, MissingConstantNamed) {
  ScheduleConstants c;
  c.N = 1;
  c.D = 2;
  c.lambda = 0.2;
  c.K = 10;
  try {
    schedule_from_theorem(TheoremSchedule::ocgd_convex_static, c);
    FAIL();
  } catch (const AlgorithmError& e) {
    EXPECT_NE(std::string(e.what()).find("'G'"), std::string::npos);
  }
  EXPECT_THROW(schedule_from_theorem(TheoremSchedule::ocgd_strongly_convex, {}), AlgorithmError);
  EXPECT_THROW(theorem_schedule_from_string("nope"), AlgorithmError);
}

TEST(ScheduleProperty, PositiveNonIncreasing) {
  ScheduleConstants c;
  c.mu = 2;
  c.N = 3;
  c.D = 2;
  c.G = 1.5;
  c.lambda = 0.4;
  c.K = 1000;
  c.P_K = 0.7;
  for (auto t : {TheoremSchedule::ocgd_strongly_convex, TheoremSchedule::ocgd_convex_static,
                 TheoremSchedule::ocgd_convex_dynamic, TheoremSchedule::ocgd_convex_sqrtk,
                 TheoremSchedule::congd_dynamic}) {
    auto s = schedule_from_theorem(t, c);
    for (std::size_t k = 1; k < 1000; ++k) {
      EXPECT_GT(s.alpha(k), 0.0);
      EXPECT_LE(s.alpha(k + 1), s.alpha(k));
    }
  }
}
