#include "compreg/topology.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

using namespace compreg;

namespace {

const GraphKind kBuiltin[] = {GraphKind::complete, GraphKind::ring, GraphKind::star, GraphKind::path};

// Characteristic polynomial coefficients by Faddeev-LeVerrier, then real roots
// located by sign changes on a dense scan and bisection.
std::vector<double> eigenvalues_by_charpoly(const Eigen::MatrixXd& a) {
  const auto n = a.rows();
  std::vector<double> c(static_cast<std::size_t>(n) + 1, 0.0);
  c[static_cast<std::size_t>(n)] = 1.0;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index k = 1; k <= n; ++k) {
    m = a * m + c[static_cast<std::size_t>(n - k + 1)] * id;
    c[static_cast<std::size_t>(n - k)] = -(a * m).trace() / static_cast<double>(k);
  }
  auto p = [&](double x) {
    double v = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * x + *it;
    return v;
  };
  std::vector<double> roots;
  const int steps = 200000;
  double prev_x = -1.0 - 1e-9, prev = p(prev_x);
  for (int s = 1; s <= steps; ++s) {
    const double x = -1.0 - 1e-9 + (2.0 + 2e-9) * s / steps;
    const double v = p(x);
    if (v == 0.0) {
      roots.push_back(x);
    } else if ((prev < 0.0) != (v < 0.0) && prev != 0.0) {
      double lo = prev_x, hi = x;
      for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        ((p(lo) < 0.0) == (p(mid) < 0.0) ? lo : hi) = mid;
      }
      roots.push_back(0.5 * (lo + hi));
    }
    prev_x = x;
    prev = v;
  }
  return roots;
}

}  // namespace

TEST(Graph, CompleteTwoHasSingleEdge) {
  auto g = build_graph(GraphKind::complete, 2);
  ASSERT_EQ(g.edges().size(), 1u);
  EXPECT_TRUE(g.has_edge(0, 1));
}

TEST(Graph, RingFour) {
  auto g = build_graph(GraphKind::ring, 4);
  EXPECT_EQ(g.edges().size(), 4u);
  EXPECT_TRUE(g.has_edge(0, 1));
  EXPECT_TRUE(g.has_edge(1, 2));
  EXPECT_TRUE(g.has_edge(2, 3));
  EXPECT_TRUE(g.has_edge(3, 0));
  EXPECT_FALSE(g.has_edge(0, 2));
}

TEST(Graph, DisconnectedCustomRejected) {
  try {
    build_graph(GraphKind::custom, 3, {{0, 1}});
    FAIL() << "expected an error";
  } catch (const TopologyError& e) {
    EXPECT_STREQ(e.what(), "graph not connected");
  }
}

TEST(Graph, ZeroAgentsRejected) {
  EXPECT_THROW(build_graph(GraphKind::complete, 0), TopologyError);
}

TEST(Graph, SelfLoopRejected) {
  EXPECT_THROW(Graph(2, {{0, 0}, {0, 1}}), TopologyError);
}

TEST(Graph, EdgeListParsing) {
  std::istringstream in("# triangle\n1 2\n2 3  # comment\n\n3 1\n");
  auto g = parse_edge_list(in);
  EXPECT_EQ(g.n_agents(), 3u);
  EXPECT_EQ(g.edges().size(), 3u);
  std::istringstream bad("1 x\n");
  EXPECT_THROW(parse_edge_list(bad), TopologyError);
}

TEST(Mixing, RingFourWeightsAndLambda) {
  auto pi = metropolis_mixing(build_graph(GraphKind::ring, 4));
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_DOUBLE_EQ(pi(i, i), 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(pi(i, (i + 1) % 4), 1.0 / 3.0);
  }
  // Circulant spectrum 1/3 + (2/3) cos(2 pi j / 4).
  double expected = 0.0;
  for (int j = 1; j < 4; ++j)
    expected = std::max(expected, std::abs(1.0 / 3.0 + 2.0 / 3.0 * std::cos(2.0 * std::numbers::pi * j / 4.0)));
  EXPECT_NEAR(pi.lambda(), expected, 1e-10);
  EXPECT_NEAR(pi.lambda(), 1.0 / 3.0, 1e-10);
}

TEST(Mixing, CompleteTwoHasZeroLambda) {
  auto pi = metropolis_mixing(build_graph(GraphKind::complete, 2));
  EXPECT_DOUBLE_EQ(pi(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(pi(0, 1), 0.5);
  EXPECT_NEAR(pi.lambda(), 0.0, 1e-12);
  EXPECT_NEAR(pi.spectral_gap(), 1.0, 1e-12);
}

TEST(Mixing, SingleAgent) {
  auto pi = metropolis_mixing(build_graph(GraphKind::complete, 1));
  EXPECT_EQ(pi.size(), 1u);
  EXPECT_DOUBLE_EQ(pi(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(pi.lambda(), 0.0);
  EXPECT_DOUBLE_EQ(pi.spectral_gap(), 1.0);
}

TEST(Mixing, StarFiveMatchesCharacteristicPolynomial) {
  auto pi = metropolis_mixing(build_graph(GraphKind::star, 5));
  auto roots = eigenvalues_by_charpoly(pi.weights());
  ASSERT_FALSE(roots.empty());
  // Drop the Perron root closest to 1.
  std::sort(roots.begin(), roots.end());
  double brute = 0.0;
  for (std::size_t i = 0; i + 1 < roots.size(); ++i) brute = std::max(brute, std::abs(roots[i]));
  // The leaf eigenvalue is a triple root, which limits bisection accuracy.
  EXPECT_NEAR(roots.back(), 1.0, 1e-8);
  EXPECT_NEAR(pi.lambda(), brute, 1e-5);
}

TEST(Mixing, NonSymmetricRejectedByEigenRoutine) {
  Eigen::MatrixXd w(2, 2);
  w << 0.6, 0.4, 0.5, 0.5;
  EXPECT_THROW(second_largest_eigenvalue(w), TopologyError);
}

TEST(Mixing, ValidatesSupport) {
  auto g = build_graph(GraphKind::path, 3);
  Eigen::MatrixXd w = Eigen::MatrixXd::Constant(3, 3, 1.0 / 3.0);
  EXPECT_THROW(MixingMatrix(w, g), TopologyError);
}

TEST(Mixing, UniformOnCompleteOnly) {
  auto pi = uniform_mixing(build_graph(GraphKind::complete, 5));
  EXPECT_NEAR(pi.lambda(), 0.0, 1e-12);
  EXPECT_THROW(uniform_mixing(build_graph(GraphKind::ring, 5)), TopologyError);
}

TEST(MixingProperty, DoublyStochasticSymmetricPerron) {
  for (auto kind : kBuiltin)
    for (std::size_t n = 2; n <= 10; ++n) {
      auto pi = metropolis_mixing(build_graph(kind, n));
      EXPECT_LE(pi.max_row_residual(), 1e-12);
      EXPECT_LE(pi.max_column_residual(), 1e-12);
      const auto& w = pi.weights();
      EXPECT_TRUE(w == w.transpose());
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(w);
      EXPECT_NEAR(es.eigenvalues().maxCoeff(), 1.0, 1e-10);
      EXPECT_LT(pi.lambda(), 1.0);
    }
}

TEST(MixingProperty, DenserGraphHasSmallerLambda) {
  for (std::size_t n = 3; n <= 10; ++n) {
    auto complete = metropolis_mixing(build_graph(GraphKind::complete, n));
    auto ring = metropolis_mixing(build_graph(GraphKind::ring, n));
    EXPECT_LE(complete.lambda(), ring.lambda()) << "N = " << n;
  }
}

TEST(MixingProperty, LaplacianPositiveSemidefinite) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  for (auto kind : kBuiltin)
    for (std::size_t n = 2; n <= 10; ++n) {
      auto pi = metropolis_mixing(build_graph(kind, n));
      const Eigen::MatrixXd l = pi.laplacian();
      for (int t = 0; t < 1000; ++t) {
        Eigen::VectorXd x(static_cast<Eigen::Index>(n));
        for (auto& v : x) v = normal(rng);
        EXPECT_GE(x.dot(l * x), -1e-12);
      }
    }
}
