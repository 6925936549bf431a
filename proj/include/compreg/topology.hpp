// Communication graphs, doubly-stochastic mixing matrices and their spectra.
//
// A Graph stores undirected edges between distinct agents (0-indexed
// internally, 1-indexed in edge-list files). A MixingMatrix is the symmetric,
// doubly-stochastic weight matrix used for one round of neighbour averaging;
// its second-largest eigenvalue magnitude `lambda` enters every regret bound
// through the spectral gap 1 - lambda.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace compreg {

class TopologyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class GraphKind { complete, ring, star, path, custom };

inline std::string to_string(GraphKind kind) {
  switch (kind) {
    case GraphKind::complete: return "complete";
    case GraphKind::ring: return "ring";
    case GraphKind::star: return "star";
    case GraphKind::path: return "path";
    case GraphKind::custom: return "custom";
  }
  return "custom";
}

inline GraphKind graph_kind_from_string(const std::string& name) {
  if (name == "complete") return GraphKind::complete;
  if (name == "ring") return GraphKind::ring;
  if (name == "star") return GraphKind::star;
  if (name == "path") return GraphKind::path;
  if (name == "custom") return GraphKind::custom;
  throw TopologyError("unknown topology '" + name + "'");
}

using Edge = std::pair<std::size_t, std::size_t>;

class Graph {
 public:
  /// Edges are 0-indexed and normalised to (min, max). Throws on self loops,
  /// out-of-range endpoints or a disconnected result.
  Graph(std::size_t n_agents, const std::vector<Edge>& edges) : n_(n_agents) {
    if (n_agents == 0) throw TopologyError("graph needs at least one agent");
    for (auto [a, b] : edges) {
      if (a >= n_ || b >= n_) throw TopologyError("edge endpoint out of range");
      if (a == b) throw TopologyError("self loops are not allowed");
      edges_.emplace(std::min(a, b), std::max(a, b));
    }
    if (!connected()) throw TopologyError("graph not connected");
  }

  std::size_t n_agents() const { return n_; }
  const std::set<Edge>& edges() const { return edges_; }

  bool has_edge(std::size_t a, std::size_t b) const {
    return edges_.count({std::min(a, b), std::max(a, b)}) > 0;
  }

  std::vector<std::size_t> degrees() const {
    std::vector<std::size_t> deg(n_, 0);
    for (auto [a, b] : edges_) {
      ++deg[a];
      ++deg[b];
    }
    return deg;
  }

  std::vector<std::vector<std::size_t>> neighbours() const {
    std::vector<std::vector<std::size_t>> nb(n_);
    for (auto [a, b] : edges_) {
      nb[a].push_back(b);
      nb[b].push_back(a);
    }
    return nb;
  }

 private:
  bool connected() const {
    std::vector<std::size_t> parent(n_);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t v) {
      while (parent[v] != v) v = parent[v] = parent[parent[v]];
      return v;
    };
    std::size_t components = n_;
    for (auto [a, b] : edges_) {
      auto ra = find(a), rb = find(b);
      if (ra != rb) {
        parent[ra] = rb;
        --components;
      }
    }
    return components == 1;
  }

  std::size_t n_;
  std::set<Edge> edges_;
};

/// Named topologies. `custom_edges` is only consulted for GraphKind::custom.
inline Graph build_graph(GraphKind kind, std::size_t n_agents,
                         const std::vector<Edge>& custom_edges = {}) {
  if (n_agents == 0) throw TopologyError("graph needs at least one agent");
  std::vector<Edge> edges;
  const std::size_t n = n_agents;
  switch (kind) {
    case GraphKind::complete:
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) edges.emplace_back(i, j);
      break;
    case GraphKind::ring:
      for (std::size_t i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
      if (n > 2) edges.emplace_back(n - 1, 0);
      break;
    case GraphKind::star:
      for (std::size_t i = 1; i < n; ++i) edges.emplace_back(0, i);
      break;
    case GraphKind::path:
      for (std::size_t i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
      break;
    case GraphKind::custom:
      edges = custom_edges;
      break;
  }
  return Graph(n, edges);
}

/// Plain-text edge list: one "i j" pair per line, 1-indexed, '#' comments.
/// The agent count is the largest index seen unless `n_agents` is given.
inline Graph parse_edge_list(std::istream& in, std::size_t n_agents = 0) {
  std::vector<Edge> edges;
  std::size_t max_index = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    long long a = 0, b = 0;
    if (!(ls >> a)) continue;
    if (!(ls >> b) || a < 1 || b < 1)
      throw TopologyError("bad edge on line " + std::to_string(line_no));
    edges.emplace_back(static_cast<std::size_t>(a - 1), static_cast<std::size_t>(b - 1));
    max_index = std::max<std::size_t>(max_index, static_cast<std::size_t>(std::max(a, b)));
  }
  return Graph(n_agents ? n_agents : max_index, edges);
}

inline Graph read_edge_list(const std::string& path, std::size_t n_agents = 0) {
  std::ifstream in(path);
  if (!in) throw TopologyError("cannot open edge list '" + path + "'");
  return parse_edge_list(in, n_agents);
}

/// Largest |eigenvalue| of a symmetric stochastic matrix after removing the
/// Perron eigenvalue 1. Defined as 0 for a single agent.
inline double second_largest_eigenvalue(const Eigen::MatrixXd& weights) {
  const auto n = weights.rows();
  if (n != weights.cols()) throw TopologyError("mixing matrix must be square");
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      if (weights(i, j) != weights(j, i))
        throw TopologyError("eigenvalue routine requires a symmetric matrix");
  if (n == 1) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(weights, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw TopologyError("eigensolver failed");
  // Eigenvalues come sorted ascending; the last one is the Perron root.
  const Eigen::VectorXd& ev = solver.eigenvalues();
  double lambda = 0.0;
  for (Eigen::Index i = 0; i + 1 < n; ++i) lambda = std::max(lambda, std::abs(ev(i)));
  return lambda;
}

class MixingMatrix {
 public:
  /// Validates the doubly-stochastic, symmetric and support conditions
  /// against `graph` and computes lambda.
  MixingMatrix(Eigen::MatrixXd weights, const Graph& graph) : w_(std::move(weights)) {
    const auto n = static_cast<Eigen::Index>(graph.n_agents());
    if (w_.rows() != n || w_.cols() != n) throw TopologyError("mixing matrix size mismatch");
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!(w_(i, i) > 0.0)) throw TopologyError("mixing diagonal must be positive");
      for (Eigen::Index j = 0; j < n; ++j) {
        if (w_(i, j) != w_(j, i)) throw TopologyError("mixing matrix not symmetric");
        if (i == j) continue;
        const bool edge = graph.has_edge(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        if (edge != (w_(i, j) > 0.0) || w_(i, j) < 0.0)
          throw TopologyError("mixing support does not match the graph");
      }
    }
    if (max_row_residual() > 1e-12 || max_column_residual() > 1e-12)
      throw TopologyError("mixing matrix not doubly stochastic");
    lambda_ = second_largest_eigenvalue(w_);
    if (!(lambda_ < 1.0)) throw TopologyError("mixing matrix has no spectral gap");
  }

  const Eigen::MatrixXd& weights() const { return w_; }
  double operator()(std::size_t i, std::size_t j) const {
    return w_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  std::size_t size() const { return static_cast<std::size_t>(w_.rows()); }
  double lambda() const { return lambda_; }
  double spectral_gap() const { return 1.0 - lambda_; }

  double max_row_residual() const {
    return (w_.rowwise().sum().array() - 1.0).abs().maxCoeff();
  }
  double max_column_residual() const {
    return (w_.colwise().sum().array() - 1.0).abs().maxCoeff();
  }

  /// I - Pi, the operator behind the network loss.
  Eigen::MatrixXd laplacian() const {
    return Eigen::MatrixXd::Identity(w_.rows(), w_.cols()) - w_;
  }

 private:
  Eigen::MatrixXd w_;
  double lambda_ = 0.0;
};

/// Metropolis-Hastings weights: pi_ij = 1 / (1 + max(deg i, deg j)) on edges,
/// diagonal takes the remainder. Off-diagonals are written symmetrically so
/// symmetry is exact.
inline MixingMatrix metropolis_mixing(const Graph& graph) {
  const auto n = static_cast<Eigen::Index>(graph.n_agents());
  const auto deg = graph.degrees();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (auto [a, b] : graph.edges()) {
    const double v = 1.0 / (1.0 + static_cast<double>(std::max(deg[a], deg[b])));
    w(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = v;
    w(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = v;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    double off = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) off += w(i, j);
    w(i, i) = 1.0 - off;
  }
  return MixingMatrix(std::move(w), graph);
}

/// pi_ij = 1/N everywhere; only valid on complete graphs.
inline MixingMatrix uniform_mixing(const Graph& graph) {
  const auto n = graph.n_agents();
  if (graph.edges().size() != n * (n - 1) / 2)
    throw TopologyError("uniform weights require a complete graph");
  const auto m = static_cast<Eigen::Index>(n);
  return MixingMatrix(Eigen::MatrixXd::Constant(m, m, 1.0 / static_cast<double>(n)), graph);
}

}  // namespace compreg
