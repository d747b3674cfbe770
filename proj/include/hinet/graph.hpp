#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace hinet {

using Edge = std::pair<std::size_t, std::size_t>;
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Simple undirected graph over nodes 0..n-1 in compressed adjacency form.
///
/// Instances are immutable once built. Neighbor lists are sorted and free of
/// duplicates, there are no self-loops, and j is a neighbor of i exactly when
/// i is a neighbor of j.
class UndirectedGraph {
 public:
  UndirectedGraph() = default;
  explicit UndirectedGraph(std::size_t node_count);

  /// Builds a graph from an edge list. Orientation of each pair is ignored.
  /// Throws InvalidParameter on self-loops, duplicate edges or out-of-range
  /// endpoints.
  static UndirectedGraph from_edges(std::size_t node_count, std::span<const Edge> edges);

  std::size_t node_count() const noexcept { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t edge_count() const noexcept { return neighbors_.size() / 2; }

  std::span<const std::size_t> neighbors(std::size_t node) const {
    return {neighbors_.data() + offsets_[node], neighbors_.data() + offsets_[node + 1]};
  }
  std::size_t degree(std::size_t node) const { return offsets_[node + 1] - offsets_[node]; }
  bool has_edge(std::size_t a, std::size_t b) const;

  /// Edge list with i < j, sorted lexicographically.
  std::vector<Edge> edges() const;

  /// Copy of this graph with `extra` isolated nodes appended.
  UndirectedGraph with_isolated_nodes(std::size_t extra) const;

  friend bool operator==(const UndirectedGraph&, const UndirectedGraph&) = default;

 private:
  std::vector<std::size_t> offsets_{0};
  std::vector<std::size_t> neighbors_;
};

/// Barabasi-Albert preferential attachment. The first m nodes start
/// unconnected; every later node attaches to m distinct existing nodes drawn
/// with probability proportional to degree, so edge_count = m * (n - m).
UndirectedGraph generate_ba(std::size_t n, std::size_t m, std::uint64_t seed);

struct HomophilyOptions {
  double target_avg_degree = 4.0;
  double noise_sd = 0.1;
};

/// Similarity graph: every node pair is scored by the cosine similarity of
/// its feature rows plus N(0, noise_sd^2) noise, and the
/// ceil(target_avg_degree * n / 2) best-scoring pairs become edges. Equal
/// scores are ranked by lexicographic pair index.
UndirectedGraph generate_homophily(const FeatureMatrix& features, const HomophilyOptions& options,
                                   std::uint64_t seed);

/// Newman's assortativity coefficient for a categorical node attribute.
double assortativity_categorical(const UndirectedGraph& graph, std::span<const int> labels);

/// Assortativity for a scalar attribute: Pearson correlation of endpoint
/// values over both orientations of every edge.
double assortativity_numeric(const UndirectedGraph& graph, std::span<const double> values);

}  // namespace hinet
