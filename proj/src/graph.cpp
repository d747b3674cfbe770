#include "hinet/graph.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>
#include <unordered_map>

#include "hinet/error.hpp"
#include "hinet/rng.hpp"

namespace hinet {

UndirectedGraph::UndirectedGraph(std::size_t node_count) : offsets_(node_count + 1, 0) {}

UndirectedGraph UndirectedGraph::from_edges(std::size_t node_count, std::span<const Edge> edges) {
  UndirectedGraph g(node_count);
  std::vector<std::size_t> degree(node_count, 0);
  for (const auto& [a, b] : edges) {
    if (a >= node_count || b >= node_count) {
      throw InvalidParameter("edge (" + std::to_string(a) + ", " + std::to_string(b) +
                             ") references a node outside 0.." + std::to_string(node_count));
    }
    if (a == b) throw InvalidParameter("self-loop on node " + std::to_string(a));
    ++degree[a];
    ++degree[b];
  }
  for (std::size_t i = 0; i < node_count; ++i) g.offsets_[i + 1] = g.offsets_[i] + degree[i];
  g.neighbors_.resize(g.offsets_.back());
  std::vector<std::size_t> cursor(g.offsets_.begin(), g.offsets_.end() - 1);
  for (const auto& [a, b] : edges) {
    g.neighbors_[cursor[a]++] = b;
    g.neighbors_[cursor[b]++] = a;
  }
  for (std::size_t i = 0; i < node_count; ++i) {
    auto first = g.neighbors_.begin() + static_cast<std::ptrdiff_t>(g.offsets_[i]);
    auto last = g.neighbors_.begin() + static_cast<std::ptrdiff_t>(g.offsets_[i + 1]);
    std::sort(first, last);
    if (std::adjacent_find(first, last) != last) {
      throw InvalidParameter("duplicate edge at node " + std::to_string(i));
    }
  }
  return g;
}

bool UndirectedGraph::has_edge(std::size_t a, std::size_t b) const {
  auto nb = neighbors(a);
  return std::binary_search(nb.begin(), nb.end(), b);
}

std::vector<Edge> UndirectedGraph::edges() const {
  std::vector<Edge> out;
  out.reserve(edge_count());
  for (std::size_t i = 0; i < node_count(); ++i) {
    for (std::size_t j : neighbors(i)) {
      if (i < j) out.emplace_back(i, j);
    }
  }
  return out;
}

UndirectedGraph UndirectedGraph::with_isolated_nodes(std::size_t extra) const {
  UndirectedGraph g = *this;
  g.offsets_.insert(g.offsets_.end(), extra, g.offsets_.back());
  return g;
}

UndirectedGraph generate_ba(std::size_t n, std::size_t m, std::uint64_t seed) {
  if (m < 1 || n <= m) {
    throw InvalidParameter("generate_ba requires n > m >= 1 (got n=" + std::to_string(n) +
                           ", m=" + std::to_string(m) + ")");
  }
  Rng rng = make_rng(seed);
  std::vector<Edge> edges;
  edges.reserve(m * (n - m));
  // Each node appears in `repeated` once per unit of degree.
  std::vector<std::size_t> repeated;
  repeated.reserve(2 * m * (n - m));
  std::vector<std::size_t> targets(m);
  for (std::size_t i = 0; i < m; ++i) targets[i] = i;

  for (std::size_t source = m; source < n; ++source) {
    for (std::size_t t : targets) edges.emplace_back(t, source);
    repeated.insert(repeated.end(), targets.begin(), targets.end());
    repeated.insert(repeated.end(), m, source);
    if (source + 1 == n) break;
    targets.clear();
    std::uniform_int_distribution<std::size_t> pick(0, repeated.size() - 1);
    while (targets.size() < m) {
      std::size_t candidate = repeated[pick(rng)];
      if (std::find(targets.begin(), targets.end(), candidate) == targets.end()) {
        targets.push_back(candidate);
      }
    }
  }
  return UndirectedGraph::from_edges(n, edges);
}

namespace {

struct ScoredPair {
  double score;
  std::size_t i;
  std::size_t j;
};

// Strict ranking: higher score first, then lexicographic pair index.
bool ranks_before(const ScoredPair& a, const ScoredPair& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.i != b.i) return a.i < b.i;
  return a.j < b.j;
}

}  // namespace

UndirectedGraph generate_homophily(const FeatureMatrix& features, const HomophilyOptions& options,
                                   std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(features.rows());
  if (n < 2) throw InvalidParameter("generate_homophily requires at least 2 nodes");
  if (features.cols() < 1) throw InvalidParameter("generate_homophily requires d >= 1");
  if (!(options.target_avg_degree > 0.0)) {
    throw InvalidParameter("target_avg_degree must be positive");
  }
  if (!(options.noise_sd >= 0.0)) throw InvalidParameter("noise_sd must be non-negative");

  FeatureMatrix unit = features;
  for (Eigen::Index r = 0; r < unit.rows(); ++r) {
    double norm = unit.row(r).norm();
    if (norm == 0.0) {
      throw InvalidParameter("feature row " + std::to_string(r) +
                             " is all zeros; cosine similarity is undefined");
    }
    unit.row(r) /= norm;
  }

  const std::size_t total_pairs = n * (n - 1) / 2;
  auto wanted = static_cast<std::size_t>(std::ceil(options.target_avg_degree * static_cast<double>(n) / 2.0));
  wanted = std::min(wanted, total_pairs);

  Rng rng = make_rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  // Keep the `wanted` best pairs; the heap top is the worst one retained.
  std::priority_queue<ScoredPair, std::vector<ScoredPair>, decltype(&ranks_before)> best(ranks_before);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double score = unit.row(static_cast<Eigen::Index>(i)).dot(unit.row(static_cast<Eigen::Index>(j)));
      if (options.noise_sd > 0.0) score += options.noise_sd * noise(rng);
      ScoredPair p{score, i, j};
      if (best.size() < wanted) {
        best.push(p);
      } else if (ranks_before(p, best.top())) {
        best.pop();
        best.push(p);
      }
    }
  }

  std::vector<Edge> edges;
  edges.reserve(best.size());
  while (!best.empty()) {
    edges.emplace_back(best.top().i, best.top().j);
    best.pop();
  }
  return UndirectedGraph::from_edges(n, edges);
}

double assortativity_categorical(const UndirectedGraph& graph, std::span<const int> labels) {
  if (labels.size() != graph.node_count()) {
    throw InvalidParameter("label vector length does not match node count");
  }
  if (graph.edge_count() == 0) throw UndefinedStatistic("assortativity of a graph with no edges");

  std::unordered_map<int, std::size_t> index;
  for (int label : labels) index.emplace(label, index.size());
  const std::size_t k = index.size();
  std::vector<double> mixing(k * k, 0.0);
  for (std::size_t i = 0; i < graph.node_count(); ++i) {
    std::size_t a = index.at(labels[i]);
    for (std::size_t j : graph.neighbors(i)) mixing[a * k + index.at(labels[j])] += 1.0;
  }
  const double total = 2.0 * static_cast<double>(graph.edge_count());
  double trace = 0.0;
  double expected = 0.0;
  for (std::size_t a = 0; a < k; ++a) {
    trace += mixing[a * k + a] / total;
    double row = 0.0;
    for (std::size_t b = 0; b < k; ++b) row += mixing[a * k + b];
    row /= total;
    expected += row * row;
  }
  if (expected >= 1.0) {
    throw UndefinedStatistic("assortativity undefined: every edge endpoint has the same category");
  }
  return (trace - expected) / (1.0 - expected);
}

double assortativity_numeric(const UndirectedGraph& graph, std::span<const double> values) {
  if (values.size() != graph.node_count()) {
    throw InvalidParameter("value vector length does not match node count");
  }
  if (graph.edge_count() == 0) throw UndefinedStatistic("assortativity of a graph with no edges");

  // Both orientations are counted, so the two endpoint marginals coincide.
  double sum = 0.0;
  double count = 0.0;
  for (std::size_t i = 0; i < graph.node_count(); ++i) {
    sum += values[i] * static_cast<double>(graph.degree(i));
    count += static_cast<double>(graph.degree(i));
  }
  const double mean = sum / count;
  double var = 0.0;
  double cov = 0.0;
  for (std::size_t i = 0; i < graph.node_count(); ++i) {
    const double di = values[i] - mean;
    var += di * di * static_cast<double>(graph.degree(i));
    for (std::size_t j : graph.neighbors(i)) cov += di * (values[j] - mean);
  }
  if (var <= 0.0) throw UndefinedStatistic("assortativity undefined: endpoint values have zero variance");
  return cov / var;
}

}  // namespace hinet
