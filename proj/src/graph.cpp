#include "sonata/graph.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

namespace sonata {

namespace {

std::uint64_t splitmix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based draw keyed on (seed, slot, agent): no generator state to carry around.
std::uint64_t keyed_draw(std::uint64_t seed, std::uint64_t n, std::uint64_t agent) {
  return splitmix(splitmix(splitmix(seed) ^ n) ^ agent);
}

std::vector<std::pair<int, int>> ring_plus_random_edges(int I, std::uint64_t seed,
                                                       std::uint64_t n) {
  std::vector<std::pair<int, int>> e;
  e.reserve(2 * static_cast<std::size_t>(I));
  for (int i = 0; i < I; ++i) {
    const int next = (i + 1) % I;
    e.emplace_back(i, next);
    if (I <= 2) continue;
    // Uniform over the I-2 targets that are neither i nor its ring successor.
    const auto choices = static_cast<std::uint64_t>(I - 2);
    const auto k = static_cast<int>(keyed_draw(seed, n, static_cast<std::uint64_t>(i)) % choices);
    const int target = (next + 1 + k) % I;
    e.emplace_back(i, target);
  }
  return e;
}

void strong_dfs(const std::vector<std::vector<int>>& adj, int start, std::vector<char>& seen) {
  std::vector<int> stack{start};
  seen[start] = 1;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (int v : adj[u]) {
      if (!seen[v]) {
        seen[v] = 1;
        stack.push_back(v);
      }
    }
  }
}

}  // namespace

DigraphSnapshot::DigraphSnapshot(int num_agents, std::vector<std::pair<int, int>> edges)
    : num_agents_(num_agents) {
  if (num_agents < 1) throw GraphError("snapshot needs at least one agent");
  for (const auto& [j, i] : edges) {
    if (j < 0 || i < 0 || j >= num_agents || i >= num_agents)
      throw GraphError("edge endpoint out of range: " + std::to_string(j) + ">" + std::to_string(i));
    if (j != i) edges_.emplace_back(j, i);
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
}

bool DigraphSnapshot::has_edge(int from, int to) const {
  if (from == to) return true;
  return std::binary_search(edges_.begin(), edges_.end(), std::make_pair(from, to));
}

std::vector<int> DigraphSnapshot::in_neighbors(int i) const {
  std::vector<int> out{i};
  for (const auto& [j, t] : edges_)
    if (t == i) out.push_back(j);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> DigraphSnapshot::out_neighbors(int i) const {
  std::vector<int> out{i};
  for (const auto& [s, t] : edges_)
    if (s == i) out.push_back(t);
  std::sort(out.begin(), out.end());
  return out;
}

int DigraphSnapshot::out_degree(int i) const {
  int d = 1;
  for (const auto& e : edges_) d += (e.first == i);
  return d;
}

bool DigraphSnapshot::is_symmetric() const {
  return std::all_of(edges_.begin(), edges_.end(),
                     [this](const auto& e) { return has_edge(e.second, e.first); });
}

DigraphSnapshot generate_snapshot(const GraphSequence& seq, std::uint64_t n) {
  const int I = seq.num_agents;
  if (seq.model == GraphModel::Custom) {
    if (seq.custom.empty()) throw GraphError("custom sequence has no slots");
    return seq.custom[n % seq.custom.size()];
  }
  if (I < 2) throw GraphError("a network needs at least two agents");
  switch (seq.model) {
    case GraphModel::RingPlusRandom:
      return DigraphSnapshot(I, ring_plus_random_edges(I, seq.seed, n));
    case GraphModel::StaticStronglyConnected:
      // Slot 0 of the random model, frozen: a ring plus one seeded chord per agent.
      return DigraphSnapshot(I, ring_plus_random_edges(I, seq.seed, 0));
    case GraphModel::StaticUndirected: {
      std::vector<std::pair<int, int>> e;
      for (int i = 0; i + 1 < I; ++i) {
        e.emplace_back(i, i + 1);
        e.emplace_back(i + 1, i);
      }
      return DigraphSnapshot(I, std::move(e));
    }
    case GraphModel::Custom:
      break;
  }
  throw GraphError("unknown graph model");
}

bool check_b_strong_connectivity(std::span<const DigraphSnapshot> snapshots, int B) {
  if (B < 1 || snapshots.empty()) throw GraphError("empty connectivity window");
  if (snapshots.size() < static_cast<std::size_t>(B))
    throw GraphError("fewer snapshots than the window length");
  const int I = snapshots.front().num_agents();
  for (std::size_t k = 0; k + B <= snapshots.size(); ++k) {
    std::vector<std::vector<int>> fwd(I), bwd(I);
    for (int t = 0; t < B; ++t) {
      for (const auto& [j, i] : snapshots[k + t].edges()) {
        fwd[j].push_back(i);
        bwd[i].push_back(j);
      }
    }
    // Strongly connected iff node 0 reaches everyone and everyone reaches node 0.
    std::vector<char> a(I, 0), b(I, 0);
    strong_dfs(fwd, 0, a);
    strong_dfs(bwd, 0, b);
    if (std::find(a.begin(), a.end(), 0) != a.end()) return false;
    if (std::find(b.begin(), b.end(), 0) != b.end()) return false;
  }
  return true;
}

WeightMatrix build_push_sum_weights(const DigraphSnapshot& g) {
  const int I = g.num_agents();
  WeightMatrix w;
  w.entries = Mat::Zero(I, I);
  int max_deg = 1;
  for (int j = 0; j < I; ++j) {
    const int d = g.out_degree(j);
    max_deg = std::max(max_deg, d);
    for (int i : g.out_neighbors(j)) w.entries(i, j) = 1.0 / d;
  }
  w.kind = WeightKind::ColumnStochastic;
  w.kappa = 1.0 / max_deg;
  if ((w.entries.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12)
    w.kind = WeightKind::DoublyStochastic;
  return w;
}

WeightMatrix build_metropolis_weights(const DigraphSnapshot& g) {
  if (!g.is_symmetric())
    throw AsymmetricGraphError("Metropolis weights need an undirected (symmetric) snapshot");
  const int I = g.num_agents();
  std::vector<int> deg(I, 0);
  for (const auto& e : g.edges()) ++deg[e.first];
  WeightMatrix w;
  w.entries = Mat::Zero(I, I);
  for (const auto& [j, i] : g.edges())
    w.entries(i, j) = 1.0 / (1.0 + std::max(deg[i], deg[j]));
  for (int i = 0; i < I; ++i) w.entries(i, i) = 1.0 - w.entries.row(i).sum();
  w.kind = WeightKind::DoublyStochastic;
  double kappa = std::numeric_limits<double>::infinity();
  for (int i = 0; i < I; ++i)
    for (int j = 0; j < I; ++j)
      if (w.entries(i, j) > 0.0) kappa = std::min(kappa, w.entries(i, j));
  w.kappa = kappa;
  return w;
}

DigraphSnapshot parse_snapshot_line(const std::string& line, int num_agents) {
  std::istringstream in(line);
  std::string tok;
  std::vector<std::pair<int, int>> edges;
  while (in >> tok) {
    const auto gt = tok.find('>');
    if (gt == std::string::npos || gt == 0 || gt + 1 == tok.size())
      throw GraphError("malformed link '" + tok + "' (expected j>i)");
    try {
      std::size_t p1 = 0, p2 = 0;
      const std::string a = tok.substr(0, gt), b = tok.substr(gt + 1);
      const int j = std::stoi(a, &p1);
      const int i = std::stoi(b, &p2);
      if (p1 != a.size() || p2 != b.size()) throw GraphError("trailing characters");
      edges.emplace_back(j, i);
    } catch (const std::logic_error&) {
      throw GraphError("malformed link '" + tok + "' (expected j>i)");
    }
  }
  return DigraphSnapshot(num_agents, std::move(edges));
}

GraphSequence load_custom_sequence(const std::string& path, int num_agents) {
  std::ifstream in(path);
  if (!in) throw GraphError("cannot open graph file: " + path);
  GraphSequence seq;
  seq.model = GraphModel::Custom;
  seq.num_agents = num_agents;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      seq.custom.push_back(parse_snapshot_line(line, num_agents));
    } catch (const GraphError& e) {
      throw GraphError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (seq.custom.empty()) throw GraphError("graph file has no slots: " + path);
  return seq;
}

std::string to_string(GraphModel m) {
  switch (m) {
    case GraphModel::RingPlusRandom: return "ring_plus_random";
    case GraphModel::StaticStronglyConnected: return "static_strongly_connected";
    case GraphModel::StaticUndirected: return "static_undirected";
    case GraphModel::Custom: return "custom";
  }
  return "?";
}

GraphModel graph_model_from_string(const std::string& s) {
  for (auto m : {GraphModel::RingPlusRandom, GraphModel::StaticStronglyConnected,
                 GraphModel::StaticUndirected, GraphModel::Custom})
    if (to_string(m) == s) return m;
  throw GraphError("unknown graph model '" + s + "'");
}

}  // namespace sonata
