#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace sonata {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// A directed link j -> i is stored as {j, i}. Self-loops are implicit.
class DigraphSnapshot {
 public:
  DigraphSnapshot() = default;
  DigraphSnapshot(int num_agents, std::vector<std::pair<int, int>> edges);

  int num_agents() const { return num_agents_; }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  bool has_edge(int from, int to) const;

  // Both lists include the agent itself.
  std::vector<int> in_neighbors(int i) const;
  std::vector<int> out_neighbors(int i) const;
  int out_degree(int i) const;  // counts the self-loop
  bool is_symmetric() const;
  std::size_t num_links() const { return edges_.size(); }

  bool operator==(const DigraphSnapshot&) const = default;

 private:
  int num_agents_ = 0;
  std::vector<std::pair<int, int>> edges_;  // sorted, unique, no self-loops
};

enum class GraphModel { RingPlusRandom, StaticStronglyConnected, StaticUndirected, Custom };

struct GraphSequence {
  GraphModel model = GraphModel::RingPlusRandom;
  std::uint64_t seed = 0;
  int num_agents = 2;
  int window = 1;  // claimed B
  std::vector<DigraphSnapshot> custom;  // cycled periodically for Custom
};

class GraphError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class AsymmetricGraphError : public GraphError {
 public:
  using GraphError::GraphError;
};

DigraphSnapshot generate_snapshot(const GraphSequence& seq, std::uint64_t n);

bool check_b_strong_connectivity(std::span<const DigraphSnapshot> snapshots, int B);

enum class WeightKind { ColumnStochastic, DoublyStochastic };

struct WeightMatrix {
  Mat entries;
  WeightKind kind = WeightKind::ColumnStochastic;
  double kappa = 1.0;
};

WeightMatrix build_push_sum_weights(const DigraphSnapshot& g);
WeightMatrix build_metropolis_weights(const DigraphSnapshot& g);

// One slot per non-empty line, links written "j>i" separated by whitespace.
GraphSequence load_custom_sequence(const std::string& path, int num_agents);
DigraphSnapshot parse_snapshot_line(const std::string& line, int num_agents);

std::string to_string(GraphModel m);
GraphModel graph_model_from_string(const std::string& s);

}  // namespace sonata
