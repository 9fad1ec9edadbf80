#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hlpnn/rng.hpp"
#include "hlpnn/text.hpp"

namespace hlpnn {

// Walker alias sampler: O(1) draws from an arbitrary discrete distribution.
class AliasTable {
 public:
  explicit AliasTable(const std::vector<double>& weights);
  std::size_t sample(Rng& rng) const;
  std::size_t size() const { return prob_.size(); }

 private:
  std::vector<double> prob_;
  std::vector<std::size_t> alias_;
};

enum class GraphMode { kWnut, kComention };

// Directed weighted user-mention graph. Nodes are dataset users plus, in
// wnut mode, external users mentioned by at least two distinct dataset users.
class MentionGraph {
 public:
  struct Edge {
    int src;
    int dst;
    double weight;
  };

  int node_index(const std::string& user_id) const;  // -1 when absent
  int add_node(const std::string& user_id);
  void add_edge(int src, int dst, double weight);

  int n_nodes() const { return static_cast<int>(node_ids_.size()); }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::string& node_id(int idx) const { return node_ids_[idx]; }
  int distinct_mentioners(int idx) const { return mentioner_counts_[idx]; }
  void set_mentioner_count(int idx, int count) { mentioner_counts_[idx] = count; }

  void save_tsv(const std::string& path) const;
  static MentionGraph load_tsv(const std::string& path);

 private:
  std::vector<std::string> node_ids_;
  std::map<std::string, int> node_index_;
  std::vector<Edge> edges_;
  std::map<std::pair<int, int>, std::size_t> edge_index_;
  std::vector<int> mentioner_counts_;
};

// Extracts @mention handles (without the sigil) from a user's tweets.
std::vector<std::string> mention_handles(const UserRecord& user);

MentionGraph build_graph(const std::vector<UserRecord>& users, GraphMode mode);

// Removes nodes mentioned by more than `threshold` distinct users, with all
// incident edges. Such users stay in the dataset with zero embeddings.
MentionGraph remove_celebrities(const MentionGraph& graph, int threshold = 10);

struct LineConfig {
  int dim = 600;
  double lr0 = 0.025;
  int negatives = 5;
  std::int64_t samples = 1000000;
  double noise_power = 0.75;
  std::uint64_t seed = 1;
};

class NetworkEmbeddings {
 public:
  NetworkEmbeddings() = default;
  NetworkEmbeddings(int dim) : dim_(dim) {}

  int dim() const { return dim_; }
  // Trained vertex vector, or exact zeros for absent users.
  std::vector<double> lookup(const std::string& user_id) const;
  bool contains(const std::string& user_id) const { return index_.count(user_id) > 0; }
  void set(const std::string& user_id, std::vector<double> vec);

  void save(const std::string& path) const;
  static NetworkEmbeddings load(const std::string& path);

 private:
  int dim_ = 0;
  std::map<std::string, int> index_;
  std::vector<std::vector<double>> vectors_;
};

// Second-order objective with negative sampling: edges drawn proportional to
// weight via an alias table, noise nodes proportional to out-degree^0.75,
// linear lr decay from lr0 to lr0 * 1e-4. Single-threaded and deterministic.
NetworkEmbeddings train_line(const MentionGraph& graph, const LineConfig& cfg);

}  // namespace hlpnn
