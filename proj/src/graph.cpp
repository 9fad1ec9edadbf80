#include "hlpnn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace hlpnn {

AliasTable::AliasTable(const std::vector<double>& weights) {
  if (weights.empty()) throw std::invalid_argument("alias table: empty weight vector");
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0 || !std::isfinite(w))
      throw std::invalid_argument("alias table: weights must be finite and nonnegative");
    total += w;
  }
  if (total <= 0.0) throw std::invalid_argument("alias table: all weights are zero");
  const std::size_t n = weights.size();
  prob_.assign(n, 0.0);
  alias_.assign(n, 0);
  std::vector<double> scaled(n);
  for (std::size_t i = 0; i < n; ++i) scaled[i] = weights[i] * n / total;
  std::vector<std::size_t> small, large;
  for (std::size_t i = 0; i < n; ++i)
    (scaled[i] < 1.0 ? small : large).push_back(i);
  while (!small.empty() && !large.empty()) {
    const std::size_t s = small.back();
    const std::size_t l = large.back();
    small.pop_back();
    large.pop_back();
    prob_[s] = scaled[s];
    alias_[s] = l;
    scaled[l] = scaled[l] + scaled[s] - 1.0;
    (scaled[l] < 1.0 ? small : large).push_back(l);
  }
  for (std::size_t i : large) prob_[i] = 1.0;
  for (std::size_t i : small) prob_[i] = 1.0;
}

std::size_t AliasTable::sample(Rng& rng) const {
  const std::size_t k = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(prob_.size()) - 1));
  return rng.uniform(0.0, 1.0) < prob_[k] ? k : alias_[k];
}

// ---- MentionGraph ----------------------------------------------------------

int MentionGraph::node_index(const std::string& user_id) const {
  auto it = node_index_.find(user_id);
  return it == node_index_.end() ? -1 : it->second;
}

int MentionGraph::add_node(const std::string& user_id) {
  auto it = node_index_.find(user_id);
  if (it != node_index_.end()) return it->second;
  const int idx = static_cast<int>(node_ids_.size());
  node_ids_.push_back(user_id);
  node_index_[user_id] = idx;
  mentioner_counts_.push_back(0);
  return idx;
}

void MentionGraph::add_edge(int src, int dst, double weight) {
  if (src == dst) return;  // no self-loops
  auto key = std::make_pair(src, dst);
  auto it = edge_index_.find(key);
  if (it != edge_index_.end()) {
    edges_[it->second].weight += weight;
  } else {
    edge_index_[key] = edges_.size();
    edges_.push_back({src, dst, weight});
  }
}

void MentionGraph::save_tsv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("graph: cannot write '" + path + "'");
  for (const Edge& e : edges_)
    out << node_ids_[e.src] << '\t' << node_ids_[e.dst] << '\t' << e.weight << '\n';
}

MentionGraph MentionGraph::load_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("graph: cannot open '" + path + "'");
  MentionGraph g;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string src, dst, w;
    if (!std::getline(ss, src, '\t') || !std::getline(ss, dst, '\t') || !std::getline(ss, w, '\t'))
      throw std::runtime_error("graph: malformed line " + std::to_string(lineno) + " in '" + path +
                               "'");
    g.add_edge(g.add_node(src), g.add_node(dst), std::stod(w));
  }
  return g;
}

// ---- construction ----------------------------------------------------------

std::vector<std::string> mention_handles(const UserRecord& user) {
  std::vector<std::string> handles;
  for (const std::string& tweet : user.tweets)
    for (const std::string& tok : tokenize(tweet))
      if (tok.size() > 1 && tok[0] == '@') handles.push_back(tok.substr(1));
  return handles;
}

MentionGraph build_graph(const std::vector<UserRecord>& users, GraphMode mode) {
  // Distinct mentioners per handle, over raw mentions of dataset users.
  std::map<std::string, std::set<std::string>> mentioners;
  std::map<std::string, std::map<std::string, int>> mention_counts;  // user -> handle -> count
  std::set<std::string> dataset_users;
  for (const UserRecord& u : users) dataset_users.insert(u.user_id);
  for (const UserRecord& u : users) {
    for (const std::string& h : mention_handles(u)) {
      if (h == u.user_id) continue;
      mentioners[h].insert(u.user_id);
      ++mention_counts[u.user_id][h];
    }
  }

  MentionGraph g;
  if (mode == GraphMode::kWnut) {
    // Dataset users plus externals mentioned by >= 2 distinct dataset users.
    for (const UserRecord& u : users) g.add_node(u.user_id);
    for (const UserRecord& u : users) {
      const int src = g.node_index(u.user_id);
      auto it = mention_counts.find(u.user_id);
      if (it == mention_counts.end()) continue;
      for (const auto& [handle, count] : it->second) {
        const bool in_dataset = dataset_users.count(handle) > 0;
        if (!in_dataset && mentioners[handle].size() < 2) continue;
        g.add_edge(src, g.add_node(handle), count);
      }
    }
  } else {
    // Dataset users only; symmetric edges for direct mutual mentions and
    // co-mentions of a common third user.
    for (const UserRecord& u : users) g.add_node(u.user_id);
    for (const UserRecord& u : users) {
      auto it = mention_counts.find(u.user_id);
      if (it == mention_counts.end()) continue;
      for (const auto& [handle, count] : it->second) {
        if (!dataset_users.count(handle)) continue;
        auto back = mention_counts.find(handle);
        if (back != mention_counts.end() && back->second.count(u.user_id)) {
          const int a = g.node_index(u.user_id);
          const int b = g.node_index(handle);
          if (a < b) {  // count each mutual pair once
            g.add_edge(a, b, 1.0);
            g.add_edge(b, a, 1.0);
          }
        }
      }
    }
    for (const auto& [handle, who] : mentioners) {
      std::vector<std::string> ds;
      for (const std::string& uid : who)
        if (dataset_users.count(uid)) ds.push_back(uid);
      for (std::size_t i = 0; i < ds.size(); ++i)
        for (std::size_t j = i + 1; j < ds.size(); ++j) {
          const int a = g.node_index(ds[i]);
          const int b = g.node_index(ds[j]);
          g.add_edge(a, b, 1.0);
          g.add_edge(b, a, 1.0);
        }
    }
  }
  for (const auto& [handle, who] : mentioners) {
    const int idx = g.node_index(handle);
    if (idx >= 0) g.set_mentioner_count(idx, static_cast<int>(who.size()));
  }
  return g;
}

MentionGraph remove_celebrities(const MentionGraph& graph, int threshold) {
  MentionGraph out;
  std::vector<int> remap(graph.n_nodes(), -1);
  for (int i = 0; i < graph.n_nodes(); ++i) {
    if (graph.distinct_mentioners(i) > threshold) continue;
    const int ni = out.add_node(graph.node_id(i));
    out.set_mentioner_count(ni, graph.distinct_mentioners(i));
    remap[i] = ni;
  }
  for (const MentionGraph::Edge& e : graph.edges())
    if (remap[e.src] >= 0 && remap[e.dst] >= 0)
      out.add_edge(remap[e.src], remap[e.dst], e.weight);
  return out;
}

// ---- embeddings ------------------------------------------------------------

std::vector<double> NetworkEmbeddings::lookup(const std::string& user_id) const {
  auto it = index_.find(user_id);
  if (it == index_.end()) return std::vector<double>(dim_, 0.0);
  return vectors_[it->second];
}

void NetworkEmbeddings::set(const std::string& user_id, std::vector<double> vec) {
  if (static_cast<int>(vec.size()) != dim_)
    throw std::invalid_argument("network embeddings: dimension mismatch");
  auto it = index_.find(user_id);
  if (it != index_.end()) {
    vectors_[it->second] = std::move(vec);
  } else {
    index_[user_id] = static_cast<int>(vectors_.size());
    vectors_.push_back(std::move(vec));
  }
}

void NetworkEmbeddings::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("embeddings: cannot write '" + path + "'");
  out.precision(17);
  out << "dim=" << dim_ << " count=" << index_.size() << '\n';
  for (const auto& [uid, idx] : index_) {
    out << uid;
    for (double v : vectors_[idx]) out << ' ' << v;
    out << '\n';
  }
}

NetworkEmbeddings NetworkEmbeddings::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("embeddings: cannot open '" + path + "'");
  std::string header;
  if (!std::getline(in, header)) throw std::runtime_error("embeddings: empty file '" + path + "'");
  int dim = 0;
  long count = 0;
  if (std::sscanf(header.c_str(), "dim=%d count=%ld", &dim, &count) != 2)
    throw std::runtime_error("embeddings: bad header in '" + path + "'");
  NetworkEmbeddings emb(dim);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string uid;
    ss >> uid;
    std::vector<double> vec(dim);
    for (int i = 0; i < dim; ++i)
      if (!(ss >> vec[i])) throw std::runtime_error("embeddings: short row for '" + uid + "'");
    emb.set(uid, std::move(vec));
  }
  return emb;
}

NetworkEmbeddings train_line(const MentionGraph& graph, const LineConfig& cfg) {
  if (graph.edges().empty()) throw std::invalid_argument("train_line: graph has no edges");
  const int n = graph.n_nodes();
  const int dim = cfg.dim;
  Rng rng(cfg.seed);

  std::vector<double> vertex(static_cast<std::size_t>(n) * dim);
  std::vector<double> context(static_cast<std::size_t>(n) * dim, 0.0);
  for (double& v : vertex) v = rng.uniform(-0.5 / dim, 0.5 / dim);

  std::vector<double> edge_weights;
  edge_weights.reserve(graph.edges().size());
  for (const auto& e : graph.edges()) edge_weights.push_back(e.weight);
  AliasTable edge_sampler(edge_weights);

  std::vector<double> out_degree(n, 0.0);
  for (const auto& e : graph.edges()) out_degree[e.src] += e.weight;
  std::vector<double> noise(n);
  for (int i = 0; i < n; ++i) noise[i] = std::pow(out_degree[i], cfg.noise_power);
  AliasTable noise_sampler(noise);

  std::vector<double> vgrad(dim);
  for (std::int64_t s = 0; s < cfg.samples; ++s) {
    const double progress = static_cast<double>(s) / std::max<std::int64_t>(1, cfg.samples);
    const double lr = cfg.lr0 * std::max(1e-4, 1.0 - progress);
    const auto& e = graph.edges()[edge_sampler.sample(rng)];
    double* vi = vertex.data() + static_cast<std::size_t>(e.src) * dim;
    std::fill(vgrad.begin(), vgrad.end(), 0.0);
    for (int k = 0; k <= cfg.negatives; ++k) {
      int target;
      double label;
      if (k == 0) {
        target = e.dst;
        label = 1.0;
      } else {
        target = static_cast<int>(noise_sampler.sample(rng));
        label = 0.0;
      }
      double* cu = context.data() + static_cast<std::size_t>(target) * dim;
      double dot = 0.0;
      for (int d = 0; d < dim; ++d) dot += vi[d] * cu[d];
      const double sig = 1.0 / (1.0 + std::exp(-dot));
      const double g = (label - sig) * lr;
      for (int d = 0; d < dim; ++d) {
        vgrad[d] += g * cu[d];
        cu[d] += g * vi[d];
      }
    }
    for (int d = 0; d < dim; ++d) vi[d] += vgrad[d];
  }

  NetworkEmbeddings emb(dim);
  for (int i = 0; i < n; ++i)
    emb.set(graph.node_id(i),
            std::vector<double>(vertex.begin() + static_cast<std::size_t>(i) * dim,
                                vertex.begin() + static_cast<std::size_t>(i + 1) * dim));
  return emb;
}

}  // namespace hlpnn
