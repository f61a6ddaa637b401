#include "enova/taskcluster.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "enova/trace_io.hpp"
#include "json.hpp"

namespace enova {

void RequestGraph::add_edge(std::size_t i, std::size_t j, double weight) {
  if (i == j || i >= size() || j >= size()) throw Error("add_edge: invalid endpoints");
  if (!(weight > 0.0)) throw Error("add_edge: weight must be > 0");
  auto bump = [&](std::size_t a, std::size_t b) {
    for (auto& e : adjacency_[a]) {
      if (e.to == b) {
        e.weight += weight;
        return;
      }
    }
    adjacency_[a].push_back({b, weight});
  };
  bump(i, j);
  bump(j, i);
  degree_[i] += weight;
  degree_[j] += weight;
  total_ += weight;
}

std::size_t RequestGraph::edge_count() const {
  std::size_t n = 0;
  for (const auto& a : adjacency_) n += a.size();
  return n / 2;
}

double RequestGraph::weight(std::size_t i, std::size_t j) const {
  for (const auto& e : adjacency_[i]) {
    if (e.to == j) return e.weight;
  }
  return 0.0;
}

RequestGraph build_graph(const std::vector<EmbeddingVector>& vectors, std::size_t k_neighbors) {
  const std::size_t n = vectors.size();
  RequestGraph g(n);
  if (n < 2 || k_neighbors == 0) return g;
  std::vector<std::vector<double>> sim(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) sim[i][j] = sim[j][i] = cosine(vectors[i], vectors[j]);
  }
  std::vector<std::vector<char>> top(n, std::vector<char>(n, 0));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) {
    order.resize(n);
    std::iota(order.begin(), order.end(), 0);
    order.erase(order.begin() + static_cast<std::ptrdiff_t>(i));
    const std::size_t k = std::min(k_neighbors, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) {
                        return sim[i][a] > sim[i][b] || (sim[i][a] == sim[i][b] && a < b);
                      });
    for (std::size_t r = 0; r < k; ++r) top[i][order[r]] = 1;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double w = std::max(sim[i][j], 0.0);
      if (top[i][j] && top[j][i] && w > 0.0) g.add_edge(i, j, w);
    }
  }
  return g;
}

double modularity(const RequestGraph& graph, const std::vector<int>& membership) {
  if (membership.size() != graph.size()) throw Error("modularity: membership size mismatch");
  const double two_m = 2.0 * graph.total_weight();
  if (two_m <= 0.0) return 0.0;
  double inside = 0.0;
  std::map<int, double> tot;
  for (std::size_t i = 0; i < graph.size(); ++i) {
    tot[membership[i]] += graph.degree(i);
    for (const auto& e : graph.neighbors(i)) {
      if (membership[e.to] == membership[i]) inside += e.weight;
    }
  }
  double expected = 0.0;
  for (const auto& [_, t] : tot) expected += t * t;
  return inside / two_m - expected / (two_m * two_m);
}

namespace {

// Graph with self-loops used between Louvain levels. self[i] is A_ii, which
// counts each internal edge of an aggregated node in both directions.
struct WorkGraph {
  std::vector<std::vector<std::pair<std::size_t, double>>> adj;
  std::vector<double> self;
  std::vector<double> k;
  double two_m = 0.0;
};

// Returns true when at least one node changed community.
bool local_moves(const WorkGraph& g, std::vector<std::size_t>& comm) {
  const std::size_t n = g.adj.size();
  std::vector<double> tot(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) tot[comm[i]] += g.k[i];
  std::vector<double> w_to(n, 0.0);
  std::vector<std::size_t> touched;
  bool any = false;
  bool moved = true;
  while (moved) {
    moved = false;
    for (std::size_t i = 0; i < n; ++i) {
      touched.clear();
      for (const auto& [j, w] : g.adj[i]) {
        if (w_to[comm[j]] == 0.0) touched.push_back(comm[j]);
        w_to[comm[j]] += w;
      }
      const std::size_t own = comm[i];
      tot[own] -= g.k[i];
      std::size_t best = own;
      double best_gain = w_to[own] - g.k[i] * tot[own] / g.two_m;
      for (std::size_t c : touched) {
        const double gain = w_to[c] - g.k[i] * tot[c] / g.two_m;
        if (gain > best_gain + 1e-12) {
          best_gain = gain;
          best = c;
        }
      }
      tot[best] += g.k[i];
      comm[i] = best;
      if (best != own) moved = any = true;
      for (std::size_t c : touched) w_to[c] = 0.0;
      w_to[own] = 0.0;
    }
  }
  return any;
}

// Relabels communities 0..count-1 in order of first appearance.
std::size_t renumber(std::vector<std::size_t>& comm) {
  std::map<std::size_t, std::size_t> ids;
  for (auto& c : comm) {
    auto [it, _] = ids.emplace(c, ids.size());
    c = it->second;
  }
  return ids.size();
}

WorkGraph aggregate(const WorkGraph& g, const std::vector<std::size_t>& comm, std::size_t count) {
  WorkGraph out;
  out.adj.resize(count);
  out.self.assign(count, 0.0);
  out.k.assign(count, 0.0);
  out.two_m = g.two_m;
  std::vector<std::map<std::size_t, double>> links(count);
  for (std::size_t i = 0; i < g.adj.size(); ++i) {
    const std::size_t ci = comm[i];
    out.self[ci] += g.self[i];
    out.k[ci] += g.k[i];
    for (const auto& [j, w] : g.adj[i]) {
      if (comm[j] == ci) {
        out.self[ci] += w;
      } else {
        links[ci][comm[j]] += w;
      }
    }
  }
  for (std::size_t c = 0; c < count; ++c) {
    for (const auto& [d, w] : links[c]) out.adj[c].emplace_back(d, w);
  }
  return out;
}

}  // namespace

Partition detect_communities(const RequestGraph& graph) {
  const std::size_t n = graph.size();
  Partition p;
  p.membership.resize(n);
  std::iota(p.membership.begin(), p.membership.end(), 0);
  p.count = static_cast<int>(n);
  if (graph.total_weight() <= 0.0) return p;

  WorkGraph g;
  g.adj.resize(n);
  g.self.assign(n, 0.0);
  g.k.resize(n);
  g.two_m = 2.0 * graph.total_weight();
  for (std::size_t i = 0; i < n; ++i) {
    g.k[i] = graph.degree(i);
    for (const auto& e : graph.neighbors(i)) g.adj[i].emplace_back(e.to, e.weight);
  }

  std::vector<std::size_t> node_comm(n);
  std::iota(node_comm.begin(), node_comm.end(), 0);
  while (true) {
    std::vector<std::size_t> comm(g.adj.size());
    std::iota(comm.begin(), comm.end(), 0);
    if (!local_moves(g, comm)) break;
    const std::size_t count = renumber(comm);
    for (auto& c : node_comm) c = comm[c];
    if (count == g.adj.size()) break;
    g = aggregate(g, comm, count);
  }
  renumber(node_comm);
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    p.membership[i] = static_cast<int>(node_comm[i]);
    count = std::max(count, node_comm[i] + 1);
  }
  p.count = static_cast<int>(count);
  p.modularity = modularity(graph, p.membership);
  return p;
}

CommunityModel build_community_model(const std::vector<EmbeddingVector>& vectors,
                                     const std::vector<double>& output_lengths,
                                     std::size_t k_neighbors) {
  if (!output_lengths.empty() && output_lengths.size() != vectors.size()) {
    throw Error("community model: output lengths do not align with vectors");
  }
  CommunityModel model;
  if (vectors.empty()) return model;
  const RequestGraph graph = build_graph(vectors, k_neighbors);
  const Partition part = detect_communities(graph);
  model.modularity = part.modularity;
  model.communities.resize(part.count);
  const std::size_t dim = vectors.front().size();
  for (int c = 0; c < part.count; ++c) {
    model.communities[c].id = c;
    model.communities[c].centroid.assign(dim, 0.0);
  }
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    Community& c = model.communities[part.membership[i]];
    c.members.push_back(i);
    for (std::size_t d = 0; d < dim; ++d) c.centroid[d] += vectors[i][d];
    if (!output_lengths.empty()) c.output_lengths.push_back(output_lengths[i]);
  }
  for (auto& c : model.communities) {
    for (double& x : c.centroid) x /= static_cast<double>(c.members.size());
    if (!c.output_lengths.empty()) c.length_model = stats::kde_fit(c.output_lengths);
  }
  return model;
}

int assign_request(const CommunityModel& model, const EmbeddingVector& vector) {
  if (model.empty()) throw Error("assign_request: empty community model");
  int best = model.communities.front().id;
  double best_sim = -2.0;
  for (const auto& c : model.communities) {
    const double s = cosine(vector, c.centroid);
    if (s > best_sim || (s == best_sim && c.id < best)) {
      best_sim = s;
      best = c.id;
    }
  }
  return best;
}

std::vector<CorpusEntry> read_corpus(const std::filesystem::path& source) {
  const std::string text = read_file(source);
  std::vector<CorpusEntry> out;
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      CorpusEntry e;
      e.text = j.at("text").get<std::string>();
      e.output_length = j.at("output_length").get<double>();
      if (e.text.empty() || !(e.output_length > 0.0)) {
        throw ParseError("corpus entry needs non-empty text and output_length > 0", line_no);
      }
      out.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(source.string() + ": " + ex.what(), line_no);
    }
  }
  return out;
}

}  // namespace enova
