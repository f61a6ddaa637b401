#pragma once

// Request-task clustering: a similarity graph over request embeddings is
// partitioned by modularity maximization, and each community keeps a centroid
// and the output lengths observed for its members.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "enova/core.hpp"
#include "enova/embedding.hpp"
#include "enova/stats.hpp"

namespace enova {

// Undirected weighted graph without self-loops.
class RequestGraph {
 public:
  struct Edge {
    std::size_t to;
    double weight;
  };

  explicit RequestGraph(std::size_t n = 0) : adjacency_(n), degree_(n, 0.0) {}

  // Adds weight to edge (i, j); i != j, weight > 0.
  void add_edge(std::size_t i, std::size_t j, double weight);

  std::size_t size() const { return adjacency_.size(); }
  std::size_t edge_count() const;
  const std::vector<Edge>& neighbors(std::size_t i) const { return adjacency_[i]; }
  double weight(std::size_t i, std::size_t j) const;
  double degree(std::size_t i) const { return degree_[i]; }  // k_i
  double total_weight() const { return total_; }             // m

 private:
  std::vector<std::vector<Edge>> adjacency_;
  std::vector<double> degree_;
  double total_ = 0.0;
};

inline constexpr std::size_t kDefaultNeighbors = 10;

// Mutual k-nearest-neighbour graph by cosine similarity; an edge (i, j)
// exists iff each is among the other's k most similar vectors, with weight
// max(cosine, 0). Zero-weight edges are dropped. Ties in the neighbour
// ranking go to the lower index.
RequestGraph build_graph(const std::vector<EmbeddingVector>& vectors,
                         std::size_t k_neighbors = kDefaultNeighbors);

// Q = 1/(2m) sum_ij [A_ij - k_i k_j / (2m)] delta(c_i, c_j); 0 for an edgeless graph.
double modularity(const RequestGraph& graph, const std::vector<int>& membership);

struct Partition {
  std::vector<int> membership;  // community id per node, ids 0..count-1
  int count = 0;
  double modularity = 0.0;
};

// Louvain: local moves then aggregation, repeated until Q stops improving.
// Community ids are numbered by first appearance in node order.
Partition detect_communities(const RequestGraph& graph);

struct Community {
  int id = 0;
  std::vector<std::size_t> members;
  EmbeddingVector centroid;  // mean of member vectors
  std::vector<double> output_lengths;
  std::optional<stats::KdeModel> length_model;  // when lengths were observed
};

struct CommunityModel {
  std::vector<Community> communities;
  double modularity = 0.0;

  bool empty() const { return communities.empty(); }
};

// Builds the graph, partitions it and summarizes each community. When
// output_lengths is non-empty it must align with vectors.
CommunityModel build_community_model(const std::vector<EmbeddingVector>& vectors,
                                     const std::vector<double>& output_lengths,
                                     std::size_t k_neighbors = kDefaultNeighbors);

// argmax_c cosine(vector, centroid_c); ties go to the lowest id.
int assign_request(const CommunityModel& model, const EmbeddingVector& vector);

// Corpus file: JSON lines {"text": ..., "output_length": ...}.
struct CorpusEntry {
  std::string text;
  double output_length = 0.0;
};

std::vector<CorpusEntry> read_corpus(const std::filesystem::path& source);

}  // namespace enova
