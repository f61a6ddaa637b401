#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "enova/taskcluster.hpp"
#include "enova/trace_io.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace enova;

namespace {

RequestGraph to_graph(const std::vector<std::vector<double>>& a) {
  RequestGraph g(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      if (a[i][j] > 0) g.add_edge(i, j, a[i][j]);
    }
  }
  return g;
}

std::vector<EmbeddingVector> blobs(std::size_t per_blob, std::size_t blob_count, double noise,
                                   std::uint64_t seed, std::vector<int>* truth) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, noise);
  std::vector<EmbeddingVector> out;
  for (std::size_t i = 0; i < per_blob * blob_count; ++i) {
    const std::size_t b = i % blob_count;
    EmbeddingVector v(8, 0.0);
    v[b] = 1.0;
    for (auto& x : v) x += g(rng);
    out.push_back(v);
    if (truth) truth->push_back(static_cast<int>(b));
  }
  return out;
}

}  // namespace

TEST(Modularity, TwoDisjointTriangles) {
  std::vector<std::vector<double>> a(6, std::vector<double>(6, 0.0));
  for (auto [i, j] : {std::pair{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}}) {
    a[i][j] = a[j][i] = 1.0;
  }
  const auto g = to_graph(a);
  EXPECT_EQ(g.edge_count(), 6u);
  EXPECT_DOUBLE_EQ(g.total_weight(), 6.0);
  EXPECT_NEAR(modularity(g, {0, 0, 0, 1, 1, 1}), 0.5, 1e-12);
  EXPECT_NEAR(modularity(g, {0, 0, 0, 0, 0, 0}), 0.0, 1e-12);
  const auto p = detect_communities(g);
  EXPECT_EQ(p.count, 2);
  EXPECT_EQ(p.membership, (std::vector<int>{0, 0, 0, 1, 1, 1}));
  EXPECT_NEAR(p.modularity, 0.5, 1e-12);
  EXPECT_DOUBLE_EQ(modularity(RequestGraph(4), {0, 1, 2, 3}), 0.0);
}

TEST(Modularity, MatchesMatrixFormula) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 3 + trial % 10;
    std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (u(rng) < 0.4) a[i][j] = a[j][i] = 0.1 + u(rng);
      }
    }
    std::vector<int> c(n);
    for (auto& x : c) x = static_cast<int>(u(rng) * 3);
    EXPECT_NEAR(modularity(to_graph(a), c), oracle::modularity(a, c), 1e-12);
  }
}

TEST(Louvain, NearOptimalOnSmallGraphs) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 5 + trial % 4;
    std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (u(rng) < 0.45) a[i][j] = a[j][i] = 0.2 + u(rng);
      }
    }
    const double best = oracle::best_modularity(a);
    const auto g = to_graph(a);
    const auto p = detect_communities(g);
    EXPECT_NEAR(p.modularity, oracle::modularity(a, p.membership), 1e-12);
    EXPECT_LE(p.modularity, best + 1e-12);
    EXPECT_GE(p.modularity, best - 0.02) << "trial " << trial;
    // Ids are numbered by first appearance.
    int seen = -1;
    for (int c : p.membership) {
      EXPECT_LE(c, seen + 1);
      seen = std::max(seen, c);
    }
    EXPECT_EQ(seen + 1, p.count);
  }
}

TEST(Graph, MutualNearestNeighbours) {
  // 0 and 1 are each other's nearest; 2 points at 1 but 1 prefers 0.
  const std::vector<EmbeddingVector> v = {{1.0, 0.0}, {0.99, 0.141}, {0.9, 0.436}, {0.0, 1.0}};
  const auto g = build_graph(v, 1);
  EXPECT_GT(g.weight(0, 1), 0.0);
  EXPECT_EQ(g.weight(1, 2), 0.0);
  EXPECT_EQ(g.weight(2, 3), 0.0);
  EXPECT_EQ(g.edge_count(), 1u);
  EXPECT_NEAR(g.weight(0, 1), cosine(v[0], v[1]), 1e-12);
  // Orthogonal vectors give zero weight and no edge.
  const auto h = build_graph({{1.0, 0.0}, {0.0, 1.0}}, 1);
  EXPECT_EQ(h.edge_count(), 0u);
}

TEST(Graph, SymmetricWithoutSelfLoops) {
  const auto v = blobs(20, 3, 0.3, 8, nullptr);
  const auto g = build_graph(v, 6);
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_LE(g.neighbors(i).size(), 6u);
    for (const auto& e : g.neighbors(i)) {
      EXPECT_NE(e.to, i);
      EXPECT_DOUBLE_EQ(g.weight(e.to, i), e.weight);
    }
  }
}

TEST(Communities, RecoversTwoBlobs) {
  std::vector<int> truth;
  const auto v = blobs(15, 2, 0.1, 2, &truth);
  const std::vector<double> lengths(v.size(), 100.0);
  const auto model = build_community_model(v, lengths, 10);
  std::vector<int> found(v.size(), -1);
  for (const auto& c : model.communities) {
    for (auto m : c.members) found[m] = c.id;
  }
  EXPECT_DOUBLE_EQ(oracle::adjusted_rand(truth, found), 1.0);
  EXPECT_GT(model.modularity, 0.3);
  for (const auto& c : model.communities) {
    ASSERT_TRUE(c.length_model.has_value());
    EXPECT_EQ(c.output_lengths.size(), c.members.size());
    EXPECT_EQ(c.centroid.size(), 8u);
  }
}

TEST(Communities, CentroidIsMemberMean) {
  const auto v = blobs(10, 2, 0.2, 4, nullptr);
  const auto model = build_community_model(v, {}, 5);
  for (const auto& c : model.communities) {
    EXPECT_FALSE(c.length_model.has_value());
    for (std::size_t d = 0; d < 8; ++d) {
      double s = 0.0;
      for (auto m : c.members) s += v[m][d];
      EXPECT_NEAR(c.centroid[d], s / static_cast<double>(c.members.size()), 1e-12);
    }
  }
  EXPECT_THROW(build_community_model(v, {1.0, 2.0}, 5), Error);
}

TEST(Communities, AssignPicksMostSimilarCentroidAndBreaksTiesLow) {
  CommunityModel m;
  m.communities.push_back({0, {}, {1.0, 0.0}, {}, std::nullopt});
  m.communities.push_back({1, {}, {0.0, 1.0}, {}, std::nullopt});
  m.communities.push_back({2, {}, {1.0, 1.0}, {}, std::nullopt});
  EXPECT_EQ(assign_request(m, {0.9, 0.1}), 0);
  EXPECT_EQ(assign_request(m, {0.1, 0.9}), 1);
  EXPECT_EQ(assign_request(m, {0.5, 0.5}), 2);
  m.communities[2].centroid = {0.0, 2.0};  // same direction as community 1
  EXPECT_EQ(assign_request(m, {0.0, 1.0}), 1);
}

TEST(Embedding, HashedNgramProperties) {
  HashedNgramEmbedding e(3, 64);
  const auto a = embed(e, "Solve the equation");
  EXPECT_EQ(a.size(), 64u);
  double norm = 0.0;
  for (double x : a) norm += x * x;
  EXPECT_NEAR(norm, 1.0, 1e-12);
  EXPECT_EQ(a, embed(e, "SOLVE the EQUATION"));
  EXPECT_GT(cosine(a, embed(e, "Solve the equations")), cosine(a, embed(e, "Write a parser")));
  EXPECT_THROW(embed(e, ""), Error);
  EXPECT_THROW(HashedNgramEmbedding(0, 8), Error);
  EXPECT_THROW(cosine({1.0}, {1.0, 0.0}), Error);
}

TEST(Embedding, RemoteProvider) {
  httplib::Server server;
  server.Post("/embed", [](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    nlohmann::json out;
    out["vectors"] = nlohmann::json::array();
    for (const auto& t : body.at("texts")) {
      out["vectors"].push_back({static_cast<double>(t.get<std::string>().size()), 1.0});
    }
    res.set_content(out.dump(), "application/json");
  });
  server.Post("/broken", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("{\"nope\": 1}", "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  const std::string base = "http://127.0.0.1:" + std::to_string(port);
  RemoteEmbedding remote(base + "/embed", 2, 5.0);
  const auto v = embed_all(remote, {"abc", "hello"});
  EXPECT_EQ(v, (std::vector<EmbeddingVector>{{3.0, 1.0}, {5.0, 1.0}}));
  EXPECT_THROW(embed_all(RemoteEmbedding(base + "/broken", 2, 5.0), {"x"}), Error);
  EXPECT_THROW(embed_all(RemoteEmbedding(base + "/embed", 3, 5.0), {"x"}), Error);
  EXPECT_THROW(embed_all(RemoteEmbedding(base + "/missing", 2, 5.0), {"x"}), Error);
  EXPECT_THROW(RemoteEmbedding("https://example.com/x", 2), Error);
  server.stop();
  worker.join();
}

TEST(Corpus, ReadsAndRejects) {
  const auto dir = enova::testing::scratch_dir("corpus");
  auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream(dir / name) << body;
    return dir / name;
  };
  const auto good = read_corpus(write("good.jsonl",
                                      "{\"text\": \"a\", \"output_length\": 10}\n\n"
                                      "{\"text\": \"b\", \"output_length\": 20.5}\n"));
  ASSERT_EQ(good.size(), 2u);
  EXPECT_EQ(good[1].text, "b");
  EXPECT_DOUBLE_EQ(good[1].output_length, 20.5);

  try {
    read_corpus(write("bad.jsonl", "{\"text\": \"a\", \"output_length\": 10}\n{oops\n"));
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(read_corpus(write("nolen.jsonl", "{\"text\": \"a\"}\n")), ParseError);
  EXPECT_THROW(read_corpus(write("zero.jsonl", "{\"text\": \"a\", \"output_length\": 0}\n")),
               ParseError);
  EXPECT_THROW(read_corpus(dir / "absent.jsonl"), Error);
}

TEST(Corpus, BundledCorpusSplitsByDomain) {
  const auto corpus = read_corpus(enova::testing::source_path("data/corpus.jsonl"));
  ASSERT_EQ(corpus.size(), 240u);
  std::vector<std::string> texts;
  std::vector<double> lengths;
  for (const auto& c : corpus) {
    texts.push_back(c.text);
    lengths.push_back(c.output_length);
  }
  const auto model = build_community_model(embed_all(HashedNgramEmbedding(), texts), lengths, 40);
  for (const auto& c : model.communities) {
    std::set<std::size_t> domains;
    for (auto m : c.members) domains.insert(m % 2);
    EXPECT_EQ(domains.size(), 1u) << "community " << c.id << " mixes domains";
  }
}
