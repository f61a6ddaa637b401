#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace enova {

using EmbeddingVector = std::vector<double>;

double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

// Deterministic text -> vector mapping.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string name() const = 0;
  virtual std::size_t dimension() const = 0;
  virtual std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) const = 0;
};

// Throws Error for empty text.
EmbeddingVector embed(const EmbeddingProvider& provider, std::string_view text);
std::vector<EmbeddingVector> embed_all(const EmbeddingProvider& provider,
                                       const std::vector<std::string>& texts);

// Hashed character n-gram term frequencies, L2-normalized. Text is
// lower-cased (ASCII) and padded with one space on each side.
class HashedNgramEmbedding : public EmbeddingProvider {
 public:
  explicit HashedNgramEmbedding(std::size_t n = 3, std::size_t dimension = 256);

  std::string name() const override { return "hashed-ngram"; }
  std::size_t dimension() const override { return dimension_; }
  std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) const override;

 private:
  std::size_t n_;
  std::size_t dimension_;
};

// POSTs {"texts": [...]} to an HTTP endpoint and expects {"vectors": [[...], ...]}.
// Any transport or format failure throws Error.
class RemoteEmbedding : public EmbeddingProvider {
 public:
  // url: http://host[:port]/path
  RemoteEmbedding(std::string url, std::size_t dimension, double timeout_s = 30.0);

  std::string name() const override { return "remote:" + url_; }
  std::size_t dimension() const override { return dimension_; }
  std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) const override;

 private:
  std::string url_;
  std::string host_;
  int port_ = 80;
  std::string path_;
  std::size_t dimension_;
  double timeout_s_;
};

}  // namespace enova
