#include "enova/embedding.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>

#include "enova/core.hpp"
#include "httplib.h"
#include "json.hpp"

namespace enova {

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.size() != b.size()) throw Error("cosine: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

EmbeddingVector embed(const EmbeddingProvider& provider, std::string_view text) {
  return embed_all(provider, {std::string(text)}).front();
}

std::vector<EmbeddingVector> embed_all(const EmbeddingProvider& provider,
                                       const std::vector<std::string>& texts) {
  for (const auto& t : texts) {
    if (t.empty()) throw Error("embed: empty text");
  }
  if (texts.empty()) return {};
  auto out = provider.embed_batch(texts);
  if (out.size() != texts.size()) {
    throw Error("embed: provider returned " + std::to_string(out.size()) + " vectors for " +
                std::to_string(texts.size()) + " texts");
  }
  for (const auto& v : out) {
    if (v.size() != provider.dimension()) throw Error("embed: wrong vector dimension");
    for (double x : v) {
      if (!std::isfinite(x)) throw Error("embed: non-finite vector component");
    }
  }
  return out;
}

HashedNgramEmbedding::HashedNgramEmbedding(std::size_t n, std::size_t dimension)
    : n_(n), dimension_(dimension) {
  if (n_ == 0 || dimension_ == 0) throw Error("hashed embedding: n and dimension must be > 0");
}

std::vector<EmbeddingVector> HashedNgramEmbedding::embed_batch(
    const std::vector<std::string>& texts) const {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& raw : texts) {
    std::string text = " ";
    for (unsigned char c : raw) text.push_back(static_cast<char>(std::tolower(c)));
    text.push_back(' ');
    EmbeddingVector v(dimension_, 0.0);
    const std::size_t grams = text.size() >= n_ ? text.size() - n_ + 1 : 1;
    for (std::size_t i = 0; i < grams; ++i) {
      std::uint64_t h = 14695981039346656037ULL;  // FNV-1a
      for (std::size_t k = i; k < std::min(text.size(), i + n_); ++k) {
        h ^= static_cast<unsigned char>(text[k]);
        h *= 1099511628211ULL;
      }
      v[h % dimension_] += 1.0;
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    out.push_back(std::move(v));
  }
  return out;
}

RemoteEmbedding::RemoteEmbedding(std::string url, std::size_t dimension, double timeout_s)
    : url_(std::move(url)), dimension_(dimension), timeout_s_(timeout_s) {
  constexpr std::string_view kScheme = "http://";
  if (url_.rfind(kScheme, 0) != 0) throw Error("remote embedding: only http:// URLs supported");
  std::string rest = url_.substr(kScheme.size());
  const auto slash = rest.find('/');
  std::string authority = rest.substr(0, slash);
  path_ = slash == std::string::npos ? "/" : rest.substr(slash);
  const auto colon = authority.rfind(':');
  if (colon != std::string::npos) {
    host_ = authority.substr(0, colon);
    port_ = std::stoi(authority.substr(colon + 1));
  } else {
    host_ = authority;
  }
  if (host_.empty()) throw Error("remote embedding: missing host in '" + url_ + "'");
}

std::vector<EmbeddingVector> RemoteEmbedding::embed_batch(
    const std::vector<std::string>& texts) const {
  httplib::Client client(host_, port_);
  const auto secs = static_cast<time_t>(timeout_s_);
  const auto usecs = static_cast<time_t>((timeout_s_ - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  nlohmann::json body = {{"texts", texts}};
  auto res = client.Post(path_, body.dump(), "application/json");
  if (!res) {
    throw Error("remote embedding: request to " + url_ + " failed: " +
                httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error("remote embedding: " + url_ + " returned HTTP " + std::to_string(res->status));
  }
  try {
    auto j = nlohmann::json::parse(res->body);
    return j.at("vectors").get<std::vector<EmbeddingVector>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("remote embedding: malformed response: ") + e.what());
  }
}

}  // namespace enova
