#pragma once

// Independent reference implementations used by the tests and the acceptance
// run. None of these call into the library code they check.

#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <vector>

#include "enova/core.hpp"
#include "enova/recommender.hpp"

namespace enova::oracle {

// Modularity straight from the adjacency matrix.
inline double modularity(const std::vector<std::vector<double>>& a, const std::vector<int>& c) {
  const std::size_t n = a.size();
  std::vector<double> k(n, 0.0);
  double two_m = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) k[i] += a[i][j];
    two_m += k[i];
  }
  if (two_m == 0.0) return 0.0;
  double q = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (c[i] == c[j]) q += a[i][j] - k[i] * k[j] / two_m;
    }
  }
  return q / two_m;
}

// Best modularity over every set partition (restricted growth strings).
inline double best_modularity(const std::vector<std::vector<double>>& a) {
  const std::size_t n = a.size();
  double best = -1.0;
  std::vector<int> cur;
  std::function<void(int)> walk = [&](int next_id) {
    if (cur.size() == n) {
      best = std::max(best, modularity(a, cur));
      return;
    }
    for (int c = 0; c <= next_id; ++c) {
      cur.push_back(c);
      walk(std::max(next_id, c + 1));
      cur.pop_back();
    }
  };
  walk(0);
  return best;
}

inline double adjusted_rand(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1;
    ra[a[i]] += 1;
    rb[b[i]] += 1;
  }
  auto c2 = [](double x) { return x * (x - 1) / 2; };
  double index = 0, sa = 0, sb = 0;
  for (const auto& [_, v] : joint) index += c2(v);
  for (const auto& [_, v] : ra) sa += c2(v);
  for (const auto& [_, v] : rb) sb += c2(v);
  const double expected = sa * sb / c2(static_cast<double>(a.size()));
  const double top = (sa + sb) / 2;
  return top == expected ? 1.0 : (index - expected) / (top - expected);
}

// Exhaustive search over every integer replica vector; nullopt when no
// vector covers the demand.
inline std::optional<double> placement(const PlacementProblem& p) {
  std::optional<double> best;
  std::vector<int> r(p.options.size(), 0);
  std::function<void(std::size_t)> walk = [&](std::size_t i) {
    if (i == p.options.size()) {
      double cap = 0.0, obj = 0.0;
      for (std::size_t k = 0; k < r.size(); ++k) {
        cap += p.options[k].n_limit * r[k];
        obj += p.options[k].score * r[k];
      }
      if (cap >= p.demand && (!best || obj < *best)) best = obj;
      return;
    }
    const auto& o = p.options[i];
    for (r[i] = 0; o.parallel_size * r[i] <= o.device_count; ++r[i]) walk(i + 1);
    r[i] = 0;
  };
  walk(0);
  return best;
}

// Scalar re-implementation of the VAE from its flat parameter layout
// w1 (h x d, column-major), b1, wmu (z x h), bmu, wlv, blv, w3 (h x z), b3,
// w4 (d x h), b4.
struct ScalarVae {
  std::vector<double> p;
  int h, z;
  static constexpr int d = static_cast<int>(kMetricDims);

  double at(std::size_t offset, int rows, int i, int j) const {
    return p[offset + static_cast<std::size_t>(j * rows + i)];
  }

  // -ELBO with beta = 1 for one row and fixed noise.
  double negative_elbo(const std::vector<double>& x, const std::vector<double>& eps) const {
    const std::size_t o_w1 = 0, o_b1 = o_w1 + h * d, o_wmu = o_b1 + h, o_bmu = o_wmu + z * h,
                      o_wlv = o_bmu + z, o_blv = o_wlv + z * h, o_w3 = o_blv + z,
                      o_b3 = o_w3 + h * z, o_w4 = o_b3 + h, o_b4 = o_w4 + d * h;
    std::vector<double> h1(h), mu(z), lv(z), zz(z), h2(h);
    for (int i = 0; i < h; ++i) {
      double a = p[o_b1 + i];
      for (int j = 0; j < d; ++j) a += at(o_w1, h, i, j) * x[j];
      h1[i] = std::tanh(a);
    }
    for (int k = 0; k < z; ++k) {
      mu[k] = p[o_bmu + k];
      lv[k] = p[o_blv + k];
      for (int i = 0; i < h; ++i) {
        mu[k] += at(o_wmu, z, k, i) * h1[i];
        lv[k] += at(o_wlv, z, k, i) * h1[i];
      }
      zz[k] = mu[k] + std::exp(lv[k] / 2) * eps[k];
    }
    for (int i = 0; i < h; ++i) {
      double a = p[o_b3 + i];
      for (int k = 0; k < z; ++k) a += at(o_w3, h, i, k) * zz[k];
      h2[i] = std::tanh(a);
    }
    double log_lik = 0.0;
    for (int j = 0; j < d; ++j) {
      double xr = p[o_b4 + j];
      for (int i = 0; i < h; ++i) xr += at(o_w4, d, j, i) * h2[i];
      log_lik += -0.5 * std::log(2 * std::numbers::pi) - 0.5 * (x[j] - xr) * (x[j] - xr);
    }
    double kl = 0.0;
    for (int k = 0; k < z; ++k) kl += -0.5 * (1 + lv[k] - mu[k] * mu[k] - std::exp(lv[k]));
    return -(log_lik - kl);
  }
};

}  // namespace enova::oracle
