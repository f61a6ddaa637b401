#include "enova/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "enova/trace_io.hpp"
#include "json.hpp"

namespace enova {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

// Views of the flat parameter vector.
template <class Vec>
struct Layers {
  using Mat = std::conditional_t<std::is_const_v<Vec>, Eigen::Map<const Eigen::MatrixXd>,
                                 Eigen::Map<Eigen::MatrixXd>>;
  using Col = std::conditional_t<std::is_const_v<Vec>, Eigen::Map<const Eigen::VectorXd>,
                                 Eigen::Map<Eigen::VectorXd>>;
  Mat w1, wmu, wlv, w3, w4;
  Col b1, bmu, blv, b3, b4;

  Layers(Vec& p, int d, int h, int z)
      : w1(p.data(), h, d),
        wmu(p.data() + h * d + h, z, h),
        wlv(p.data() + h * d + h + z * h + z, z, h),
        w3(p.data() + h * d + h + 2 * (z * h + z), h, z),
        w4(p.data() + h * d + h + 2 * (z * h + z) + h * z + h, d, h),
        b1(p.data() + h * d, h),
        bmu(p.data() + h * d + h + z * h, z),
        blv(p.data() + h * d + h + 2 * z * h + z, z),
        b3(p.data() + h * d + h + 2 * (z * h + z) + h * z, h),
        b4(p.data() + h * d + h + 2 * (z * h + z) + h * z + h + d * h, d) {}
};

std::size_t parameter_size(int d, int h, int z) {
  return static_cast<std::size_t>(h * d + h + 2 * (z * h + z) + h * z + h + d * h + d);
}

Eigen::VectorXd to_eigen(const MetricVector& m) {
  Eigen::VectorXd v(kMetricDims);
  for (std::size_t i = 0; i < kMetricDims; ++i) v(static_cast<Eigen::Index>(i)) = m[i];
  return v;
}

}  // namespace

void LabeledDataset::validate() const {
  if (rows.size() != labels.size()) throw Error("labeled dataset: rows and labels differ in length");
  for (int l : labels) {
    if (l != 1 && l != -1) throw Error("labeled dataset: labels must be +1 or -1");
  }
  for (const auto& r : rows) {
    for (double v : r) {
      if (!std::isfinite(v)) throw Error("labeled dataset: non-finite value");
    }
  }
}

bool Normalizer::any_floored() const {
  return std::any_of(floored.begin(), floored.end(), [](bool b) { return b; });
}

MetricVector Normalizer::apply(const MetricVector& m) const {
  MetricVector out;
  for (std::size_t i = 0; i < kMetricDims; ++i) out[i] = (m[i] - mean[i]) / std[i];
  return out;
}

Normalizer fit_normalizer(std::span<const MetricVector> rows) {
  if (rows.size() < 2) throw Error("normalize: need at least 2 rows");
  Normalizer n;
  const double count = static_cast<double>(rows.size());
  for (std::size_t d = 0; d < kMetricDims; ++d) {
    double s = 0.0;
    for (const auto& r : rows) s += r[d];
    const double mu = s / count;
    double ss = 0.0;
    for (const auto& r : rows) ss += (r[d] - mu) * (r[d] - mu);
    double sd = std::sqrt(ss / count);
    if (!(sd >= Normalizer::kMinStd)) {
      sd = Normalizer::kMinStd;
      n.floored[d] = true;
    }
    n.mean[d] = mu;
    n.std[d] = sd;
  }
  return n;
}

LabeledDataset normalize(const LabeledDataset& dataset, Normalizer& stats) {
  dataset.validate();
  stats = fit_normalizer(dataset.rows);
  LabeledDataset out;
  out.labels = dataset.labels;
  out.rows.reserve(dataset.rows.size());
  for (const auto& r : dataset.rows) out.rows.push_back(stats.apply(r));
  return out;
}

BetaController::BetaController(double setpoint, double kp, double ki, double beta_max,
                               double beta_initial)
    : setpoint_(setpoint),
      kp_(kp),
      ki_(ki),
      beta_max_(beta_max),
      beta_initial_(beta_initial),
      beta_(std::clamp(beta_initial, 0.0, beta_max)) {}

double BetaController::update(double observed_kl) {
  const double e = observed_kl - setpoint_;
  const double raw = beta_initial_ + kp_ * e + ki_ * (integral_ + e);
  const bool high = raw > beta_max_ && e > 0.0;
  const bool low = raw < 0.0 && e < 0.0;
  if (!high && !low) integral_ += e;
  beta_ = std::clamp(beta_initial_ + kp_ * e + ki_ * integral_, 0.0, beta_max_);
  return beta_;
}

const char* to_string(Direction d) {
  switch (d) {
    case Direction::kNone:
      return "none";
    case Direction::kOverload:
      return "overload";
    case Direction::kUnderload:
      return "underload";
  }
  return "none";
}

VaeDetector::VaeDetector(VaeConfig config) : config_(config) {
  if (config_.latent < 1 || config_.hidden < 1) throw Error("vae: latent and hidden must be >= 1");
  const int d = static_cast<int>(kMetricDims);
  params_ = Eigen::VectorXd::Zero(
      static_cast<Eigen::Index>(parameter_size(d, config_.hidden, config_.latent)));
  Layers<Eigen::VectorXd> L(params_, d, config_.hidden, config_.latent);
  std::mt19937_64 rng(config_.seed);
  auto xavier = [&](auto& w) {
    const double a = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    std::uniform_real_distribution<double> u(-a, a);
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = u(rng);
    }
  };
  xavier(L.w1);
  xavier(L.wmu);
  xavier(L.wlv);
  xavier(L.w3);
  xavier(L.w4);
}

void VaeDetector::set_parameters(const Eigen::VectorXd& p) {
  if (p.size() != params_.size()) throw Error("vae: parameter size mismatch");
  params_ = p;
}

double VaeDetector::loss(const Eigen::MatrixXd& x, std::span<const int> labels,
                         const Eigen::MatrixXd& eps, double beta, Eigen::VectorXd* grad) const {
  const int d = static_cast<int>(kMetricDims);
  const int h = config_.hidden;
  const int zd = config_.latent;
  const Eigen::Index b = x.cols();
  if (x.rows() != d || eps.rows() != zd || eps.cols() != b ||
      labels.size() != static_cast<std::size_t>(b) || b == 0) {
    throw Error("vae loss: shape mismatch");
  }
  Layers<const Eigen::VectorXd> L(params_, d, h, zd);

  const Eigen::MatrixXd h1 = ((L.w1 * x).colwise() + L.b1).array().tanh().matrix();
  const Eigen::MatrixXd mu = (L.wmu * h1).colwise() + L.bmu;
  const Eigen::MatrixXd lv = (L.wlv * h1).colwise() + L.blv;
  const Eigen::MatrixXd sd = (0.5 * lv.array()).exp().matrix();
  const Eigen::MatrixXd z = mu + sd.cwiseProduct(eps);
  const Eigen::MatrixXd h2 = ((L.w3 * z).colwise() + L.b3).array().tanh().matrix();
  const Eigen::MatrixXd xr = (L.w4 * h2).colwise() + L.b4;
  const Eigen::MatrixXd diff = xr - x;

  const double inv_b = 1.0 / static_cast<double>(b);
  Eigen::RowVectorXd rec_weight(b), kl_weight(b);
  double total = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const double nll = 0.5 * diff.col(i).squaredNorm() + 0.5 * d * kLog2Pi;
    const double kl =
        0.5 * (mu.col(i).squaredNorm() + lv.col(i).array().exp().sum() - lv.col(i).sum() - zd);
    if (labels[static_cast<std::size_t>(i)] > 0) {
      total += nll + beta * kl;
      rec_weight(i) = inv_b;
      kl_weight(i) = beta * inv_b;
    } else {
      // The reconstruction term of an anomaly is maximized, up to the cap.
      if (nll < config_.anomaly_cap) {
        total -= nll;
        rec_weight(i) = -inv_b;
      } else {
        total -= config_.anomaly_cap;
        rec_weight(i) = 0.0;
      }
      kl_weight(i) = 0.0;
    }
  }
  if (grad) {
    grad->setZero(params_.size());
    Layers<Eigen::VectorXd> G(*grad, d, h, zd);
    const Eigen::MatrixXd dxr = diff.array().rowwise() * rec_weight.array();
    G.w4 = dxr * h2.transpose();
    G.b4 = dxr.rowwise().sum();
    const Eigen::MatrixXd da2 =
        ((L.w4.transpose() * dxr).array() * (1.0 - h2.array().square())).matrix();
    G.w3 = da2 * z.transpose();
    G.b3 = da2.rowwise().sum();
    const Eigen::MatrixXd dz = L.w3.transpose() * da2;
    const Eigen::MatrixXd dmu = dz + (mu.array().rowwise() * kl_weight.array()).matrix();
    const Eigen::MatrixXd dlv =
        (dz.array() * eps.array() * sd.array() * 0.5 +
         ((lv.array().exp() - 1.0) * 0.5).rowwise() * kl_weight.array())
            .matrix();
    G.wmu = dmu * h1.transpose();
    G.bmu = dmu.rowwise().sum();
    G.wlv = dlv * h1.transpose();
    G.blv = dlv.rowwise().sum();
    const Eigen::MatrixXd da1 =
        ((L.wmu.transpose() * dmu + L.wlv.transpose() * dlv).array() *
         (1.0 - h1.array().square()))
            .matrix();
    G.w1 = da1 * x.transpose();
    G.b1 = da1.rowwise().sum();
  }
  return total * inv_b;
}

VaeDetector::Encoding VaeDetector::encode(const Eigen::VectorXd& x) const {
  Layers<const Eigen::VectorXd> L(params_, static_cast<int>(kMetricDims), config_.hidden,
                                  config_.latent);
  const Eigen::VectorXd h1 = (L.w1 * x + L.b1).array().tanh().matrix();
  return {L.wmu * h1 + L.bmu, L.wlv * h1 + L.blv};
}

Eigen::VectorXd VaeDetector::decode(const Eigen::VectorXd& z) const {
  Layers<const Eigen::VectorXd> L(params_, static_cast<int>(kMetricDims), config_.hidden,
                                  config_.latent);
  const Eigen::VectorXd h2 = (L.w3 * z + L.b3).array().tanh().matrix();
  return L.w4 * h2 + L.b4;
}

double VaeDetector::score_normalized(const Eigen::VectorXd& x) const {
  const Encoding e = encode(x);
  const double kl = 0.5 * (e.mu.squaredNorm() + e.logvar.array().exp().sum() - e.logvar.sum() -
                           static_cast<double>(config_.latent));
  return std::max(0.0, kl);
}

double VaeDetector::score(const MetricVector& m) const {
  if (!trained_) throw Error("vae: detector is not trained");
  return score_normalized(to_eigen(normalizer_.apply(m)));
}

Verdict VaeDetector::detect(const MetricVector& m) const {
  if (!calibrated_) throw Error("vae: detector threshold is not calibrated");
  const Eigen::VectorXd x = to_eigen(normalizer_.apply(m));
  Verdict v;
  v.score = score_normalized(x);
  v.is_anomaly = v.score > threshold_;
  v.md = (x - decode(encode(x).mu)).mean();
  if (v.is_anomaly) v.direction = v.md > 0.0 ? Direction::kOverload : Direction::kUnderload;
  if (v.is_anomaly && v.md == 0.0) v.direction = Direction::kOverload;
  return v;
}

VaeDetector train(const LabeledDataset& dataset, const VaeConfig& config) {
  dataset.validate();
  if (std::none_of(dataset.labels.begin(), dataset.labels.end(), [](int l) { return l > 0; })) {
    throw Error("train: dataset needs at least one normal row");
  }
  VaeDetector det(config);
  Normalizer stats;
  const LabeledDataset data = normalize(dataset, stats);
  det.normalizer_ = stats;

  const Eigen::Index n = static_cast<Eigen::Index>(data.rows.size());
  const Eigen::Index d = static_cast<Eigen::Index>(kMetricDims);
  Eigen::MatrixXd all(d, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < d; ++k) all(k, i) = data.rows[static_cast<std::size_t>(i)][k];
  }

  std::mt19937_64 rng(config.seed ^ 0x5851f42d4c957f2dULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  BetaController beta(config.kl_setpoint, config.kp, config.ki, config.beta_max,
                      config.beta_initial);
  const double b1 = 0.9, b2 = 0.999, adam_eps = 1e-8;
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(det.params_.size());
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(det.params_.size());
  Eigen::VectorXd grad;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  const Eigen::Index batch = std::max(1, config.batch);
  std::size_t iteration = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index start = 0; start < n; start += batch) {
      const Eigen::Index size = std::min(batch, n - start);
      Eigen::MatrixXd x(d, size), eps(config.latent, size);
      std::vector<int> labels(static_cast<std::size_t>(size));
      for (Eigen::Index c = 0; c < size; ++c) {
        const Eigen::Index row = order[static_cast<std::size_t>(start + c)];
        x.col(c) = all.col(row);
        labels[static_cast<std::size_t>(c)] = data.labels[static_cast<std::size_t>(row)];
        for (int k = 0; k < config.latent; ++k) eps(k, c) = gauss(rng);
      }
      const double current_beta = beta.beta();
      const double value = det.loss(x, labels, eps, current_beta, &grad);
      ++iteration;
      if (!std::isfinite(value) || !grad.allFinite()) {
        throw Error("train: loss diverged at iteration " + std::to_string(iteration));
      }
      // Observed KL and ELBO (beta = 1) on the normal rows of this batch.
      std::vector<Eigen::Index> normal_cols;
      for (Eigen::Index c = 0; c < size; ++c) {
        if (labels[static_cast<std::size_t>(c)] > 0) normal_cols.push_back(c);
      }
      if (!normal_cols.empty()) {
        const auto k = static_cast<Eigen::Index>(normal_cols.size());
        Eigen::MatrixXd xn(d, k), en(config.latent, k);
        for (Eigen::Index c = 0; c < k; ++c) {
          xn.col(c) = x.col(normal_cols[static_cast<std::size_t>(c)]);
          en.col(c) = eps.col(normal_cols[static_cast<std::size_t>(c)]);
        }
        const std::vector<int> ones(static_cast<std::size_t>(k), 1);
        const double with_kl = det.loss(xn, ones, en, 1.0);
        const double without_kl = det.loss(xn, ones, en, 0.0);
        det.elbo_history_.push_back(-with_kl);
        det.beta_history_.push_back(current_beta);
        beta.update(with_kl - without_kl);
      }
      const double t = static_cast<double>(iteration);
      m1 = b1 * m1 + (1.0 - b1) * grad;
      m2 = b2 * m2 + (1.0 - b2) * grad.cwiseProduct(grad);
      const double c1 = 1.0 - std::pow(b1, t), c2 = 1.0 - std::pow(b2, t);
      det.params_.array() -= config.learning_rate * (m1.array() / c1) /
                             ((m2.array() / c2).sqrt() + adam_eps);
    }
  }
  det.trained_ = true;
  return det;
}

double calibrate_threshold(VaeDetector& detector, std::span<const MetricVector> normal_rows,
                           double initial_quantile, double risk_q) {
  std::vector<double> scores;
  scores.reserve(normal_rows.size());
  for (const auto& m : normal_rows) scores.push_back(detector.score(m));
  detector.tail_ = stats::fit_tail_pot(scores, initial_quantile, risk_q);
  detector.threshold_ = detector.tail_.final_threshold;
  detector.calibrated_ = true;
  return detector.threshold_;
}

std::string VaeDetector::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "enova-vae-1";
  j["config"] = {{"hidden", config_.hidden},
                 {"latent", config_.latent},
                 {"epochs", config_.epochs},
                 {"batch", config_.batch},
                 {"learning_rate", config_.learning_rate},
                 {"kl_setpoint", config_.kl_setpoint},
                 {"kp", config_.kp},
                 {"ki", config_.ki},
                 {"beta_max", config_.beta_max},
                 {"beta_initial", config_.beta_initial},
                 {"anomaly_cap", config_.anomaly_cap},
                 {"seed", config_.seed}};
  std::vector<std::string> p;
  p.reserve(static_cast<std::size_t>(params_.size()));
  for (Eigen::Index i = 0; i < params_.size(); ++i) p.push_back(format_number(params_(i)));
  j["parameters"] = p;
  std::vector<std::string> mean, sd;
  for (std::size_t i = 0; i < kMetricDims; ++i) {
    mean.push_back(format_number(normalizer_.mean[i]));
    sd.push_back(format_number(normalizer_.std[i]));
  }
  j["normalizer"] = {{"mean", mean}, {"std", sd}, {"floored", normalizer_.floored}};
  j["trained"] = trained_;
  j["calibrated"] = calibrated_;
  j["threshold"] = format_number(threshold_);
  j["tail"] = {{"threshold_u", format_number(tail_.threshold_u)},
               {"shape_xi", format_number(tail_.shape_xi)},
               {"scale_sigma", format_number(tail_.scale_sigma)},
               {"exceedance_count", tail_.exceedance_count},
               {"sample_count", tail_.sample_count},
               {"risk_q", format_number(tail_.risk_q)},
               {"maximum_likelihood", tail_.maximum_likelihood}};
  return j.dump(1);
}

VaeDetector VaeDetector::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.value("format", "") != "enova-vae-1") throw Error("checkpoint: unknown format");
    VaeConfig c;
    const auto& jc = j.at("config");
    c.hidden = jc.at("hidden").get<int>();
    c.latent = jc.at("latent").get<int>();
    c.epochs = jc.at("epochs").get<int>();
    c.batch = jc.at("batch").get<int>();
    c.learning_rate = jc.at("learning_rate").get<double>();
    c.kl_setpoint = jc.at("kl_setpoint").get<double>();
    c.kp = jc.at("kp").get<double>();
    c.ki = jc.at("ki").get<double>();
    c.beta_max = jc.at("beta_max").get<double>();
    c.beta_initial = jc.at("beta_initial").get<double>();
    c.anomaly_cap = jc.at("anomaly_cap").get<double>();
    c.seed = jc.at("seed").get<std::uint64_t>();
    VaeDetector det(c);
    const auto p = j.at("parameters").get<std::vector<std::string>>();
    if (p.size() != det.parameter_count()) throw Error("checkpoint: parameter count mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      det.params_(static_cast<Eigen::Index>(i)) = parse_number(p[i]);
    }
    const auto mean = j.at("normalizer").at("mean").get<std::vector<std::string>>();
    const auto sd = j.at("normalizer").at("std").get<std::vector<std::string>>();
    const auto fl = j.at("normalizer").at("floored").get<std::vector<bool>>();
    if (mean.size() != kMetricDims || sd.size() != kMetricDims || fl.size() != kMetricDims) {
      throw Error("checkpoint: normalizer dimension mismatch");
    }
    for (std::size_t i = 0; i < kMetricDims; ++i) {
      det.normalizer_.mean[i] = parse_number(mean[i]);
      det.normalizer_.std[i] = parse_number(sd[i]);
      det.normalizer_.floored[i] = fl[i];
    }
    det.trained_ = j.at("trained").get<bool>();
    det.calibrated_ = j.at("calibrated").get<bool>();
    det.threshold_ = parse_number(j.at("threshold").get<std::string>());
    const auto& t = j.at("tail");
    det.tail_.threshold_u = parse_number(t.at("threshold_u").get<std::string>());
    det.tail_.shape_xi = parse_number(t.at("shape_xi").get<std::string>());
    det.tail_.scale_sigma = parse_number(t.at("scale_sigma").get<std::string>());
    det.tail_.exceedance_count = t.at("exceedance_count").get<std::size_t>();
    det.tail_.sample_count = t.at("sample_count").get<std::size_t>();
    det.tail_.risk_q = parse_number(t.at("risk_q").get<std::string>());
    det.tail_.maximum_likelihood = t.at("maximum_likelihood").get<bool>();
    det.tail_.final_threshold = det.threshold_;
    return det;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("checkpoint: ") + e.what());
  }
}

void VaeDetector::save(const std::filesystem::path& path) const { write_file(path, to_json()); }

VaeDetector VaeDetector::load(const std::filesystem::path& path) {
  return from_json(read_file(path));
}

DetectionScores evaluate_point_adjusted(const std::vector<bool>& truth,
                                        const std::vector<bool>& predicted) {
  if (truth.size() != predicted.size()) {
    throw Error("evaluate_point_adjusted: truth and predictions differ in length");
  }
  std::vector<bool> adjusted = predicted;
  for (std::size_t i = 0; i < truth.size();) {
    if (!truth[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    bool hit = false;
    for (; j < truth.size() && truth[j]; ++j) {
      if (predicted[j]) hit = true;
    }
    if (hit) std::fill(adjusted.begin() + static_cast<std::ptrdiff_t>(i),
                       adjusted.begin() + static_cast<std::ptrdiff_t>(j), true);
    i = j;
  }
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (adjusted[i] && truth[i]) ++tp;
    if (adjusted[i] && !truth[i]) ++fp;
    if (!adjusted[i] && truth[i]) ++fn;
  }
  DetectionScores s;
  s.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  s.recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

std::vector<MetricVector> smooth_rows(std::span<const MetricVector> rows, std::size_t width) {
  std::vector<MetricVector> out(rows.size());
  width = std::max<std::size_t>(1, width);
  MetricVector sum{};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t d = 0; d < kMetricDims; ++d) {
      sum[d] += rows[i][d];
      if (i >= width) sum[d] -= rows[i - width][d];
    }
    const double n = static_cast<double>(std::min(i + 1, width));
    for (std::size_t d = 0; d < kMetricDims; ++d) out[i][d] = sum[d] / n;
  }
  return out;
}

SyntheticBenchmark make_synthetic_benchmark(std::uint64_t seed, std::size_t train_size,
                                            std::size_t calibration_size, std::size_t test_size) {
  constexpr MetricVector kMean{6.0, 20.0, 6.0, 1.0, 3.5, 0.85, 0.7};
  constexpr MetricVector kStd{1.0, 4.0, 1.0, 0.5, 0.4, 0.03, 0.08};
  constexpr double kRho = 0.6;
  constexpr std::size_t kSegment = 20;
  constexpr double kShift = 4.0;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  auto normal = [&] {
    // Equicorrelated: a shared factor plus independent noise.
    const double common = g(rng);
    MetricVector m;
    for (std::size_t d = 0; d < kMetricDims; ++d) {
      m[d] = kMean[d] + kStd[d] * (std::sqrt(kRho) * common + std::sqrt(1.0 - kRho) * g(rng));
    }
    return m;
  };
  auto shifted = [&](double sign) {
    MetricVector m = normal();
    for (std::size_t d = 0; d < 4; ++d) m[d] += sign * kShift * kStd[d];
    return m;
  };
  // Stream with non-overlapping anomaly segments covering ~1%.
  auto stream = [&](std::size_t size, std::vector<MetricVector>& rows, std::vector<bool>& truth,
                    std::vector<std::size_t>& starts) {
    const std::size_t segments = std::max<std::size_t>(1, size / 100 / kSegment);
    const std::size_t stride = size / segments;
    std::uniform_int_distribution<std::size_t> offset(0, stride - kSegment - 1);
    truth.assign(size, false);
    for (std::size_t s = 0; s < segments; ++s) {
      const std::size_t start = s * stride + offset(rng);
      starts.push_back(start);
      for (std::size_t k = 0; k < kSegment; ++k) truth[start + k] = true;
    }
    rows.resize(size);
    for (auto& m : rows) m = normal();
    for (std::size_t s = 0; s < starts.size(); ++s) {
      for (std::size_t k = 0; k < kSegment; ++k) rows[starts[s] + k] = shifted(s % 2 == 0 ? 1.0 : -1.0);
    }
  };
  SyntheticBenchmark b;
  std::vector<bool> train_truth;
  std::vector<std::size_t> train_starts;
  stream(train_size, b.train.rows, train_truth, train_starts);
  b.train.labels.assign(train_size, 1);
  for (std::size_t s = 0; s < train_starts.size(); s += 2) {
    for (std::size_t k = 0; k < kSegment; ++k) b.train.labels[train_starts[s] + k] = -1;
  }
  b.calibration.resize(calibration_size);
  for (auto& m : b.calibration) m = normal();
  std::vector<std::size_t> test_starts;
  stream(test_size, b.test, b.truth, test_starts);
  b.heldout_normals.resize(test_size);
  for (auto& m : b.heldout_normals) m = normal();
  return b;
}

}  // namespace enova
