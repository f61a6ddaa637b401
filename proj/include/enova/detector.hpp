#pragma once

// Semi-supervised VAE performance detector. Rows are the seven monitoring
// metrics, labels +1 (normal) or -1 (anomalous). Training maximizes
//
//   L = sum_i  l_i * E_q[log p(m_i | z)]  -  (1 + l_i)/2 * beta * KL(q(z|m_i) || N(0, I))
//
// with beta driven by a PI controller toward a KL setpoint. The anomaly score
// is the KL term of a sample; its threshold comes from a peaks-over-threshold
// fit on normal scores.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "enova/core.hpp"
#include "enova/stats.hpp"

namespace enova {

using MetricVector = std::array<double, kMetricDims>;

struct LabeledDataset {
  std::vector<MetricVector> rows;
  std::vector<int> labels;  // +1 normal, -1 anomalous

  void validate() const;
};

struct Normalizer {
  static constexpr double kMinStd = 1e-6;

  MetricVector mean{};
  MetricVector std{};
  std::array<bool, kMetricDims> floored{};  // std was below kMinStd

  bool any_floored() const;
  MetricVector apply(const MetricVector& m) const;
};

// Per-dimension z-score statistics over all rows; needs at least 2 rows.
Normalizer fit_normalizer(std::span<const MetricVector> rows);

// Returns the normalized dataset; stats receives the statistics used.
LabeledDataset normalize(const LabeledDataset& dataset, Normalizer& stats);

struct VaeConfig {
  int hidden = 32;
  int latent = 4;
  int epochs = 200;
  int batch = 64;
  double learning_rate = 1e-3;
  double kl_setpoint = 2.0;  // nats per normal row
  double kp = 0.01;
  double ki = 0.001;
  double beta_max = 1.0;
  double beta_initial = 1.0;
  double anomaly_cap = 10.0;  // nats; bound on the anomaly reconstruction term
  std::uint64_t seed = 1;
};

// beta(k) = clamp(beta_initial + kp * e_k + ki * sum e, 0, beta_max) with
// e_k = observed KL - setpoint. The integral freezes while the output is
// clamped and the error would push it further out.
class BetaController {
 public:
  BetaController(double setpoint, double kp, double ki, double beta_max, double beta_initial);

  double beta() const { return beta_; }
  double update(double observed_kl);

 private:
  double setpoint_, kp_, ki_, beta_max_, beta_initial_;
  double integral_ = 0.0;
  double beta_;
};

enum class Direction { kNone, kOverload, kUnderload };
const char* to_string(Direction d);

struct Verdict {
  double score = 0.0;
  bool is_anomaly = false;
  Direction direction = Direction::kNone;
  double md = 0.0;  // mean of (input - reconstruction) over normalized dimensions
};

class VaeDetector {
 public:
  explicit VaeDetector(VaeConfig config = {});

  const VaeConfig& config() const { return config_; }
  std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }
  const Eigen::VectorXd& parameters() const { return params_; }
  void set_parameters(const Eigen::VectorXd& p);

  // Mean per-row negative of L over the columns of x (normalized rows) with
  // the given reparameterization noise (latent x batch). Fills grad when
  // non-null.
  double loss(const Eigen::MatrixXd& x, std::span<const int> labels, const Eigen::MatrixXd& eps,
              double beta, Eigen::VectorXd* grad = nullptr) const;

  struct Encoding {
    Eigen::VectorXd mu;
    Eigen::VectorXd logvar;
  };
  Encoding encode(const Eigen::VectorXd& x) const;
  Eigen::VectorXd decode(const Eigen::VectorXd& z) const;

  // KL(q(z|m) || N(0, I)) for a normalized row.
  double score_normalized(const Eigen::VectorXd& x) const;
  // Normalizes with the stored statistics first.
  double score(const MetricVector& m) const;
  Verdict detect(const MetricVector& m) const;

  bool trained() const { return trained_; }
  bool calibrated() const { return calibrated_; }
  const Normalizer& normalizer() const { return normalizer_; }
  double threshold() const { return threshold_; }
  const stats::TailModel& tail() const { return tail_; }

  // Per-iteration ELBO (beta = 1) averaged over the normal rows of a batch,
  // and the beta used at that iteration.
  const std::vector<double>& elbo_history() const { return elbo_history_; }
  const std::vector<double>& beta_history() const { return beta_history_; }

  std::string to_json() const;
  static VaeDetector from_json(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static VaeDetector load(const std::filesystem::path& path);

 private:
  friend VaeDetector train(const LabeledDataset&, const VaeConfig&);
  friend double calibrate_threshold(VaeDetector&, std::span<const MetricVector>, double, double);

  VaeConfig config_;
  Eigen::VectorXd params_;
  Normalizer normalizer_;
  bool trained_ = false;
  bool calibrated_ = false;
  double threshold_ = 0.0;
  stats::TailModel tail_;
  std::vector<double> elbo_history_;
  std::vector<double> beta_history_;
};

// Needs at least one normal row. Throws Error naming the iteration on a
// non-finite loss.
VaeDetector train(const LabeledDataset& dataset, const VaeConfig& config = {});

// Fits the POT threshold on the scores of normal calibration rows (raw
// metrics) and stores it in the detector.
double calibrate_threshold(VaeDetector& detector, std::span<const MetricVector> normal_rows,
                           double initial_quantile = stats::kDefaultPotInitialQuantile,
                           double risk_q = stats::kDefaultPotRisk);

struct DetectionScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Any predicted point inside a true anomalous segment credits the whole
// segment; then pointwise precision/recall/F1 (0 when undefined).
DetectionScores evaluate_point_adjusted(const std::vector<bool>& truth,
                                        const std::vector<bool>& predicted);

// Trailing mean over metric vectors, width clipped at the start.
std::vector<MetricVector> smooth_rows(std::span<const MetricVector> rows, std::size_t width);

// Normals from a 7-dimensional correlated Gaussian; anomalies are level
// shifts of +-4 sigma on the load metrics (n_f, n_r, n_a, n_p) in segments of
// 20 samples covering 1% of the stream. Half of the training anomaly segments
// carry label -1, the rest are unlabeled (+1).
struct SyntheticBenchmark {
  LabeledDataset train;
  std::vector<MetricVector> calibration;
  std::vector<MetricVector> test;
  std::vector<bool> truth;
  std::vector<MetricVector> heldout_normals;
};

SyntheticBenchmark make_synthetic_benchmark(std::uint64_t seed, std::size_t train_size = 5000,
                                            std::size_t calibration_size = 20000,
                                            std::size_t test_size = 20000);

}  // namespace enova
