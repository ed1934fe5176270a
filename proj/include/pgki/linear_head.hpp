#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pgki/feature_store.hpp"
#include "pgki/rng.hpp"

namespace pgki {

inline constexpr std::size_t kHiddenWidth = 10;
inline constexpr double kDefaultDropout = 0.3;
inline constexpr double kDefaultLeakySlope = 0.01;
inline constexpr double kBceEpsilon = 1e-12;

/// Parameters of the 1024 -> 10 -> 1 head:
///   H1 = LeakyReLU(x W1 + b1, slope)
///   H2 = Dropout(H1, p)
///   y  = sigmoid(H2 W2 + b2)
/// W1 is stored row-major (dim x hidden): w1[i * hidden + j].
/// The width is a runtime value so tests can exercise reduced variants; the
/// production shape is kClsDim x kHiddenWidth.
struct HeadParams {
  std::size_t dim = kClsDim;
  std::size_t hidden = kHiddenWidth;
  std::vector<double> w1;
  std::vector<double> b1;
  std::vector<double> w2;
  double b2 = 0.0;

  static HeadParams zeros(std::size_t dim = kClsDim, std::size_t hidden = kHiddenWidth);

  /// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)); W1 drawn row-major, then W2.
  /// Biases are zero.
  static HeadParams init_uniform(Xoshiro256& rng, std::size_t dim = kClsDim,
                                 std::size_t hidden = kHiddenWidth);

  double& w1_at(std::size_t i, std::size_t j) { return w1[i * hidden + j]; }
  double w1_at(std::size_t i, std::size_t j) const { return w1[i * hidden + j]; }

  std::size_t parameter_count() const noexcept { return w1.size() + b1.size() + w2.size() + 1; }

  /// Throws InvalidConfig on inconsistent shapes, NonFiniteInput on NaN/Inf.
  void validate() const;

  friend bool operator==(const HeadParams&, const HeadParams&) = default;
};

/// Per-sample multipliers applied to H1: 0 for dropped units, 1/(1-p) for
/// kept ones. `scale` is batch x hidden, row-major.
struct DropoutMask {
  std::size_t hidden = 0;
  std::vector<double> scale;

  std::span<const double> row(std::size_t sample) const {
    return std::span<const double>(scale).subspan(sample * hidden, hidden);
  }

  /// The same multiplier row for every sample in a batch of `batch` items.
  static DropoutMask broadcast(std::span<const double> row, std::size_t batch);
  /// Draws batch x hidden masks: unit dropped iff rng.uniform01() < p,
  /// sample-major then unit order.
  static DropoutMask sample(Xoshiro256& rng, std::size_t batch, std::size_t hidden,
                            double p);
};

struct ActivationConfig {
  double leaky_slope = kDefaultLeakySlope;
  double dropout_p = kDefaultDropout;
};

/// Eval mode: deterministic, no dropout.
double forward(std::span<const double> features, const HeadParams& params,
               double leaky_slope = kDefaultLeakySlope);

/// Train mode: inverted dropout with keep-probability 1-p drawn from `rng`.
double forward_train(std::span<const double> features, const HeadParams& params,
                     Xoshiro256& rng, const ActivationConfig& act = {});

/// Replays the forward pass with an explicit multiplier row on H1.
double forward_masked(std::span<const double> features, const HeadParams& params,
                      std::span<const double> mask_row,
                      double leaky_slope = kDefaultLeakySlope);

/// The pre-sigmoid output H2 W2 + b2. An empty `mask_row` means eval mode.
double forward_logit(std::span<const double> features, const HeadParams& params,
                     std::span<const double> mask_row = {},
                     double leaky_slope = kDefaultLeakySlope);

/// Mean binary cross-entropy with probabilities clamped to [eps, 1-eps].
double bce_loss(std::span<const double> predictions, std::span<const double> labels);

inline double label_value(Label label) noexcept { return label == Label::Fake ? 1.0 : 0.0; }

/// Exact gradients of mean BCE with respect to every parameter. The
/// LeakyReLU derivative at exactly zero is the negative-side slope.
HeadParams gradient(std::span<const FeatureRecord> batch, const HeadParams& params,
                    const DropoutMask* mask = nullptr,
                    double leaky_slope = kDefaultLeakySlope);

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t max_epochs = 100;
  std::size_t batch_size = 64;
  double dropout_p = kDefaultDropout;
  double leaky_slope = kDefaultLeakySlope;
  std::uint64_t seed = 0;
  std::size_t patience = 5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double threshold = 0.5;
  bool l2_normalize = false;

  void validate() const;
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainingLog {
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;
  double best_val_accuracy = 0.0;
  bool stopped_early = false;
};

struct TrainResult {
  HeadParams params;
  TrainingLog log;
};

/// Adam over shuffled mini-batches of the train split; keeps the parameters
/// with the best val accuracy (first occurrence on ties). Single-threaded and
/// bit-reproducible for a fixed seed.
///
/// Draw order from Xoshiro256(seed): W1 then W2 initialization; then per
/// epoch one Fisher-Yates shuffle of the train indices followed, per
/// mini-batch, by the dropout masks for that batch.
TrainResult train(const std::vector<FeatureRecord>& records, const TrainConfig& config);

struct HeadPrediction {
  std::string image_id;
  double probability_fake = 0.5;
};

/// Eval-mode forward per record, order preserved. When `l2_normalize` is set
/// the features are scaled to unit norm first, mirroring training.
std::vector<HeadPrediction> predict_batch(std::span<const FeatureRecord> records,
                                          const HeadParams& params,
                                          bool l2_normalize = false,
                                          double leaky_slope = kDefaultLeakySlope);

struct ClassifierMetrics {
  double accuracy = 0.0;
  double f1_fake = 0.0;
};

/// Fake is the positive class; p >= threshold is classed Fake.
ClassifierMetrics classifier_metrics(std::span<const HeadPrediction> predictions,
                                     std::span<const Label> labels,
                                     double threshold = 0.5);

/// Returns `features` scaled to unit L2 norm (unchanged if the norm is zero).
std::vector<double> l2_normalized(std::span<const double> features);

}  // namespace pgki
