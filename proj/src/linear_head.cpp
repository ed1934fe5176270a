#include "pgki/linear_head.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pgki/error.hpp"

namespace pgki {
namespace {

double sigmoid(double s) noexcept {
  if (s >= 0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

double leaky(double z, double slope) noexcept { return z > 0 ? z : slope * z; }

void require_finite(std::span<const double> features, std::size_t dim) {
  if (features.size() != dim) {
    throw Error(Errc::DimensionMismatch, "expected " + std::to_string(dim) +
                                             " features, got " +
                                             std::to_string(features.size()));
  }
  for (double v : features) {
    if (!std::isfinite(v)) throw Error(Errc::NonFiniteInput, "non-finite feature value");
  }
}

// z = x W1 + b1
void hidden_preactivation(std::span<const double> x, const HeadParams& params,
                          std::vector<double>& z) {
  const std::size_t h = params.hidden;
  z.assign(params.b1.begin(), params.b1.end());
  const double* w = params.w1.data();
  for (std::size_t i = 0; i < params.dim; ++i, w += h) {
    const double xi = x[i];
    for (std::size_t j = 0; j < h; ++j) z[j] += xi * w[j];
  }
}

double output_logit(const std::vector<double>& z, const HeadParams& params,
                    const double* mask_row, double slope) {
  double s = params.b2;
  for (std::size_t j = 0; j < params.hidden; ++j) {
    const double h1 = leaky(z[j], slope);
    const double h2 = mask_row ? h1 * mask_row[j] : h1;
    s += h2 * params.w2[j];
  }
  return s;
}

// Adds the gradient of `weight * bce(sample)` into `grad`; returns the
// sample's (unweighted) loss.
double accumulate_sample(std::span<const double> x, double y, const HeadParams& params,
                         const double* mask_row, double slope, double weight,
                         std::vector<double>& z, HeadParams& grad) {
  hidden_preactivation(x, params, z);
  const double p = sigmoid(output_logit(z, params, mask_row, slope));
  const double pc = std::clamp(p, kBceEpsilon, 1.0 - kBceEpsilon);
  const double loss = -(y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc));
  // d loss / d logit; zero where the clamp is active.
  const double ds = (p < kBceEpsilon || p > 1.0 - kBceEpsilon) ? 0.0 : (p - y) * weight;

  grad.b2 += ds;
  const std::size_t h = params.hidden;
  for (std::size_t j = 0; j < h; ++j) {
    const double m = mask_row ? mask_row[j] : 1.0;
    const double h2 = leaky(z[j], slope) * m;
    grad.w2[j] += ds * h2;
    // LeakyReLU derivative at exactly 0 is the negative-side slope.
    const double dz = ds * params.w2[j] * m * (z[j] > 0 ? 1.0 : slope);
    z[j] = dz;
    grad.b1[j] += dz;
  }
  double* gw = grad.w1.data();
  for (std::size_t i = 0; i < params.dim; ++i, gw += h) {
    const double xi = x[i];
    for (std::size_t j = 0; j < h; ++j) gw[j] += xi * z[j];
  }
  return loss;
}

struct Sample {
  const double* features;
  double label;
};

void adam_step(std::span<double> theta, std::span<const double> g, std::span<double> m,
               std::span<double> v, const TrainConfig& c, double bias1, double bias2) {
  for (std::size_t k = 0; k < theta.size(); ++k) {
    m[k] = c.adam_beta1 * m[k] + (1.0 - c.adam_beta1) * g[k];
    v[k] = c.adam_beta2 * v[k] + (1.0 - c.adam_beta2) * g[k] * g[k];
    const double mhat = m[k] / bias1;
    const double vhat = v[k] / bias2;
    theta[k] -= c.learning_rate * mhat / (std::sqrt(vhat) + c.adam_eps);
  }
}

double accuracy_at(const std::vector<Sample>& samples, const HeadParams& params,
                   std::size_t dim, const TrainConfig& config) {
  std::size_t correct = 0;
  std::vector<double> z;
  for (const auto& s : samples) {
    hidden_preactivation(std::span<const double>(s.features, dim), params, z);
    const double p = sigmoid(output_logit(z, params, nullptr, config.leaky_slope));
    const double predicted = p >= config.threshold ? 1.0 : 0.0;
    if (predicted == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

}  // namespace

HeadParams HeadParams::zeros(std::size_t dim, std::size_t hidden) {
  HeadParams p;
  p.dim = dim;
  p.hidden = hidden;
  p.w1.assign(dim * hidden, 0.0);
  p.b1.assign(hidden, 0.0);
  p.w2.assign(hidden, 0.0);
  p.b2 = 0.0;
  return p;
}

HeadParams HeadParams::init_uniform(Xoshiro256& rng, std::size_t dim, std::size_t hidden) {
  HeadParams p = zeros(dim, hidden);
  const double a1 = 1.0 / std::sqrt(static_cast<double>(dim));
  for (auto& w : p.w1) w = rng.uniform(-a1, a1);
  const double a2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (auto& w : p.w2) w = rng.uniform(-a2, a2);
  return p;
}

void HeadParams::validate() const {
  if (dim == 0 || hidden == 0 || w1.size() != dim * hidden || b1.size() != hidden ||
      w2.size() != hidden) {
    throw Error(Errc::InvalidConfig, "head parameter shapes are inconsistent");
  }
  const auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  if (!finite(w1) || !finite(b1) || !finite(w2) || !std::isfinite(b2)) {
    throw Error(Errc::NonFiniteInput, "head parameters contain NaN or Inf");
  }
}

DropoutMask DropoutMask::broadcast(std::span<const double> row, std::size_t batch) {
  DropoutMask mask;
  mask.hidden = row.size();
  mask.scale.reserve(batch * row.size());
  for (std::size_t b = 0; b < batch; ++b) {
    mask.scale.insert(mask.scale.end(), row.begin(), row.end());
  }
  return mask;
}

DropoutMask DropoutMask::sample(Xoshiro256& rng, std::size_t batch, std::size_t hidden,
                                double p) {
  DropoutMask mask;
  mask.hidden = hidden;
  mask.scale.resize(batch * hidden);
  const double keep_scale = 1.0 / (1.0 - p);
  for (auto& s : mask.scale) s = rng.uniform01() < p ? 0.0 : keep_scale;
  return mask;
}

double forward(std::span<const double> features, const HeadParams& params,
               double leaky_slope) {
  require_finite(features, params.dim);
  std::vector<double> z;
  hidden_preactivation(features, params, z);
  return sigmoid(output_logit(z, params, nullptr, leaky_slope));
}

double forward_masked(std::span<const double> features, const HeadParams& params,
                      std::span<const double> mask_row, double leaky_slope) {
  require_finite(features, params.dim);
  if (mask_row.size() != params.hidden) {
    throw Error(Errc::DimensionMismatch, "dropout mask width disagrees with hidden width");
  }
  std::vector<double> z;
  hidden_preactivation(features, params, z);
  return sigmoid(output_logit(z, params, mask_row.data(), leaky_slope));
}

double forward_logit(std::span<const double> features, const HeadParams& params,
                     std::span<const double> mask_row, double leaky_slope) {
  require_finite(features, params.dim);
  if (!mask_row.empty() && mask_row.size() != params.hidden) {
    throw Error(Errc::DimensionMismatch, "dropout mask width disagrees with hidden width");
  }
  std::vector<double> z;
  hidden_preactivation(features, params, z);
  return output_logit(z, params, mask_row.empty() ? nullptr : mask_row.data(), leaky_slope);
}

double forward_train(std::span<const double> features, const HeadParams& params,
                     Xoshiro256& rng, const ActivationConfig& act) {
  const auto mask = DropoutMask::sample(rng, 1, params.hidden, act.dropout_p);
  return forward_masked(features, params, mask.row(0), act.leaky_slope);
}

double bce_loss(std::span<const double> predictions, std::span<const double> labels) {
  if (predictions.size() != labels.size()) {
    throw Error(Errc::LengthMismatch, "predictions and labels differ in length");
  }
  if (predictions.empty()) throw Error(Errc::EmptyBatch, "bce_loss on an empty batch");
  double total = 0.0;
  for (std::size_t k = 0; k < predictions.size(); ++k) {
    const double p = std::clamp(predictions[k], kBceEpsilon, 1.0 - kBceEpsilon);
    const double y = labels[k];
    total += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
  }
  return total / static_cast<double>(predictions.size());
}

HeadParams gradient(std::span<const FeatureRecord> batch, const HeadParams& params,
                    const DropoutMask* mask, double leaky_slope) {
  if (batch.empty()) throw Error(Errc::EmptyBatch, "gradient of an empty batch");
  if (mask && (mask->hidden != params.hidden ||
               mask->scale.size() != batch.size() * params.hidden)) {
    throw Error(Errc::DimensionMismatch, "dropout mask shape disagrees with batch");
  }
  HeadParams grad = HeadParams::zeros(params.dim, params.hidden);
  const double weight = 1.0 / static_cast<double>(batch.size());
  std::vector<double> z;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    require_finite(batch[b].features, params.dim);
    const double* row = mask ? mask->row(b).data() : nullptr;
    accumulate_sample(batch[b].features, label_value(batch[b].label), params, row,
                      leaky_slope, weight, z, grad);
  }
  return grad;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) {
    throw Error(Errc::InvalidConfig, "learning_rate must be > 0");
  }
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
    throw Error(Errc::InvalidConfig, "dropout_p must be in [0, 1)");
  }
  if (batch_size < 1) throw Error(Errc::InvalidConfig, "batch_size must be >= 1");
  if (max_epochs < 1) throw Error(Errc::InvalidConfig, "max_epochs must be >= 1");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1 &&
        adam_eps > 0)) {
    throw Error(Errc::InvalidConfig, "Adam hyperparameters out of range");
  }
}

TrainResult train(const std::vector<FeatureRecord>& records, const TrainConfig& config) {
  config.validate();

  std::size_t dim = 0;
  std::vector<std::vector<double>> normalized;
  if (config.l2_normalize) normalized.reserve(records.size());
  std::vector<Sample> train_set, val_set;
  for (const auto& r : records) {
    if (r.split == Split::Test) continue;
    if (dim == 0) dim = r.features.size();
    require_finite(r.features, dim);
    const double* data = r.features.data();
    if (config.l2_normalize) {
      normalized.push_back(l2_normalized(r.features));
      data = normalized.back().data();
    }
    (r.split == Split::Train ? train_set : val_set).push_back({data, label_value(r.label)});
  }
  const auto fakes = std::count_if(train_set.begin(), train_set.end(),
                                   [](const Sample& s) { return s.label == 1.0; });
  if (fakes == 0 || static_cast<std::size_t>(fakes) == train_set.size()) {
    throw Error(Errc::SingleClassTrainingSet,
                "training split must contain both real and fake samples");
  }
  if (val_set.empty()) throw Error(Errc::EmptyValidationSet, "validation split is empty");

  Xoshiro256 rng(config.seed);
  HeadParams params = HeadParams::init_uniform(rng, dim, kHiddenWidth);
  // Adam first and second moments share the parameter layout.
  HeadParams m = HeadParams::zeros(dim, kHiddenWidth);
  HeadParams v = HeadParams::zeros(dim, kHiddenWidth);

  TrainResult result{params, {}};
  double best = -1.0;
  std::size_t since_best = 0;
  std::size_t step = 0;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> z;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    shuffle(order, rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::size_t n = end - start;
      const auto mask = DropoutMask::sample(rng, n, params.hidden, config.dropout_p);
      HeadParams grad = HeadParams::zeros(dim, params.hidden);
      const double weight = 1.0 / static_cast<double>(n);
      for (std::size_t b = 0; b < n; ++b) {
        const Sample& s = train_set[order[start + b]];
        epoch_loss += accumulate_sample(std::span<const double>(s.features, dim), s.label,
                                        params, mask.row(b).data(), config.leaky_slope,
                                        weight, z, grad);
      }

      ++step;
      const double bias1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(step));
      const double bias2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(step));
      adam_step(params.w1, grad.w1, m.w1, v.w1, config, bias1, bias2);
      adam_step(params.b1, grad.b1, m.b1, v.b1, config, bias1, bias2);
      adam_step(params.w2, grad.w2, m.w2, v.w2, config, bias1, bias2);
      adam_step({&params.b2, 1}, {&grad.b2, 1}, {&m.b2, 1}, {&v.b2, 1}, config, bias1,
                bias2);
    }

    const double val_acc = accuracy_at(val_set, params, dim, config);
    result.log.epochs.push_back(
        {epoch, epoch_loss / static_cast<double>(train_set.size()), val_acc});
    if (val_acc > best) {
      best = val_acc;
      since_best = 0;
      result.params = params;
      result.log.best_epoch = epoch;
      result.log.best_val_accuracy = val_acc;
    } else if (++since_best >= config.patience) {
      result.log.stopped_early = epoch < config.max_epochs;
      break;
    }
  }
  return result;
}

std::vector<HeadPrediction> predict_batch(std::span<const FeatureRecord> records,
                                          const HeadParams& params, bool l2_normalize,
                                          double leaky_slope) {
  params.validate();
  std::vector<HeadPrediction> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    const double p = l2_normalize
                         ? forward(l2_normalized(r.features), params, leaky_slope)
                         : forward(r.features, params, leaky_slope);
    out.push_back({r.image_id, p});
  }
  return out;
}

ClassifierMetrics classifier_metrics(std::span<const HeadPrediction> predictions,
                                     std::span<const Label> labels, double threshold) {
  if (predictions.size() != labels.size()) {
    throw Error(Errc::LengthMismatch, "predictions and labels differ in length");
  }
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t k = 0; k < predictions.size(); ++k) {
    const bool predicted_fake = predictions[k].probability_fake >= threshold;
    const bool fake = labels[k] == Label::Fake;
    if (predicted_fake && fake) ++tp;
    else if (predicted_fake) ++fp;
    else if (fake) ++fn;
    else ++tn;
  }
  ClassifierMetrics metrics;
  if (!predictions.empty()) {
    metrics.accuracy = static_cast<double>(tp + tn) / static_cast<double>(predictions.size());
  }
  const std::size_t denom = 2 * tp + fp + fn;
  metrics.f1_fake = denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  return metrics;
}

std::vector<double> l2_normalized(std::span<const double> features) {
  double sq = 0.0;
  for (double v : features) sq += v * v;
  std::vector<double> out(features.begin(), features.end());
  if (sq > 0.0) {
    const double inv = 1.0 / std::sqrt(sq);
    for (auto& v : out) v *= inv;
  }
  return out;
}

}  // namespace pgki
