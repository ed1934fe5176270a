#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pgki/feature_store.hpp"

namespace pgki {

enum class Verdict { Real, Fake, Unknown };

std::string_view to_string(Verdict verdict) noexcept;

/// Keyword scan over lowercased word tokens. The earliest keyword wins;
/// a negator ("not", "isn't", "no") among the three preceding tokens flips it.
///   fake: fake, synthetic, ai-generated, generated, forged, manipulated
///   real: real, authentic, genuine, "natural photo"
Verdict extract_verdict(std::string_view response_text);

/// Fake is the positive class. An Unknown verdict counts as the wrong class
/// for its true label (FN when truly Fake, FP when truly Real) and is also
/// tallied in unknown_fake / unknown_real.
struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
  std::size_t unknown_real = 0;
  std::size_t unknown_fake = 0;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

ConfusionCounts confusion(std::span<const Verdict> verdicts, std::span<const Label> labels);

struct ClassScores {
  double accuracy = 0.0;  // recall of the class
  double f1 = 0.0;        // one-vs-rest
};

struct DetectionMetrics {
  ClassScores real;
  ClassScores fake;
  double overall_accuracy = 0.0;
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
  double fake_f1 = 0.0;
  double fake_precision = 0.0;
  double fake_recall = 0.0;
};

/// 0/0 precision or recall is defined as 0.
DetectionMetrics detection_metrics(const ConfusionCounts& counts);

/// Lowercase, split on whitespace (ASCII and common Unicode spaces), strip
/// ASCII punctuation from both ends of each token, drop empty tokens.
std::vector<std::string> tokenize(std::string_view text);

inline constexpr double kRougeBeta = 1.2;

/// LCS F-measure: (1 + b^2) P R / (R + b^2 P) with P = LCS/|cand|,
/// R = LCS/|ref|. Tokens compare equal after lowercasing.
double rouge_l(std::span<const std::string> reference, std::span<const std::string> candidate,
               double beta = kRougeBeta);

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

/// Cosine similarity.
double css(std::span<const double> a, std::span<const double> b);

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double value) noexcept;
  double value() const noexcept { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

struct ResponseRecord {
  std::string image_id;
  std::optional<std::string> response;  // absent on failed inference lines
  std::optional<std::string> error;
};

/// NDJSON lines with image_id and either "response" or "error".
std::vector<ResponseRecord> parse_responses(std::string_view ndjson);

/// Candidate/reference explanation embeddings. Without an index, row k of
/// both matrices belongs to response k; with one, rows are looked up by
/// image_id.
struct EmbeddingPairs {
  FeatureMatrix candidate;
  FeatureMatrix reference;
  std::optional<std::unordered_map<std::string, std::size_t>> index;
};

struct EvalOptions {
  double beta = kRougeBeta;
};

struct EvalReport {
  DetectionMetrics detection;
  ConfusionCounts counts;
  std::size_t samples = 0;
  std::size_t failed_responses = 0;
  std::optional<double> rouge_l_mean;
  std::size_t rouge_l_samples = 0;
  std::optional<double> css_mean;
  std::size_t css_samples = 0;
};

/// Scores every response against the manifest. Failed inference lines score
/// as Unknown.
EvalReport evaluate_run(std::span<const ResponseRecord> responses,
                        const DatasetManifest& references,
                        const EmbeddingPairs* embeddings = nullptr,
                        const EvalOptions& options = {});

std::string report_json(const EvalReport& report, std::string_view method);
/// Aligned text mirroring the Acc / F1 / ROUGE_L / CSS and the
/// Real / Fake / Overall table layouts. Absent metrics print as "-".
std::string report_table(const EvalReport& report, std::string_view method);

}  // namespace pgki
