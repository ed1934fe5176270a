#include "pgki/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "pgki/error.hpp"

namespace pgki {
namespace {

constexpr std::array<std::string_view, 6> kFakeWords = {
    "fake", "synthetic", "ai-generated", "generated", "forged", "manipulated"};
constexpr std::array<std::string_view, 3> kRealWords = {"real", "authentic", "genuine"};
constexpr std::array<std::string_view, 3> kNegators = {"not", "isn't", "no"};
constexpr std::size_t kNegationWindow = 3;

char lower_ascii(char c) {
  return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
}

std::string lowered(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = lower_ascii(c);
  return out;
}

// Word tokens for verdict scanning: runs of [a-z0-9'-], with the typographic
// apostrophe folded to '.
std::vector<std::string> verdict_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  const auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = lower_ascii(text[i]);
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '\'') {
      current.push_back(c);
    } else if (text.substr(i, 3) == "\xE2\x80\x99") {
      current.push_back('\'');
      i += 2;
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

bool contains(std::span<const std::string_view> set, std::string_view token) {
  return std::find(set.begin(), set.end(), token) != set.end();
}

// Byte length of a Unicode whitespace code point at text[i], 0 if none.
std::size_t whitespace_width(std::string_view text, std::size_t i) {
  const auto byte = [&](std::size_t k) {
    return k < text.size() ? static_cast<unsigned char>(text[k]) : 0u;
  };
  const unsigned char c = byte(i);
  if (c == ' ' || (c >= '\t' && c <= '\r')) return 1;
  if (c == 0xC2 && (byte(i + 1) == 0x85 || byte(i + 1) == 0xA0)) return 2;
  if (c == 0xE1 && byte(i + 1) == 0x9A && byte(i + 2) == 0x80) return 3;
  if (c == 0xE2 && byte(i + 1) == 0x80) {
    const unsigned char t = byte(i + 2);
    if ((t >= 0x80 && t <= 0x8A) || t == 0xA8 || t == 0xA9 || t == 0xAF) return 3;
  }
  if (c == 0xE2 && byte(i + 1) == 0x81 && byte(i + 2) == 0x9F) return 3;
  if (c == 0xE3 && byte(i + 1) == 0x80 && byte(i + 2) == 0x80) return 3;
  return 0;
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

// a / b with b > 0; a zero-denominator metric is carried as 0 / 1.
struct Fraction {
  std::uint64_t num = 0;
  std::uint64_t den = 1;
};

Fraction f1_fraction(std::size_t tp, std::size_t fp, std::size_t fn) {
  const std::uint64_t den = 2 * tp + fp + fn;
  return den == 0 ? Fraction{} : Fraction{2 * tp, den};
}

// (wa * a + wb * b) / scale, rounded once when the integer arithmetic fits.
double weighted_mean(Fraction a, std::uint64_t wa, Fraction b, std::uint64_t wb,
                     std::uint64_t scale) {
  constexpr std::uint64_t kExact = std::uint64_t{1} << 53;
  std::uint64_t x, y, num, den;
  const bool fits = !__builtin_mul_overflow(a.num, b.den, &x) &&
                    !__builtin_mul_overflow(x, wa, &x) &&
                    !__builtin_mul_overflow(b.num, a.den, &y) &&
                    !__builtin_mul_overflow(y, wb, &y) && !__builtin_add_overflow(x, y, &num) &&
                    !__builtin_mul_overflow(a.den, b.den, &den) &&
                    !__builtin_mul_overflow(den, scale, &den) && num < kExact && den < kExact;
  if (fits) return static_cast<double>(num) / static_cast<double>(den);
  const auto value = [](Fraction f) { return static_cast<double>(f.num) / static_cast<double>(f.den); };
  return (value(a) * static_cast<double>(wa) + value(b) * static_cast<double>(wb)) /
         static_cast<double>(scale);
}

std::string fixed4(std::optional<double> v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

std::string render_rows(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(rows.front().size(), 0);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) line += "  ";
      line += row[c];
      if (c + 1 < row.size()) line.append(width[c] - row[c].size(), ' ');
    }
    out << line << '\n';
  }
  return out.str();
}

}  // namespace

std::string_view to_string(Verdict verdict) noexcept {
  switch (verdict) {
    case Verdict::Real: return "real";
    case Verdict::Fake: return "fake";
    case Verdict::Unknown: return "unknown";
  }
  return "unknown";
}

Verdict extract_verdict(std::string_view response_text) {
  const auto tokens = verdict_tokens(response_text);
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    Verdict hit = Verdict::Unknown;
    if (contains(kFakeWords, tokens[k])) {
      hit = Verdict::Fake;
    } else if (contains(kRealWords, tokens[k]) ||
               (tokens[k] == "natural" && k + 1 < tokens.size() && tokens[k + 1] == "photo")) {
      hit = Verdict::Real;
    }
    if (hit == Verdict::Unknown) continue;
    const std::size_t from = k >= kNegationWindow ? k - kNegationWindow : 0;
    for (std::size_t n = from; n < k; ++n) {
      if (contains(kNegators, tokens[n])) {
        return hit == Verdict::Fake ? Verdict::Real : Verdict::Fake;
      }
    }
    return hit;
  }
  return Verdict::Unknown;
}

ConfusionCounts confusion(std::span<const Verdict> verdicts, std::span<const Label> labels) {
  if (verdicts.size() != labels.size()) {
    throw Error(Errc::LengthMismatch, "verdicts and labels differ in length");
  }
  ConfusionCounts c;
  for (std::size_t k = 0; k < verdicts.size(); ++k) {
    const bool fake = labels[k] == Label::Fake;
    switch (verdicts[k]) {
      case Verdict::Fake: ++(fake ? c.tp : c.fp); break;
      case Verdict::Real: ++(fake ? c.fn : c.tn); break;
      case Verdict::Unknown:
        if (fake) {
          ++c.fn;
          ++c.unknown_fake;
        } else {
          ++c.fp;
          ++c.unknown_real;
        }
        break;
    }
  }
  return c;
}

DetectionMetrics detection_metrics(const ConfusionCounts& c) {
  const std::size_t n = c.total();
  if (n == 0) throw Error(Errc::EmptyEvaluation, "no samples to evaluate");
  DetectionMetrics m;
  m.fake_precision = ratio(c.tp, c.tp + c.fp);
  m.fake_recall = ratio(c.tp, c.tp + c.fn);
  const double real_recall = ratio(c.tn, c.tn + c.fp);

  // F1 as 2tp / (2tp + fp + fn) so every metric is a single rounding of
  // the exact fraction.
  const Fraction fake_f1 = f1_fraction(c.tp, c.fp, c.fn);
  const Fraction real_f1 = f1_fraction(c.tn, c.fn, c.fp);
  m.fake = {m.fake_recall, ratio(fake_f1.num, fake_f1.den)};
  m.real = {real_recall, ratio(real_f1.num, real_f1.den)};
  m.overall_accuracy = ratio(c.tp + c.tn, n);
  m.fake_f1 = m.fake.f1;
  m.macro_f1 = weighted_mean(fake_f1, 1, real_f1, 1, 2);
  m.weighted_f1 = weighted_mean(fake_f1, c.tp + c.fn, real_f1, c.tn + c.fp, n);
  return m;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  const auto flush = [&] {
    const auto punct = [](char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; };
    auto begin = std::find_if_not(current.begin(), current.end(), punct);
    auto end = std::find_if_not(current.rbegin(), std::make_reverse_iterator(begin), punct).base();
    if (begin < end) tokens.emplace_back(begin, end);
    current.clear();
  };
  for (std::size_t i = 0; i < text.size();) {
    if (const std::size_t w = whitespace_width(text, i); w > 0) {
      flush();
      i += w;
    } else {
      current.push_back(lower_ascii(text[i]));
      ++i;
    }
  }
  flush();
  return tokens;
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::string> la, lb;
  la.reserve(a.size());
  lb.reserve(b.size());
  for (const auto& t : a) la.push_back(lowered(t));
  for (const auto& t : b) lb.push_back(lowered(t));
  std::vector<std::size_t> prev(lb.size() + 1, 0), cur(lb.size() + 1, 0);
  for (std::size_t i = 1; i <= la.size(); ++i) {
    for (std::size_t j = 1; j <= lb.size(); ++j) {
      cur[j] = la[i - 1] == lb[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[lb.size()];
}

double rouge_l(std::span<const std::string> reference, std::span<const std::string> candidate,
               double beta) {
  if (reference.empty() || candidate.empty()) return 0.0;
  const std::size_t lcs = lcs_length(reference, candidate);
  if (lcs == 0) return 0.0;
  const double precision = static_cast<double>(lcs) / static_cast<double>(candidate.size());
  const double recall = static_cast<double>(lcs) / static_cast<double>(reference.size());
  const double b2 = beta * beta;
  return (1.0 + b2) * precision * recall / (recall + b2 * precision);
}

double css(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) {
    throw Error(Errc::DimensionMismatch, "css needs two non-empty vectors of equal dimension");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    dot += a[k] * b[k];
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  if (na == 0.0 || nb == 0.0) throw Error(Errc::ZeroNormVector, "css of a zero vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

void CompensatedSum::add(double value) noexcept {
  const double t = sum_ + value;
  if (std::abs(sum_) >= std::abs(value)) {
    compensation_ += (sum_ - t) + value;
  } else {
    compensation_ += (value - t) + sum_;
  }
  sum_ = t;
}

std::vector<ResponseRecord> parse_responses(std::string_view ndjson) {
  std::vector<ResponseRecord> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= ndjson.size()) {
    std::size_t end = ndjson.find('\n', start);
    if (end == std::string_view::npos) end = ndjson.size();
    std::string_view line = ndjson.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    const std::string where = "responses line " + std::to_string(line_no) + ": ";
    const auto record = nlohmann::json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object()) {
      throw Error(Errc::MalformedRecord, where + "not a JSON object");
    }
    ResponseRecord r;
    auto id = record.find("image_id");
    if (id == record.end() || !id->is_string()) {
      throw Error(Errc::MalformedRecord, where + "missing image_id");
    }
    r.image_id = id->get<std::string>();
    for (const char* key : {"response", "response_text"}) {
      if (auto it = record.find(key); it != record.end() && it->is_string()) {
        r.response = it->get<std::string>();
        break;
      }
    }
    if (auto it = record.find("error"); it != record.end() && !it->is_null()) {
      r.error = it->is_string() ? it->get<std::string>() : it->dump();
    }
    if (!r.response && !r.error) {
      throw Error(Errc::MalformedRecord, where + "needs a response or an error");
    }
    out.push_back(std::move(r));
  }
  return out;
}

EvalReport evaluate_run(std::span<const ResponseRecord> responses,
                        const DatasetManifest& references, const EmbeddingPairs* embeddings,
                        const EvalOptions& options) {
  std::unordered_map<std::string_view, const ManifestEntry*> by_id;
  for (const auto& entry : references.entries) by_id.emplace(entry.image_id, &entry);

  if (embeddings) {
    const auto& e = *embeddings;
    if (e.candidate.dim() != e.reference.dim()) {
      throw Error(Errc::MisalignedEmbeddings, "candidate and reference embedding dims differ");
    }
    if (!e.index && (e.candidate.rows() != responses.size() ||
                     e.reference.rows() != responses.size())) {
      throw Error(Errc::MisalignedEmbeddings,
                  "embedding rows must match the number of responses");
    }
  }

  EvalReport report;
  std::vector<Verdict> verdicts;
  std::vector<Label> labels;
  verdicts.reserve(responses.size());
  labels.reserve(responses.size());
  CompensatedSum rouge_sum, css_sum;

  for (std::size_t k = 0; k < responses.size(); ++k) {
    const auto& r = responses[k];
    auto it = by_id.find(r.image_id);
    if (it == by_id.end()) {
      throw Error(Errc::MissingReference, "no reference for image '" + r.image_id + "'");
    }
    const ManifestEntry& ref = *it->second;
    labels.push_back(ref.label);
    if (!r.response) ++report.failed_responses;
    verdicts.push_back(r.response ? extract_verdict(*r.response) : Verdict::Unknown);

    if (ref.explanation) {
      const auto ref_tokens = tokenize(*ref.explanation);
      const auto cand_tokens = r.response ? tokenize(*r.response) : std::vector<std::string>{};
      rouge_sum.add(rouge_l(ref_tokens, cand_tokens, options.beta));
      ++report.rouge_l_samples;
    }

    if (embeddings) {
      std::size_t row = k;
      if (embeddings->index) {
        auto at = embeddings->index->find(r.image_id);
        if (at == embeddings->index->end()) {
          throw Error(Errc::MisalignedEmbeddings, "no embedding row for '" + r.image_id + "'");
        }
        row = at->second;
        if (row >= embeddings->candidate.rows() || row >= embeddings->reference.rows()) {
          throw Error(Errc::MisalignedEmbeddings, "embedding row out of range for '" +
                                                      r.image_id + "'");
        }
      }
      css_sum.add(css(embeddings->candidate.row(row), embeddings->reference.row(row)));
      ++report.css_samples;
    }
  }

  report.samples = responses.size();
  report.counts = confusion(verdicts, labels);
  report.detection = detection_metrics(report.counts);
  if (report.rouge_l_samples > 0) {
    report.rouge_l_mean = rouge_sum.value() / static_cast<double>(report.rouge_l_samples);
  }
  if (report.css_samples > 0) {
    report.css_mean = css_sum.value() / static_cast<double>(report.css_samples);
  }
  return report;
}

std::string report_json(const EvalReport& report, std::string_view method) {
  using nlohmann::ordered_json;
  const auto& d = report.detection;
  const auto& c = report.counts;
  ordered_json j;
  j["method"] = method;
  j["samples"] = report.samples;
  j["failed_responses"] = report.failed_responses;
  j["per_class"] = {
      {"real", {{"accuracy", d.real.accuracy}, {"f1", d.real.f1}}},
      {"fake", {{"accuracy", d.fake.accuracy}, {"f1", d.fake.f1}}},
  };
  j["overall_accuracy"] = d.overall_accuracy;
  j["macro_f1"] = d.macro_f1;
  j["weighted_f1"] = d.weighted_f1;
  j["fake_f1"] = d.fake_f1;
  j["fake_precision"] = d.fake_precision;
  j["fake_recall"] = d.fake_recall;
  j["rouge_l_mean"] = report.rouge_l_mean ? ordered_json(*report.rouge_l_mean) : ordered_json();
  j["rouge_l_samples"] = report.rouge_l_samples;
  j["css_mean"] = report.css_mean ? ordered_json(*report.css_mean) : ordered_json();
  j["css_samples"] = report.css_samples;
  j["counts"] = {{"tp", c.tp},
                 {"fp", c.fp},
                 {"tn", c.tn},
                 {"fn", c.fn},
                 {"unknown_real", c.unknown_real},
                 {"unknown_fake", c.unknown_fake}};
  return j.dump(2);
}

std::string report_table(const EvalReport& report, std::string_view method) {
  const auto& d = report.detection;
  const std::string name(method);
  std::string out = render_rows({
      {"Method", "Acc", "F1", "ROUGE_L", "CSS"},
      {name, fixed4(d.overall_accuracy), fixed4(d.fake_f1), fixed4(report.rouge_l_mean),
       fixed4(report.css_mean)},
  });
  out += '\n';
  out += render_rows({
      {"Method", "Real Acc", "Real F1", "Fake Acc", "Fake F1", "Overall Acc", "Macro F1",
       "Weighted F1"},
      {name, fixed4(d.real.accuracy), fixed4(d.real.f1), fixed4(d.fake.accuracy),
       fixed4(d.fake.f1), fixed4(d.overall_accuracy), fixed4(d.macro_f1),
       fixed4(d.weighted_f1)},
  });
  return out;
}

}  // namespace pgki
