// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "commands.hpp"
#include "gradient_oracle.hpp"
#include "pgki/error.hpp"
#include "pgki/evaluation.hpp"
#include "pgki/head_io.hpp"
#include "pgki/linear_head.hpp"
#include "pgki/orchestrator.hpp"
#include "pgki/prompt_injection.hpp"
#include "test_support.hpp"

using namespace pgki;
using pgki::testing::slurp;
using pgki::testing::TempDir;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, value);
  return buf;
}

struct CliRun {
  int code;
  std::string log;

  nlohmann::json event(const std::string& name) const {
    std::istringstream lines(log);
    std::string line;
    while (std::getline(lines, line)) {
      auto j = nlohmann::json::parse(line);
      if (j["event"] == name) return j;
    }
    return {};
  }
};

CliRun run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, log;
  const int code = pgki::cli::run(args, out, log);
  return {code, log.str()};
}

// ---------------------------------------------------------------------------
// 1. Gradient correctness at the full 1024 -> 10 -> 1 shape.
//
// Long-double oracle that exploits the structure of the loss: nudging W1[i][j]
// or b1[j] only moves hidden unit j, so each finite difference re-evaluates
// one column of pre-activations instead of the whole network. Every
// coordinate of every instance is checked.

struct LossOracle {
  const std::vector<FeatureRecord>& batch;
  const HeadParams& p;
  const DropoutMask* mask;
  double slope = kDefaultLeakySlope;
  std::vector<long double> z;        // B x hidden
  std::vector<long double> contrib;  // B x hidden, act(z) * mask * w2
  std::vector<long double> logit;    // B

  LossOracle(const std::vector<FeatureRecord>& b, const HeadParams& params,
             const DropoutMask* m)
      : batch(b), p(params), mask(m) {
    const std::size_t n = batch.size(), h = p.hidden;
    z.assign(n * h, 0.0L);
    contrib.assign(n * h, 0.0L);
    logit.assign(n, 0.0L);
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t j = 0; j < h; ++j) {
        long double acc = p.b1[j];
        for (std::size_t i = 0; i < p.dim; ++i)
          acc += static_cast<long double>(batch[s].features[i]) * p.w1[i * h + j];
        z[s * h + j] = acc;
        contrib[s * h + j] = unit(s, j, acc, p.w2[j]);
        logit[s] += contrib[s * h + j];
      }
      logit[s] += p.b2;
    }
  }

  long double unit(std::size_t s, std::size_t j, long double zj, long double w2j) const {
    long double a = zj > 0 ? zj : slope * zj;
    if (mask) a *= mask->scale[s * p.hidden + j];
    return a * w2j;
  }

  static long double bce(long double s, Label label) {
    long double q = 1.0L / (1.0L + std::exp(-s));
    q = std::clamp(q, 1e-12L, 1.0L - 1e-12L);
    return label == Label::Fake ? -std::log(q) : -std::log(1.0L - q);
  }

  // Mean loss with hidden unit j's pre-activation shifted by dz(s) and its
  // output weight replaced by w2j.
  template <class Shift>
  long double loss_unit(std::size_t j, Shift dz, long double w2j) const {
    long double total = 0.0L;
    for (std::size_t s = 0; s < batch.size(); ++s) {
      const std::size_t k = s * p.hidden + j;
      const long double shifted = logit[s] - contrib[k] + unit(s, j, z[k] + dz(s), w2j);
      total += bce(shifted, batch[s].label);
    }
    return total / static_cast<long double>(batch.size());
  }

  long double loss_bias(long double db2) const {
    long double total = 0.0L;
    for (std::size_t s = 0; s < batch.size(); ++s) total += bce(logit[s] + db2, batch[s].label);
    return total / static_cast<long double>(batch.size());
  }
};

Outcome criterion_gradient() {
  const auto start = Clock::now();
  Outcome o;
  Xoshiro256 rng(20241101);
  constexpr double h = 1e-5;
  constexpr std::size_t instances = 50;
  std::size_t accepted = 0, rejected = 0, coords = 0;
  double worst = 0.0;

  while (accepted < instances) {
    HeadParams p = HeadParams::init_uniform(rng, kClsDim, kHiddenWidth);
    for (auto& b : p.b1) b = rng.uniform(-0.1, 0.1);
    p.b2 = rng.uniform(-0.5, 0.5);
    const std::size_t n = 1 + rng.below(32);
    std::vector<FeatureRecord> batch(n);
    for (std::size_t s = 0; s < n; ++s) {
      batch[s].image_id = "g" + std::to_string(s);
      batch[s].label = rng.below(2) ? Label::Fake : Label::Real;
      batch[s].features.resize(kClsDim);
      for (auto& v : batch[s].features) v = pgki::testing::normal(rng);
    }
    // Half the instances run through a sampled dropout mask.
    std::optional<DropoutMask> mask;
    if (accepted % 2 == 1) mask = DropoutMask::sample(rng, n, kHiddenWidth, kDefaultDropout);

    // A step must not straddle the LeakyReLU kink.
    double max_abs_x = 0.0;
    for (const auto& r : batch)
      for (double v : r.features) max_abs_x = std::max(max_abs_x, std::abs(v));
    if (pgki::testing::min_abs_preactivation(batch, p) < 10.0 * h * std::max(1.0, max_abs_x)) {
      ++rejected;
      continue;
    }
    ++accepted;

    const HeadParams g = gradient(batch, p, mask ? &*mask : nullptr);
    const LossOracle oracle(batch, p, mask ? &*mask : nullptr);
    const auto check = [&](double analytic, long double up, long double down) {
      const double numeric = static_cast<double>((up - down) / (2.0L * h));
      worst = std::max(worst, pgki::testing::relative_error(analytic, numeric));
      ++coords;
    };
    const std::size_t hid = p.hidden;
    for (std::size_t j = 0; j < hid; ++j) {
      for (std::size_t i = 0; i < p.dim; ++i) {
        check(g.w1[i * hid + j],
              oracle.loss_unit(j, [&](std::size_t s) { return h * batch[s].features[i]; },
                               p.w2[j]),
              oracle.loss_unit(j, [&](std::size_t s) { return -h * batch[s].features[i]; },
                               p.w2[j]));
      }
      check(g.b1[j], oracle.loss_unit(j, [&](std::size_t) { return h; }, p.w2[j]),
            oracle.loss_unit(j, [&](std::size_t) { return -h; }, p.w2[j]));
      check(g.w2[j], oracle.loss_unit(j, [](std::size_t) { return 0.0; }, p.w2[j] + h),
            oracle.loss_unit(j, [](std::size_t) { return 0.0; }, p.w2[j] - h));
    }
    check(g.b2, oracle.loss_bias(h), oracle.loss_bias(-h));
  }
  const double elapsed = seconds_since(start);
  o.require(worst < 1e-5, "max relative error " + fmt("%.3e", worst));
  o.require(elapsed < 10.0, "runtime " + fmt("%.2f s", elapsed));
  o.detail = std::to_string(instances) + " instances (" + std::to_string(rejected) +
             " redrawn near the kink), " + std::to_string(coords) +
             " coordinates, max rel err " + fmt("%.2e", worst) + ", " + fmt("%.2f s", elapsed) +
             (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

// ---------------------------------------------------------------------------
// 2. Training sanity on the 1000-sample separable fixture.

Outcome criterion_training() {
  const auto start = Clock::now();
  Outcome o;
  TempDir dir("accept-train");
  const auto fx = pgki::testing::separable_fixture(500, 1000);
  const std::string features = (dir / "features.npy").string();
  const std::string manifest = (dir / "manifest.ndjson").string();
  write_npy(features, fx.features, NpyDtype::Float32);
  pgki::testing::write_text(manifest, dump_manifest(fx.manifest));

  double val_acc[2] = {0, 0};
  std::size_t epochs = 0;
  for (int run = 0; run < 2; ++run) {
    const auto r = run_cli({"train", "--features", features, "--manifest", manifest, "--out",
                            (dir / ("run" + std::to_string(run))).string(), "--seed", "42"});
    o.require(r.code == 0, "train exited " + std::to_string(r.code));
    if (r.code != 0) return o;
    const auto trained = r.event("trained");
    val_acc[run] = trained["val_accuracy"].get<double>();
    epochs = trained["epochs_run"].get<std::size_t>();
  }
  bool identical = true;
  for (const char* f : {"W1.npy", "b1.npy", "W2.npy", "b2.npy", "head.json"}) {
    identical = identical && slurp(dir / "run0" / f) == slurp(dir / "run1" / f);
  }
  const double elapsed = seconds_since(start);
  o.require(val_acc[0] > 0.99, "val accuracy " + fmt("%.4f", val_acc[0]));
  o.require(epochs <= 100, "epochs " + std::to_string(epochs));
  o.require(identical, "parameter files differ between runs");
  o.require(elapsed < 60.0, "runtime " + fmt("%.2f s", elapsed));
  if (o.pass) {
    o.detail = "val acc " + fmt("%.4f", val_acc[0]) + " after " + std::to_string(epochs) +
               " epochs, seed-42 runs byte-identical, " + fmt("%.2f s", elapsed) +
               " for both runs";
  }
  return o;
}

// ---------------------------------------------------------------------------
// 3. Template exactness.

Outcome criterion_template() {
  Outcome o;
  const std::string expected =
      "From Binary Classifier: The probability that this image is fake is 0.913.";
  o.require(render_prompt(0.913).rendered == expected, "render_prompt(0.913) bytes differ");
  std::size_t exact = 0;
  for (int k = 0; k <= 1000; ++k) {
    const double p = k / 1000.0;
    const auto back = extract_injected_probability(render_prompt(p).rendered);
    if (back && *back == p) ++exact;
  }
  o.require(exact == 1001, std::to_string(exact) + "/1001 grid points invert exactly");
  if (o.pass) o.detail = "0.913 bytes exact, 1001/1001 grid points invert exactly";
  return o;
}

// ---------------------------------------------------------------------------
// 4. Metric oracles.

std::size_t lcs_exhaustive(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  // Longest subsequence of a (over all 2^|a| subsets) that is also one of b.
  std::size_t best = 0;
  const std::size_t n = a.size();
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    const auto size = static_cast<std::size_t>(__builtin_popcount(mask));
    if (size <= best) continue;
    std::size_t pos = 0;
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      if (!(mask >> i & 1u)) continue;
      while (pos < b.size() && b[pos] != a[i]) ++pos;
      if (pos == b.size()) ok = false;
      else ++pos;
    }
    if (ok) best = size;
  }
  return best;
}

Outcome criterion_metrics() {
  Outcome o;
  Xoshiro256 rng(4242);

  const std::vector<std::string> vocab{"blur", "edge", "light", "skin", "text", "hand"};
  double rouge_worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> ref(rng.below(13)), cand(rng.below(13));
    for (auto& t : ref) t = vocab[rng.below(vocab.size())];
    for (auto& t : cand) t = vocab[rng.below(vocab.size())];
    const std::size_t l = std::min(lcs_exhaustive(ref, cand), lcs_exhaustive(cand, ref));
    double expected = 0.0;
    if (l > 0) {
      const double prec = double(l) / double(cand.size()), rec = double(l) / double(ref.size());
      const double b2 = kRougeBeta * kRougeBeta;
      expected = (1 + b2) * prec * rec / (rec + b2 * prec);
    }
    rouge_worst = std::max(rouge_worst, std::abs(rouge_l(ref, cand) - expected));
  }
  o.require(rouge_worst <= 1e-12, "ROUGE_L max abs err " + fmt("%.3e", rouge_worst));

  // Confusion matrices with metrics worked out by hand as exact fractions.
  struct Case {
    ConfusionCounts c;
    double acc, fake_f1, real_f1, macro, weighted;
  };
  const std::vector<Case> cases{
      {{3, 1, 5, 1, 0, 0}, 8.0 / 10, 3.0 / 4, 5.0 / 6, 19.0 / 24, 8.0 / 10},
      {{10, 0, 10, 0, 0, 0}, 1.0, 1.0, 1.0, 1.0, 1.0},
      {{0, 0, 10, 0, 0, 0}, 1.0, 0.0, 1.0, 0.5, 1.0},
      {{0, 5, 0, 5, 0, 0}, 0.0, 0.0, 0.0, 0.0, 0.0},
      {{7, 4, 6, 3, 2, 2}, 13.0 / 20, 2.0 / 3, 12.0 / 19, 37.0 / 57, 37.0 / 57},
      {{1, 0, 0, 0, 0, 0}, 1.0, 1.0, 0.0, 0.5, 1.0},
      {{0, 3, 2, 0, 0, 0}, 2.0 / 5, 0.0, 4.0 / 7, 2.0 / 7, 4.0 / 7},
      {{50, 25, 25, 50, 0, 0}, 0.5, 4.0 / 7, 2.0 / 5, 17.0 / 35, 18.0 / 35},
      {{2, 2, 2, 2, 0, 0}, 0.5, 0.5, 0.5, 0.5, 0.5},
      {{9, 1, 0, 0, 0, 0}, 9.0 / 10, 18.0 / 19, 0.0, 9.0 / 19, 81.0 / 95},
  };
  std::size_t exact = 0;
  for (const auto& k : cases) {
    const auto m = detection_metrics(k.c);
    if (m.overall_accuracy == k.acc && m.fake.f1 == k.fake_f1 && m.real.f1 == k.real_f1 &&
        m.macro_f1 == k.macro && m.weighted_f1 == k.weighted)
      ++exact;
  }
  o.require(exact == cases.size(),
            std::to_string(exact) + "/" + std::to_string(cases.size()) + " detection fixtures");

  double css_worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 1 + rng.below(768);
    std::vector<double> x(d), y(d);
    for (auto& v : x) v = pgki::testing::normal(rng);
    for (auto& v : y) v = pgki::testing::normal(rng);
    double dot = 0, nx = 0, ny = 0;
    for (std::size_t k = 0; k < d; ++k) {
      dot += x[k] * y[k];
      nx += x[k] * x[k];
      ny += y[k] * y[k];
    }
    css_worst = std::max(css_worst, std::abs(css(x, y) - dot / std::sqrt(nx * ny)));
  }
  o.require(css_worst <= 1e-12, "css max abs err " + fmt("%.3e", css_worst));
  if (o.pass) {
    o.detail = "ROUGE_L 200 pairs max err " + fmt("%.1e", rouge_worst) +
               ", 10/10 confusion fixtures, css 100 pairs max err " + fmt("%.1e", css_worst);
  }
  return o;
}

// ---------------------------------------------------------------------------
// 5 and 6. Mock pipeline on an overlapping-class fixture: the head is good
// but not perfect, so equality and the ablation gap are both informative.

struct PipelineFixture {
  FeatureMatrix features;
  DatasetManifest manifest;
  HeadParams head;
};

PipelineFixture pipeline_fixture() {
  Xoshiro256 rng(777);
  constexpr std::size_t per_split[3] = {800, 200, 200};  // train, val, test
  std::vector<double> values;
  DatasetManifest manifest;
  std::size_t row = 0;
  for (int split = 0; split < 3; ++split) {
    for (std::size_t k = 0; k < per_split[split]; ++k) {
      const bool fake = k % 2 == 0;
      for (std::size_t d = 0; d < kClsDim; ++d)
        values.push_back((fake ? 0.03 : -0.03) + pgki::testing::normal(rng));
      ManifestEntry e;
      e.image_id = "img_" + std::to_string(row);
      e.row = row++;
      e.label = fake ? Label::Fake : Label::Real;
      e.split = static_cast<Split>(split);
      manifest.entries.push_back(e);
    }
  }
  FeatureMatrix features(row, kClsDim, std::move(values));
  TrainConfig config;
  config.seed = 42;
  auto result = train(join(features, manifest), config);
  return {std::move(features), std::move(manifest), std::move(result.params)};
}

struct PipelineScores {
  double head_accuracy = 0.0;
  double injected_accuracy = 0.0;
  double plain_accuracy = 0.0;
  double majority = 0.0;
  std::size_t ambiguous = 0;  // head probabilities that round up to 0.500
  std::size_t failures = 0;
  std::size_t records = 0;
};

PipelineScores run_pipeline() {
  const auto fx = pipeline_fixture();
  const auto test = select_split(join(fx.features, fx.manifest), Split::Test);
  const auto preds = predict_batch(test, fx.head);
  std::vector<Label> labels;
  PipelineScores s;
  std::size_t fakes = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    labels.push_back(test[i].label);
    fakes += test[i].label == Label::Fake;
    if (preds[i].probability_fake >= 0.4995 && preds[i].probability_fake < 0.5) ++s.ambiguous;
  }
  s.records = test.size();
  s.head_accuracy = classifier_metrics(preds, labels).accuracy;
  s.majority = double(std::max(fakes, test.size() - fakes)) / double(test.size());

  MockBackend mock;
  for (bool inject : {true, false}) {
    InferenceOptions options;
    options.inject = inject;
    const auto run = run_inference(fx.manifest, fx.features, fx.head, mock, options);
    s.failures += run.summary.failures;
    const auto responses = parse_responses(dump_inference(run));
    const auto report = evaluate_run(responses, fx.manifest);
    (inject ? s.injected_accuracy : s.plain_accuracy) = report.detection.overall_accuracy;
  }
  return s;
}

Outcome criterion_mock_equivalence(const PipelineScores& s) {
  Outcome o;
  o.require(s.records == 200, std::to_string(s.records) + " test records");
  o.require(s.failures == 0, std::to_string(s.failures) + " failed inferences");
  o.require(s.ambiguous == 0,
            std::to_string(s.ambiguous) + " probabilities in [0.4995, 0.5) render as 0.500");
  o.require(s.injected_accuracy == s.head_accuracy,
            "pipeline " + fmt("%.17g", s.injected_accuracy) + " vs head " +
                fmt("%.17g", s.head_accuracy));
  if (o.pass) {
    o.detail = "200 records, pipeline accuracy == head accuracy == " +
               fmt("%.4f", s.head_accuracy);
  }
  return o;
}

Outcome criterion_ablation(const PipelineScores& s) {
  Outcome o;
  o.require(s.head_accuracy > s.majority, "head " + fmt("%.4f", s.head_accuracy) +
                                              " does not beat majority " +
                                              fmt("%.4f", s.majority));
  o.require(s.injected_accuracy > s.plain_accuracy,
            "ON " + fmt("%.4f", s.injected_accuracy) + " vs OFF " + fmt("%.4f", s.plain_accuracy));
  if (o.pass) {
    o.detail = "injection ON " + fmt("%.4f", s.injected_accuracy) + " > OFF " +
               fmt("%.4f", s.plain_accuracy) + " (majority " + fmt("%.4f", s.majority) + ")";
  }
  return o;
}

// ---------------------------------------------------------------------------
// 7. Reproduction recipe is documented, and the fixture-scale version of
// that recipe (train, then read the test-split metrics) works.

Outcome criterion_reproduction_path() {
  Outcome o;
  const std::string readme = read_file(std::filesystem::path(PGKI_SOURCE_DIR) / "README.md");
  for (const char* needle : {"pgki-cli train", "--features", "--manifest", "test_metrics",
                             "0.911", "0.9317"}) {
    o.require(readme.find(needle) != std::string::npos,
              std::string("README lacks \"") + needle + "\"");
  }

  TempDir dir("accept-repro");
  const auto fx = pgki::testing::separable_fixture(60, 31337, kClsDim, 25);
  const std::string features = (dir / "features.npy").string();
  const std::string manifest = (dir / "manifest.ndjson").string();
  write_npy(features, fx.features, NpyDtype::Float32);
  pgki::testing::write_text(manifest, dump_manifest(fx.manifest));
  const auto r = run_cli({"train", "--features", features, "--manifest", manifest, "--out",
                          (dir / "head").string(), "--seed", "42"});
  o.require(r.code == 0, "train exited " + std::to_string(r.code));
  if (r.code != 0) return o;
  const auto reported = r.event("test_metrics");
  o.require(!reported.is_null(), "no test_metrics event");
  if (reported.is_null()) return o;

  const auto head = load_head(dir / "head");
  const auto test = select_split(join(read_npy(features), read_manifest(manifest)), Split::Test);
  std::vector<Label> labels;
  for (const auto& t : test) labels.push_back(t.label);
  const auto m = classifier_metrics(predict_batch(test, head.params), labels);
  o.require(reported["accuracy"].get<double>() == m.accuracy &&
                reported["f1_fake"].get<double>() == m.f1_fake,
            "test_metrics disagree with a reload of the saved head");
  if (o.pass) {
    o.detail = "README documents the recipe; fixture test split Acc " +
               fmt("%.4f", m.accuracy) + " / F1 " + fmt("%.4f", m.f1_fake) +
               " reproduced from the saved head";
  }
  return o;
}

// ---------------------------------------------------------------------------
// 8. NPY robustness.

std::vector<std::byte> npy_bytes(const std::string& header, const std::string& payload,
                                 const std::string& magic = std::string("\x93NUMPY", 6),
                                 char major = 1) {
  std::string raw = magic;
  raw.push_back(major);
  raw.push_back(0);
  raw.push_back(static_cast<char>(header.size() & 0xff));
  raw.push_back(static_cast<char>(header.size() >> 8));
  raw += header;
  raw += payload;
  std::vector<std::byte> out(raw.size());
  std::memcpy(out.data(), raw.data(), raw.size());
  return out;
}

std::string dict(const std::string& descr, const std::string& fortran, const std::string& shape) {
  return "{'descr': '" + descr + "', 'fortran_order': " + fortran + ", 'shape': " + shape +
         ", }\n";
}

Outcome criterion_npy() {
  Outcome o;
  Xoshiro256 rng(8888);
  TempDir dir("accept-npy");
  std::size_t exact = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t rows = 1 + rng.below(40), cols = 1 + rng.below(1100);
    const bool f4 = trial % 2 == 0;
    std::vector<double> values(rows * cols);
    for (auto& v : values) {
      const double x = pgki::testing::normal(rng) * std::exp2(rng.uniform(-30, 30));
      v = f4 ? static_cast<double>(static_cast<float>(x)) : x;
    }
    // A few extremes representable in either width.
    values[0] = f4 ? static_cast<double>(std::numeric_limits<float>::denorm_min()) : 5e-324;
    values[values.size() - 1] = -0.0;
    const FeatureMatrix m(rows, cols, values);
    const auto dtype = f4 ? NpyDtype::Float32 : NpyDtype::Float64;
    const auto path = dir / ("m" + std::to_string(trial) + ".npy");
    write_npy(path, m, dtype);
    const FeatureMatrix from_file = read_npy(path);
    const FeatureMatrix from_bytes = parse_npy(serialize_npy(m, dtype));
    if (from_file == m && from_bytes == m && std::signbit(from_file.values().back())) ++exact;
  }
  o.require(exact == 50, std::to_string(exact) + "/50 matrices round-trip exactly");

  std::string good_payload(2 * 2 * 8, '\0');
  std::string nan_payload = good_payload;
  const double nan = std::nan("");
  std::memcpy(nan_payload.data() + 8, &nan, 8);
  const std::string ok = dict("<f8", "False", "(2, 2)");
  struct Crafted {
    const char* name;
    std::vector<std::byte> bytes;
    Errc expected;
  };
  const std::vector<Crafted> crafted{
      {"bad magic", npy_bytes(ok, good_payload, std::string("\x93NUMPZ", 6)),
       Errc::MalformedHeader},
      {"version 3", npy_bytes(ok, good_payload, std::string("\x93NUMPY", 6), 3),
       Errc::MalformedHeader},
      {"not a dict", npy_bytes("descr=<f8 shape=2x2\n", good_payload), Errc::MalformedHeader},
      {"missing shape", npy_bytes("{'descr': '<f8', 'fortran_order': False, }\n", good_payload),
       Errc::MalformedHeader},
      {"int64", npy_bytes(dict("<i8", "False", "(2, 2)"), good_payload), Errc::UnsupportedDtype},
      {"big endian", npy_bytes(dict(">f8", "False", "(2, 2)"), good_payload),
       Errc::UnsupportedDtype},
      {"1-D", npy_bytes(dict("<f8", "False", "(4,)"), good_payload), Errc::ShapeMismatch},
      {"3-D", npy_bytes(dict("<f8", "False", "(1, 2, 2)"), good_payload), Errc::ShapeMismatch},
      {"short payload", npy_bytes(ok, good_payload.substr(1)), Errc::TruncatedPayload},
      {"NaN payload", npy_bytes(ok, nan_payload), Errc::NonFiniteValue},
  };
  for (const auto& c : crafted) {
    std::optional<Errc> got;
    try {
      parse_npy(c.bytes);
    } catch (const Error& e) {
      got = e.code();
    }
    o.require(got == c.expected,
              std::string(c.name) + " -> " + (got ? std::string(to_string(*got)) : "accepted"));
  }
  if (o.pass) o.detail = "50/50 round-trips exact, 10/10 malformed headers rejected as specified";
  return o;
}

Outcome guarded(const std::function<Outcome()>& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    return {false, std::string("exception: ") + e.what()};
  }
}

}  // namespace

int main() {
  std::vector<std::pair<std::string, Outcome>> results;
  results.emplace_back("gradient correctness", guarded(criterion_gradient));
  results.emplace_back("head training sanity", guarded(criterion_training));
  results.emplace_back("template exactness", guarded(criterion_template));
  results.emplace_back("metric oracles", guarded(criterion_metrics));

  PipelineScores scores;
  const Outcome pipeline = guarded([&] {
    scores = run_pipeline();
    return Outcome{};
  });
  results.emplace_back("end-to-end mock equivalence",
                       pipeline.pass ? criterion_mock_equivalence(scores) : pipeline);
  results.emplace_back("ablation direction",
                       pipeline.pass ? criterion_ablation(scores) : pipeline);
  results.emplace_back("reproduction path", guarded(criterion_reproduction_path));
  results.emplace_back("format robustness", guarded(criterion_npy));

  int failed = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& [name, outcome] = results[i];
    std::printf("Criterion %zu %s: %s (%s)\n", i + 1, outcome.pass ? "PASS" : "FAIL",
                name.c_str(), outcome.detail.c_str());
    failed += !outcome.pass;
  }
  std::fflush(stdout);
  return failed == 0 ? 0 : 1;
}
