#include "commands.hpp"

#include <filesystem>
#include <fstream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "pgki/error.hpp"
#include "pgki/evaluation.hpp"
#include "pgki/feature_store.hpp"
#include "pgki/head_io.hpp"
#include "pgki/linear_head.hpp"
#include "pgki/orchestrator.hpp"
#include "pgki/prompt_injection.hpp"

namespace pgki::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

void emit(std::ostream& log, ordered_json event) {
  log << event.dump() << '\n';
}

void require_file(const std::string& path, const std::string& what) {
  std::error_code ec;
  if (path.empty() || !fs::exists(path, ec)) {
    throw Error(Errc::NotFound, what + " not found: " + path);
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error(Errc::IoError, "failed writing " + path.string());
}

struct TrainArgs {
  std::string features, manifest, out;
  TrainConfig config;
};

struct InjectArgs {
  std::string dataset, head, features, manifest, out;
  std::string placement = "prepend";
  bool llava = false;
};

struct InferArgs {
  std::string manifest, features, head, out;
  std::string backend = "mock";
  std::string endpoint, model = "df-llava";
  long long timeout_ms = 60000;
  std::size_t max_in_flight = 4;
  std::size_t retries = 3;
  bool inject = true;
  std::string placement = "prepend";
  std::string question{kDefaultQuestion};
  std::size_t max_tokens = 512;
  double temperature = 0.0;
};

struct EvalArgs {
  std::string responses, manifest, out, table;
  std::string method = "model";
  std::string emb_candidate, emb_reference, emb_index;
  double beta = kRougeBeta;
};

void cmd_train(const TrainArgs& a, std::ostream& log) {
  require_file(a.features, "features");
  require_file(a.manifest, "manifest");
  const auto records = join(read_npy(a.features), read_manifest(a.manifest));
  const auto result = train(records, a.config);

  std::string log_lines;
  for (const auto& e : result.log.epochs) {
    ordered_json line{{"event", "epoch"},
                      {"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"val_accuracy", e.val_accuracy}};
    log_lines += line.dump() + "\n";
    emit(log, line);
  }
  HeadMetadata meta{a.config.dropout_p, a.config.leaky_slope, a.config.seed,
                    result.log.best_val_accuracy, a.config.l2_normalize};
  save_head(a.out, {result.params, meta});
  write_text(fs::path(a.out) / "training_log.ndjson", log_lines);
  emit(log, {{"event", "trained"},
             {"head", a.out},
             {"epochs_run", result.log.epochs.size()},
             {"best_epoch", result.log.best_epoch},
             {"val_accuracy", result.log.best_val_accuracy},
             {"stopped_early", result.log.stopped_early}});

  const auto test = select_split(records, Split::Test);
  if (!test.empty()) {
    const auto preds = predict_batch(test, result.params, a.config.l2_normalize,
                                     a.config.leaky_slope);
    std::vector<Label> labels;
    for (const auto& r : test) labels.push_back(r.label);
    const auto m = classifier_metrics(preds, labels, a.config.threshold);
    emit(log, {{"event", "test_metrics"},
               {"samples", test.size()},
               {"accuracy", m.accuracy},
               {"f1_fake", m.f1_fake}});
  }
}

void cmd_inject(const InjectArgs& a, std::ostream& log) {
  require_file(a.dataset, "dataset");
  require_file(a.head, "head");
  require_file(a.features, "features");
  require_file(a.manifest, "manifest");
  const Placement placement = parse_placement(a.placement);
  const std::string text = read_file(a.dataset);
  const auto samples = a.llava ? parse_llava_conversations(text) : parse_conversations(text);
  const auto head = load_head(a.head);
  const auto records = join(read_npy(a.features), read_manifest(a.manifest));
  const auto predictions = predict_batch(records, head.params, head.metadata.l2_normalize,
                                         head.metadata.leaky_slope);
  const auto augmented = augment_dataset(samples, predictions, placement);
  write_text(a.out, dump_conversations(augmented));
  emit(log, {{"event", "injected"}, {"samples", augmented.size()}, {"out", a.out}});
}

void cmd_infer(const InferArgs& a, std::ostream& log) {
  require_file(a.manifest, "manifest");
  require_file(a.features, "features");
  require_file(a.head, "head");
  BackendConfig backend_config;
  backend_config.kind = parse_backend_kind(a.backend);
  backend_config.endpoint = a.endpoint;
  backend_config.model_name = a.model;
  backend_config.timeout = std::chrono::milliseconds(a.timeout_ms);
  backend_config.max_in_flight = a.max_in_flight;
  backend_config.retries = a.retries;
  auto backend = make_backend(backend_config);

  const auto head = load_head(a.head);
  InferenceOptions options;
  options.inject = a.inject;
  options.placement = parse_placement(a.placement);
  options.question = a.question;
  options.generation = {a.max_tokens, a.temperature};
  options.max_in_flight = a.max_in_flight;
  options.l2_normalize = head.metadata.l2_normalize;

  const auto run = run_inference(read_manifest(a.manifest), read_npy(a.features), head.params,
                                 *backend, options);
  write_text(a.out, dump_inference(run));
  emit(log, {{"event", "summary"},
             {"backend", backend->id()},
             {"total", run.summary.total},
             {"failures", run.summary.failures},
             {"out", a.out}});
}

void cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& log) {
  require_file(a.responses, "responses");
  require_file(a.manifest, "manifest");
  std::optional<EmbeddingPairs> embeddings;
  if (!a.emb_candidate.empty() || !a.emb_reference.empty()) {
    require_file(a.emb_candidate, "candidate embeddings");
    require_file(a.emb_reference, "reference embeddings");
    embeddings.emplace();
    embeddings->candidate = read_npy(a.emb_candidate);
    embeddings->reference = read_npy(a.emb_reference);
    if (!a.emb_index.empty()) {
      require_file(a.emb_index, "embedding index");
      // Same NDJSON shape as the dataset manifest; only image_id and row are used.
      std::unordered_map<std::string, std::size_t> index;
      for (const auto& e : read_manifest(a.emb_index).entries) index.emplace(e.image_id, e.row);
      embeddings->index = std::move(index);
    }
  }
  const auto responses = parse_responses(read_file(a.responses));
  const auto report = evaluate_run(responses, read_manifest(a.manifest),
                                   embeddings ? &*embeddings : nullptr, {a.beta});
  const std::string table = report_table(report, a.method);
  if (!a.out.empty()) write_text(a.out, report_json(report, a.method) + "\n");
  if (!a.table.empty()) write_text(a.table, table);
  out << table;
  emit(log, {{"event", "evaluated"},
             {"samples", report.samples},
             {"failed_responses", report.failed_responses},
             {"overall_accuracy", report.detection.overall_accuracy}});
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& log) {
  CLI::App app{"Prompt-guided knowledge injection pipeline: train, inject, infer, eval"};
  app.set_config("--config", "", "TOML file with default flag values");
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train the linear head on [CLS] features");
  train_cmd->add_option("--features", train_args.features, "NPY feature matrix")->required();
  train_cmd->add_option("--manifest", train_args.manifest, "NDJSON manifest")->required();
  train_cmd->add_option("--out,--head", train_args.out, "Output head directory")->required();
  train_cmd->add_option("--seed", train_args.config.seed);
  train_cmd->add_option("--lr", train_args.config.learning_rate);
  train_cmd->add_option("--epochs", train_args.config.max_epochs);
  train_cmd->add_option("--batch-size", train_args.config.batch_size);
  train_cmd->add_option("--patience", train_args.config.patience);
  train_cmd->add_option("--dropout", train_args.config.dropout_p);
  train_cmd->add_option("--threshold", train_args.config.threshold);
  train_cmd->add_flag("--normalize", train_args.config.l2_normalize,
                      "L2-normalize features before the head");

  InjectArgs inject_args;
  auto* inject_cmd = app.add_subcommand("inject", "Add classifier prompts to a dataset");
  inject_cmd->add_option("--dataset", inject_args.dataset)->required();
  inject_cmd->add_option("--head", inject_args.head)->required();
  inject_cmd->add_option("--features", inject_args.features)->required();
  inject_cmd->add_option("--manifest", inject_args.manifest)->required();
  inject_cmd->add_option("--out", inject_args.out)->required();
  inject_cmd->add_option("--placement", inject_args.placement)
      ->check(CLI::IsMember({"prepend", "append"}));
  inject_cmd->add_flag("--llava", inject_args.llava, "Dataset is a LLaVA conversation array");

  InferArgs infer_args;
  auto* infer_cmd = app.add_subcommand("infer", "Run inference against a chat backend");
  infer_cmd->add_option("--manifest", infer_args.manifest)->required();
  infer_cmd->add_option("--features", infer_args.features)->required();
  infer_cmd->add_option("--head", infer_args.head)->required();
  infer_cmd->add_option("--out", infer_args.out)->required();
  infer_cmd->add_option("--backend", infer_args.backend)->check(CLI::IsMember({"mock", "http"}));
  infer_cmd->add_option("--endpoint", infer_args.endpoint);
  infer_cmd->add_option("--model", infer_args.model);
  infer_cmd->add_option("--timeout-ms", infer_args.timeout_ms);
  infer_cmd->add_option("--max-in-flight", infer_args.max_in_flight);
  infer_cmd->add_option("--retries", infer_args.retries);
  infer_cmd->add_flag("--inject,!--no-inject", infer_args.inject);
  infer_cmd->add_option("--placement", infer_args.placement)
      ->check(CLI::IsMember({"prepend", "append"}));
  infer_cmd->add_option("--question", infer_args.question);
  infer_cmd->add_option("--max-tokens", infer_args.max_tokens);
  infer_cmd->add_option("--temperature", infer_args.temperature);

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Score responses against references");
  eval_cmd->add_option("--responses", eval_args.responses)->required();
  eval_cmd->add_option("--manifest", eval_args.manifest)->required();
  eval_cmd->add_option("--out", eval_args.out, "Report JSON path");
  eval_cmd->add_option("--table", eval_args.table, "Text table path");
  eval_cmd->add_option("--method", eval_args.method, "Row label in the tables");
  eval_cmd->add_option("--beta", eval_args.beta);
  eval_cmd->add_option("--emb-candidate", eval_args.emb_candidate);
  eval_cmd->add_option("--emb-reference", eval_args.emb_reference);
  eval_cmd->add_option("--emb-index", eval_args.emb_index);

  std::vector<const char*> argv{"pgki-cli"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    emit(log, {{"event", "error"}, {"code", "UsageError"}, {"message", e.what()}});
    return 2;
  }

  try {
    if (*train_cmd) cmd_train(train_args, log);
    else if (*inject_cmd) cmd_inject(inject_args, log);
    else if (*infer_cmd) cmd_infer(infer_args, log);
    else if (*eval_cmd) cmd_eval(eval_args, out, log);
  } catch (const Error& e) {
    emit(log, {{"event", "error"}, {"code", to_string(e.code())}, {"message", e.what()}});
    return 1;
  } catch (const std::exception& e) {
    emit(log, {{"event", "error"}, {"code", "Internal"}, {"message", e.what()}});
    return 1;
  }
  return 0;
}

}  // namespace pgki::cli
