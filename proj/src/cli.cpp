#include "phishaudit/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <tuple>

#include "CLI11.hpp"
#include "phishaudit/config.hpp"
#include "phishaudit/csv.hpp"
#include "phishaudit/error.hpp"
#include "phishaudit/experiments.hpp"
#include "phishaudit/report.hpp"
#include "phishaudit/rng.hpp"
#include "phishaudit/runbook.hpp"
#include "phishaudit/shap.hpp"
#include "phishaudit/synthetic.hpp"
#include "phishaudit/url_features.hpp"
#ifdef PHISHAUDIT_WITH_FETCH
#include "phishaudit/fetch.hpp"
#endif

namespace phishaudit {
namespace {

namespace fs = std::filesystem;

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
};

std::uint64_t seed_of(const Globals& g, std::uint64_t fallback = 0) {
  return g.seed.value_or(fallback);
}

// Config file when given, with --seed and --out applied on top.
RunConfig run_config(const Globals& g, bool required) {
  RunConfig cfg;
  if (!g.config.empty()) {
    cfg = RunConfig::load(g.config);
  } else if (required) {
    throw Error(ErrorCode::kConfig, "--config is required");
  }
  if (g.seed) cfg.seed = *g.seed;
  if (!g.out.empty()) cfg.out_dir = g.out;
  return cfg;
}

const std::string& need_out(const Globals& g) {
  if (g.out.empty()) throw Error(ErrorCode::kInvalidArgument, "--out is required");
  return g.out;
}

fs::path out_dir(const Globals& g) {
  fs::path dir(need_out(g));
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string());
  return dir;
}

struct TableArgs {
  std::string path;
  std::string label = "label";
  std::string positive = "1";
};

DataTable load_table(const TableArgs& t) {
  return load_csv(t.path, {.label_column = t.label, .positive_label = t.positive});
}

void add_table_options(CLI::App* cmd, TableArgs& t, const std::string& flag,
                       const std::string& what) {
  cmd->add_option(flag, t.path, what)->required()->check(CLI::ExistingFile);
  cmd->add_option("--label", t.label, "label column")->capture_default_str();
  cmd->add_option("--positive", t.positive, "label text of the phishing class")
      ->capture_default_str();
}

// ---------------------------------------------------------------------------

void cmd_extract(const Globals& g, const std::string& input, const std::string& column,
                 const std::string& resolver_path, const std::string& label) {
  const auto records = csv::read_file(input);
  if (records.empty()) throw Error(ErrorCode::kEmptyFile, input);
  const auto& header = records.front();
  const auto find = [&](const std::string& name) -> std::optional<std::size_t> {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto url_col = find(column);
  if (!url_col) throw Error(ErrorCode::kInvalidArgument, input + " has no column " + column);
  const auto label_col = find(label);

  const auto kb = KnowledgeBase::load_default();
  std::unique_ptr<ExternalResolver> resolver;
  if (resolver_path.empty()) {
    resolver = std::make_unique<NullResolver>();
  } else {
    resolver = std::make_unique<FixtureResolver>(
        FixtureResolver::load(resolver_path, FixtureResolver::Fallback::kMissing));
  }

  std::ofstream out(need_out(g), std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + g.out);
  csv::Record head = FeatureSchema::common().names();
  if (label_col) head.push_back(label);
  csv::write_record(out, head);
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& rec = records[i];
    const auto fv = extract_all(rec.at(*url_col), kb, *resolver);
    csv::Record row;
    for (const double v : fv.ordered()) {
      row.push_back(std::isnan(v) ? std::string() : csv::format_double(v));
    }
    if (label_col) row.push_back(rec.at(*label_col));
    csv::write_record(out, row);
  }
}

void cmd_synth(const Globals& g, SyntheticConfig sc) {
  sc.seed = seed_of(g, sc.seed);
  write_synthetic(generate_synthetic(sc, SchemaMapping::load_default()), need_out(g));
}

void cmd_prepare(const Globals& g) {
  const auto cfg = run_config(g, true);
  write_prepared(prepare(load_raw(cfg), cfg), (fs::path(cfg.out_dir) / "prepared").string());
}

void cmd_train(const Globals& g, const TableArgs& t, const std::string& model) {
  const RunConfig cfg = g.config.empty() ? RunConfig{} : run_config(g, false);
  const ModelRegistry registry(cfg.models);
  const auto m = registry.train(model, load_table(t), seed_of(g, cfg.seed));
  save_model(m, need_out(g));
}

void cmd_eval(const Globals& g, const std::string& model_path, const TableArgs& t) {
  const auto model = load_model(model_path);
  const auto test = load_table(t);
  const auto pred = predict(model, test);
  const auto dir = out_dir(g);
  write_json_file(evaluate(pred.label, test.labels()).to_json(),
                  (dir / "metrics.json").string());
  std::ofstream out((dir / "predictions.csv").string(), std::ios::binary);
  csv::write_record(out, {"row", "label", "probability", "predicted"});
  for (std::size_t i = 0; i < test.n_rows(); ++i) {
    csv::write_record(out, {std::to_string(i), std::to_string(test.label(i)),
                            csv::format_double(pred.probability[i]),
                            std::to_string(pred.label[i])});
  }
}

void cmd_explain(const Globals& g, const std::string& model_path, const TableArgs& data,
                 const std::string& background_path, std::size_t n_per_class,
                 std::size_t background_size, std::size_t top_n) {
  const auto model = load_model(model_path);
  const auto* ensemble = std::get_if<TreeEnsembleModel>(&model);
  if (ensemble == nullptr) {
    throw Error(ErrorCode::kInvalidArgument, "explanations need a tree ensemble model");
  }
  const auto seed = seed_of(g);
  const auto table = load_table(data);
  TableArgs bg_args = data;
  bg_args.path = background_path;
  const auto bg = BackgroundSet::sample(load_table(bg_args), background_size,
                                        derive_seed(seed, "background"));
  const auto explain_seed = derive_seed(seed, "explain");
  const auto sample = balanced_explanation_sample(table, n_per_class, explain_seed);
  const auto shap = tree_shap(*ensemble, sample.table, bg, 0, sample.rows);
  const auto importance = global_importance(shap);
  const auto dir = out_dir(g);
  write_shap_csv(shap, (dir / "shap.csv").string());
  write_json_file(shap_header(shap, explain_seed, bg.size()), (dir / "shap_header.json").string());
  write_json_file(importance.to_json(), (dir / "importance.json").string());
  render_bar_svg(importance, top_n, (dir / "bar.svg").string());
  render_beeswarm_svg(summary_data(shap, sample.table), derive_seed(seed, "beeswarm"), 20,
                      (dir / "beeswarm.svg").string());
}

void cmd_stats(const Globals& g, const TableArgs& t, const std::string& native) {
  auto table = load_table(t);
  if (!native.empty()) {
    const auto side = native == "d1" ? DatasetSide::kD1 : DatasetSide::kD2;
    table = align_schema(table, SchemaMapping::load_default(), side, FeatureSet::kCommon);
  }
  const auto report = feature_stats(table.renamed(fs::path(t.path).stem().string()),
                                    FeatureSchema::common());
  const auto dir = out_dir(g);
  report.write_mean_csv((dir / "means.csv").string());
  report.write_percentage_csv((dir / "percentages.csv").string());
  write_json_file(report.to_json(), (dir / "stats.json").string());
}

GlobalImportance read_importance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
  try {
    return GlobalImportance::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, path + ": " + e.what());
  }
}

void cmd_compare(const Globals& g, const std::string& a, const std::string& b, std::size_t k) {
  auto report = compare_rankings(read_importance(a), read_importance(b), k);
  report.experiment_a = fs::path(a).parent_path().filename().string();
  report.experiment_b = fs::path(b).parent_path().filename().string();
  write_json_file(report.to_json(), need_out(g));
}

void cmd_zoo(const Globals& g, const std::string& dataset, std::vector<std::string> models,
             bool models_given) {
  const auto cfg = run_config(g, true);
  if (!models_given) models = cfg.experiments.zoo;
  for (const auto& m : models) {
    if (!ModelRegistry::contains(m)) throw Error(ErrorCode::kUnknownModel, m);
  }
  const auto data = prepare(load_raw(cfg), cfg);
  const bool d1 = dataset == "D1";
  const auto zoo = model_zoo_comparison(dataset, d1 ? data.d1_all_train : data.d2_all_train,
                                        d1 ? data.d1_all_test : data.d2_all_test,
                                        ModelRegistry(cfg.models), models, cfg.seed);
  const auto dir = fs::path(cfg.out_dir) / "zoo";
  fs::create_directories(dir);
  zoo.write_csv((dir / (dataset + ".csv")).string());
  write_json_file(zoo.to_json(), (dir / (dataset + ".json")).string());
}

void cmd_fetch(const Globals& g, std::ostream& out) {
#ifdef PHISHAUDIT_WITH_FETCH
  const auto cfg = run_config(g, true);
  bool unpinned = false;
  for (const auto& [name, url, sha, path] :
       {std::tuple{"d1", &cfg.fetch.d1_url, &cfg.fetch.d1_sha256, &cfg.data.d1_path},
        std::tuple{"d2", &cfg.fetch.d2_url, &cfg.fetch.d2_sha256, &cfg.data.d2_path}}) {
    if (url->empty()) throw Error(ErrorCode::kConfig, std::string("[fetch] no url for ") + name);
    if (path->empty()) throw Error(ErrorCode::kConfig, std::string("[data] no path for ") + name);
    const auto parent = fs::path(*path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
    download(*url, *path);
    const auto digest = sha256_file(*path);
    out << *path << " sha256 " << digest << '\n';
    if (sha->empty()) {
      unpinned = true;
    } else if (digest != *sha) {
      fs::remove(*path);
      throw Error(ErrorCode::kIo, *path + ": hash mismatch, expected " + *sha);
    }
  }
  if (unpinned) {
    throw Error(ErrorCode::kConfig, "[fetch] pin the printed sha256 values before use");
  }
#else
  (void)g;
  (void)out;
  throw Error(ErrorCode::kIo, "built without download support");
#endif
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cross-dataset phishing URL classifier audit"};
  app.name("phishaudit");
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  Globals g;
  app.add_option("--seed", g.seed, "master seed");
  app.add_option("--config", g.config, "run configuration (INI)");
  app.add_option("--out", g.out, "output file or directory");

  std::function<void()> action;

  auto* extract = app.add_subcommand("extract", "URL list -> 20 lexical feature columns");
  extract->fallthrough();
  std::string input, column = "url", resolver, extract_label = "label";
  extract->add_option("--input", input, "CSV with a URL column")->required()->check(
      CLI::ExistingFile);
  extract->add_option("--column", column, "URL column")->capture_default_str();
  extract->add_option("--resolver", resolver, "CSV url,url_google_index,qty_redirects")
      ->check(CLI::ExistingFile);
  extract->add_option("--label", extract_label, "label column copied through when present")
      ->capture_default_str();
  extract->callback([&] { action = [&] { cmd_extract(g, input, column, resolver, extract_label); }; });

  auto* synth = app.add_subcommand("synth", "write the synthetic shifted dataset pair");
  synth->fallthrough();
  SyntheticConfig sc;
  synth->add_option("--d1-rows", sc.d1_rows)->capture_default_str();
  synth->add_option("--d2-rows", sc.d2_rows)->capture_default_str();
  synth->callback([&] { action = [&] { cmd_synth(g, sc); }; });

  auto* prep = app.add_subcommand("prepare", "align, impute, split, oversample and merge");
  prep->fallthrough();
  prep->callback([&] { action = [&] { cmd_prepare(g); }; });

  auto* train = app.add_subcommand("train", "train one model on a prepared table");
  train->fallthrough();
  TableArgs train_args;
  std::string model_name = "gbdt_second";
  add_table_options(train, train_args, "--train", "training table CSV");
  train->add_option("--model", model_name, "lr|dt|rf|nb|gbdt_first|gbdt_second")
      ->capture_default_str();
  train->callback([&] { action = [&] { cmd_train(g, train_args, model_name); }; });

  auto* eval = app.add_subcommand("eval", "metrics and predictions of a saved model");
  eval->fallthrough();
  TableArgs eval_args;
  std::string model_path;
  eval->add_option("--model", model_path, "model JSON")->required()->check(CLI::ExistingFile);
  add_table_options(eval, eval_args, "--test", "test table CSV");
  eval->callback([&] { action = [&] { cmd_eval(g, model_path, eval_args); }; });

  auto* explain = app.add_subcommand("explain", "attributions, importance and plots");
  explain->fallthrough();
  TableArgs explain_args;
  std::string background;
  std::size_t n_per_class = 500, background_size = 128, top_n = 30;
  explain->add_option("--model", model_path, "tree ensemble JSON")->required()->check(
      CLI::ExistingFile);
  add_table_options(explain, explain_args, "--data", "table to explain");
  explain->add_option("--background", background, "training table for the background")
      ->required()
      ->check(CLI::ExistingFile);
  explain->add_option("--n-per-class", n_per_class)->capture_default_str();
  explain->add_option("--background-size", background_size)->capture_default_str();
  explain->add_option("--top-n", top_n)->capture_default_str();
  explain->callback([&] {
    action = [&] {
      cmd_explain(g, model_path, explain_args, background, n_per_class, background_size, top_n);
    };
  });

  auto* stats = app.add_subcommand("stats", "per-class feature statistics");
  stats->fallthrough();
  TableArgs stats_args;
  std::string native;
  add_table_options(stats, stats_args, "--input", "table CSV");
  stats->add_option("--native", native, "align a raw d1 or d2 table first")
      ->check(CLI::IsMember({"d1", "d2"}));
  stats->callback([&] { action = [&] { cmd_stats(g, stats_args, native); }; });

  auto* compare = app.add_subcommand("compare", "rank divergence of two importance files");
  compare->fallthrough();
  std::string imp_a, imp_b;
  std::size_t k = 10;
  compare->add_option("--a", imp_a)->required()->check(CLI::ExistingFile);
  compare->add_option("--b", imp_b)->required()->check(CLI::ExistingFile);
  compare->add_option("--k", k)->capture_default_str();
  compare->callback([&] { action = [&] { cmd_compare(g, imp_a, imp_b, k); }; });

  auto* matrix = app.add_subcommand("run-matrix", "the full experiment matrix end to end");
  matrix->fallthrough();
  matrix->callback([&] { action = [&] { run_matrix(run_config(g, true), &err); }; });

  auto* zoo = app.add_subcommand("zoo", "model comparison on one all-features dataset");
  zoo->fallthrough();
  std::string zoo_dataset = "D1";
  std::vector<std::string> zoo_models;
  auto* models_opt = zoo->add_option("--models", zoo_models, "model names")->delimiter(',');
  zoo->add_option("--dataset", zoo_dataset)->check(CLI::IsMember({"D1", "D2"}));
  zoo->callback([&] {
    action = [&] { cmd_zoo(g, zoo_dataset, zoo_models, models_opt->count() > 0); };
  });

  auto* fetch = app.add_subcommand("fetch", "download the two public datasets to the [data] paths and check hashes");
  fetch->fallthrough();
  fetch->callback([&] { action = [&] { cmd_fetch(g, out); }; });

  std::vector<std::string> argv_store{"phishaudit"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    action();
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return is_validation_error(e.code()) ? 1 : 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace phishaudit
