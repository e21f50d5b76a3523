#include "phishaudit/runbook.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <tuple>

#include "phishaudit/error.hpp"
#include "phishaudit/rng.hpp"

namespace phishaudit {
namespace {

namespace fs = std::filesystem;

DataTable cap_rows(const DataTable& t, std::size_t cap, std::uint64_t seed) {
  if (cap == 0 || t.n_rows() <= cap) return t;
  Rng rng(seed);
  const auto rows = rng.sample_without_replacement(t.n_rows(), cap);
  return t.select_rows(rows).renamed(t.name());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
}

}  // namespace

void write_json_file(const nlohmann::ordered_json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path);
}

RawDatasets load_raw(const RunConfig& cfg) {
  cfg.check_inputs();
  const auto& d = cfg.data;
  RawDatasets raw{{}, {},
                  d.mapping_path.empty() ? SchemaMapping::load_default()
                                         : SchemaMapping::load(d.mapping_path)};
  std::string d1_path = d.d1_path, d2_path = d.d2_path;
  if (d.synthetic) {
    auto sc = d.synth;
    sc.seed = d.synthetic_seed.value_or(cfg.seed);
    const auto files = write_synthetic(generate_synthetic(sc, raw.mapping),
                                       (fs::path(cfg.out_dir) / "data").string());
    d1_path = files.d1_path;
    d2_path = files.d2_path;
  }
  raw.d1 = load_csv(d1_path, {.label_column = d.d1_label, .positive_label = d.d1_positive,
                              .name = "D1"});
  raw.d2 = load_csv(d2_path, {.label_column = d.d2_label, .positive_label = d.d2_positive,
                              .name = "D2"});
  return raw;
}

PreparedData prepare(const RawDatasets& raw, const RunConfig& cfg) {
  auto pc = cfg.data.pipeline;
  pc.seed = cfg.seed;
  auto data = prepare_datasets(raw.d1, raw.d2, raw.mapping, pc);
  data.d1_all_train = cap_rows(data.d1_all_train, cfg.data.max_rows_all,
                               derive_seed(cfg.seed, "cap-D1"));
  data.d2_all_train = cap_rows(data.d2_all_train, cfg.data.max_rows_all,
                               derive_seed(cfg.seed, "cap-D2"));
  return data;
}

void write_prepared(const PreparedData& data, const std::string& dir) {
  ensure_dir(dir);
  for (const DataTable* t :
       {&data.d1_all_train, &data.d1_all_test, &data.d2_all_train, &data.d2_all_test,
        &data.d1_train_real, &data.d1_train, &data.d1_test, &data.d2_train_real, &data.d2_train,
        &data.d2_test, &data.merge_train, &data.merge_test}) {
    if (t->n_cols() == 0) continue;
    t->write_csv((fs::path(dir) / (t->name() + ".csv")).string());
  }
  write_json_file(data.manifest(), (fs::path(dir) / "manifest.json").string());
}

MatrixOutcome run_matrix(const RunConfig& cfg, std::ostream* progress) {
  const fs::path out(cfg.out_dir);
  ensure_dir(out);
  std::ostringstream timings;
  const auto note = [&](const std::string& line) {
    if (progress != nullptr) *progress << line << '\n';
  };

  const RawDatasets raw = load_raw(cfg);
  const PreparedData data = prepare(raw, cfg);
  write_json_file(data.manifest(), (out / "manifest.json").string());
  note("prepared " + std::to_string(data.d1_train.n_rows()) + " + " +
       std::to_string(data.d2_train.n_rows()) + " training rows");

  MatrixOutcome outcome;
  const auto& schema = FeatureSchema::common();
  for (const auto& [table, side] :
       {std::pair{&raw.d1, DatasetSide::kD1}, std::pair{&raw.d2, DatasetSide::kD2}}) {
    outcome.stats.push_back(
        feature_stats(align_schema(*table, raw.mapping, side, FeatureSet::kCommon), schema));
  }
  ensure_dir(out / "stats");
  nlohmann::ordered_json stats_json;
  stats_json["datasets"] = nlohmann::ordered_json::array();
  for (const auto& s : outcome.stats) {
    s.write_mean_csv((out / "stats" / (s.dataset + "_means.csv")).string());
    s.write_percentage_csv((out / "stats" / (s.dataset + "_percentages.csv")).string());
    stats_json["datasets"].push_back(s.to_json());
  }
  const auto gap = largest_percentage_gap(outcome.stats[0], outcome.stats[1]);
  stats_json["largest_binary_gap"] = {{"feature", gap.feature}, {"gap", gap.gap}};
  write_json_file(stats_json, (out / "stats" / "stats.json").string());

  const ModelRegistry registry(cfg.models);
  if (!cfg.experiments.zoo.empty()) {
    ensure_dir(out / "zoo");
    for (const auto& [name, train, test] :
         {std::tuple{"D1", &data.d1_all_train, &data.d1_all_test},
          std::tuple{"D2", &data.d2_all_train, &data.d2_all_test}}) {
      auto zoo = model_zoo_comparison(name, *train, *test, registry, cfg.experiments.zoo,
                                      cfg.seed);
      zoo.write_csv((out / "zoo" / (std::string(name) + ".csv")).string());
      write_json_file(zoo.to_json(), (out / "zoo" / (std::string(name) + ".json")).string());
      note(std::string("model zoo on ") + name + " done");
      outcome.zoo.push_back(std::move(zoo));
    }
  }

  ModelCache cache;
  for (const auto& spec : canonical_matrix(cfg.seed, cfg.experiments.model)) {
    if (std::find(cfg.experiments.run.begin(), cfg.experiments.run.end(), spec.id) ==
        cfg.experiments.run.end()) {
      continue;
    }
    auto r = run_experiment(spec, data, registry, cfg.explain.explain, &cache);
    const fs::path dir = out / spec.id;
    write_experiment(r, dir.string());
    if (r.importance) {
      const std::string title = spec.id + " (" + data_source_name(spec.train_source) + " -> " +
                                data_source_name(spec.test_source) + ", " +
                                feature_set_name(spec.feature_set) + " features)";
      render_bar_svg(*r.importance, cfg.explain.top_n, (dir / "bar.svg").string(), title);
      render_beeswarm_svg(summary_data(*r.shap, *r.explained),
                          derive_seed(cfg.seed, "beeswarm|" + spec.id),
                          cfg.explain.beeswarm_features, (dir / "beeswarm.svg").string(), title);
    }
    for (const auto& w : r.warnings) {
      timings << "warning " << w << '\n';
      note("warning: " + w);
    }
    timings << spec.id << " wall_seconds=" << r.wall_seconds
            << " model_reused=" << (r.model_reused ? 1 : 0) << '\n';
    char acc[32];
    std::snprintf(acc, sizeof acc, "%.4f", r.metrics.accuracy);
    note(spec.id + " accuracy " + acc);
    outcome.results.push_back(std::move(r));
  }

  std::vector<ExperimentPair> pairs = canonical_pairs();
  if (cfg.experiments.extra_pairs) {
    pairs.insert(pairs.end(), extra_pairs().begin(), extra_pairs().end());
  }
  const auto explained = [&](const std::string& id) {
    return std::any_of(outcome.results.begin(), outcome.results.end(),
                       [&](const auto& r) { return r.spec.id == id && r.importance; });
  };
  std::erase_if(pairs, [&](const auto& p) { return !explained(p.first) || !explained(p.second); });
  outcome.divergence = cross_experiment_divergence(outcome.results, pairs, cfg.explain.k);
  if (!outcome.divergence.empty()) ensure_dir(out / "divergence");
  for (const auto& d : outcome.divergence) {
    write_json_file(d.to_json(),
                    (out / "divergence" / (d.experiment_a + "__" + d.experiment_b + ".json"))
                        .string());
  }

  nlohmann::ordered_json summary;
  summary["seed"] = cfg.seed;
  summary["experiments"] = nlohmann::ordered_json::array();
  for (const auto& r : outcome.results) {
    summary["experiments"].push_back({{"id", r.spec.id},
                                      {"train_source", data_source_name(r.spec.train_source)},
                                      {"test_source", data_source_name(r.spec.test_source)},
                                      {"feature_set", feature_set_name(r.spec.feature_set)},
                                      {"n_features", r.feature_names.size()},
                                      {"accuracy", r.metrics.accuracy},
                                      {"f1_weighted", r.metrics.weighted.f1},
                                      {"f1_macro", r.metrics.macro.f1},
                                      {"explained", r.importance.has_value()}});
  }
  summary["divergence"] = nlohmann::ordered_json::array();
  for (const auto& d : outcome.divergence) {
    summary["divergence"].push_back({{"a", d.experiment_a},
                                     {"b", d.experiment_b},
                                     {"kendall_tau", d.kendall_tau},
                                     {"sign_flips", d.sign_flips}});
  }
  summary["largest_binary_gap"] = stats_json["largest_binary_gap"];
  write_json_file(summary, (out / "summary.json").string());

  std::ofstream log((out / "run.log").string(), std::ios::binary);
  log << timings.str();
  return outcome;
}

}  // namespace phishaudit
