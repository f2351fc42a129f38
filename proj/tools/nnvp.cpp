// nnvp: command-line front end for the on-line and batch experiments.
//
//   nnvp inspect --dataset data/glass.csv
//   nnvp online  --preset tae --taxonomy all --out-dir runs/tae-online
//   nnvp online  --preset tae --method nn --out-dir runs/tae-nn
//   nnvp batch   --preset vehicle --taxonomy v4 --out-dir runs/vehicle
//   nnvp online  --config runs/tae-online/run_config.json --out-dir runs/again
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 training failure.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "nnvp/dataset.hpp"
#include "nnvp/error.hpp"
#include "nnvp/evaluation.hpp"
#include "nnvp/parallel.hpp"
#include "nnvp/report.hpp"
#include "nnvp/taxonomy.hpp"
#include "nnvp/venn.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kTraining = 3 };

struct Preset {
  const char* file;
  int hidden;
  int bins;
};

const std::map<std::string, Preset> kPresets{
    {"tae", {"tae.csv", 5, 100}},
    {"glass", {"glass.csv", 5, 100}},
    {"ecoli", {"ecoli.csv", 10, 100}},
    {"vehicle", {"vehicle.csv", 11, 200}},
};

// Everything that influences a run's results. Serialized as run_config.json;
// output location and thread count are deliberately left out.
struct RunConfig {
  std::string command;
  std::string dataset;
  bool header = false;
  std::string preset;
  std::string method = "vp";
  std::vector<std::string> taxonomy{"v1"};
  std::optional<double> theta;
  std::optional<int> hidden;
  int restarts = 3;
  double validation_fraction = 0.30;
  int max_epochs = 200;
  int patience = 20;
  std::uint64_t seed = 1;
  std::size_t initial_size = 50;
  std::size_t subsample = 0;  // 0: whole stream
  int repeats = 10;
  double test_fraction = 0.10;
  std::optional<int> bins;
  std::vector<double> x;  // predict only
};

json to_json(const RunConfig& c) {
  json j{{"command", c.command}, {"dataset", c.dataset}, {"header", c.header}, {"preset", c.preset}};
  j["theta"] = c.theta ? json(*c.theta) : json(nullptr);
  j["hidden"] = c.hidden ? json(*c.hidden) : json(nullptr);
  j["restarts"] = c.restarts;
  j["validation_fraction"] = c.validation_fraction;
  j["max_epochs"] = c.max_epochs;
  j["patience"] = c.patience;
  j["seed"] = c.seed;
  if (c.command == "online") {
    j["method"] = c.method;
    j["initial_size"] = c.initial_size;
    j["subsample"] = c.subsample;
  }
  if (c.command == "batch") {
    j["repeats"] = c.repeats;
    j["test_fraction"] = c.test_fraction;
    j["bins"] = c.bins ? json(*c.bins) : json(nullptr);
  }
  if (c.command == "predict") j["x"] = c.x;
  if (c.command != "inspect") j["taxonomy"] = c.taxonomy;
  return j;
}

template <class T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

template <class T>
void take(const json& j, const char* key, std::optional<T>& out) {
  if (!j.contains(key)) return;
  if (j.at(key).is_null())
    out.reset();
  else
    out = j.at(key).get<T>();
}

void from_json(const json& j, RunConfig& c) {
  take(j, "dataset", c.dataset);
  take(j, "header", c.header);
  take(j, "preset", c.preset);
  take(j, "method", c.method);
  take(j, "taxonomy", c.taxonomy);
  take(j, "theta", c.theta);
  take(j, "hidden", c.hidden);
  take(j, "restarts", c.restarts);
  take(j, "validation_fraction", c.validation_fraction);
  take(j, "max_epochs", c.max_epochs);
  take(j, "patience", c.patience);
  take(j, "seed", c.seed);
  take(j, "initial_size", c.initial_size);
  take(j, "subsample", c.subsample);
  take(j, "repeats", c.repeats);
  take(j, "test_fraction", c.test_fraction);
  take(j, "bins", c.bins);
  take(j, "x", c.x);
}

struct Runtime {
  std::string config_file;
  std::string out_dir = "nnvp-out";
  int jobs = nnvp::default_jobs();
  bool verbose = false;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Values given on the command line (or through NNVP_* variables) win; the
// rest come from the config file, then from built-in defaults.
void merge_config_file(const CLI::App& sub, const std::string& path, RunConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path);
  json file;
  try {
    file = json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("config file " + path + ": " + e.what());
  }
  if (file.contains("command") && file.at("command") != sub.get_name())
    throw UsageError("config file " + path + " was written by '" + file.at("command").get<std::string>() +
                     "', not '" + sub.get_name() + "'");
  json keep = to_json(cfg);
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->count() == 0) continue;
    std::string key = opt->get_single_name();
    std::replace(key.begin(), key.end(), '-', '_');
    if (keep.contains(key)) file[key] = keep[key];
  }
  try {
    from_json(file, cfg);
  } catch (const json::exception& e) {
    throw UsageError("config file " + path + ": " + e.what());
  }
}

std::string dataset_path(const RunConfig& cfg) {
  if (!cfg.dataset.empty()) return cfg.dataset;
  if (cfg.preset.empty()) throw UsageError("--dataset is required unless --preset names a bundled dataset");
  const char* root = std::getenv("NNVP_DATA_DIR");
  return (fs::path(root ? root : "data") / kPresets.at(cfg.preset).file).string();
}

void apply_preset(RunConfig& cfg) {
  if (cfg.preset.empty()) return;
  const Preset& p = kPresets.at(cfg.preset);
  if (!cfg.hidden) cfg.hidden = p.hidden;
  if (!cfg.bins) cfg.bins = p.bins;
}

std::vector<nnvp::TaxonomyRule> resolve_rules(const RunConfig& cfg, int num_classes) {
  std::vector<nnvp::TaxonomyRule> rules;
  for (const std::string& name : cfg.taxonomy) {
    if (name == "all") {
      for (nnvp::TaxonomyKind k : nnvp::kAllTaxonomies) rules.push_back(nnvp::TaxonomyRule::standard(k));
      continue;
    }
    const auto kind = nnvp::parse_taxonomy_kind(name);
    if (!kind) throw UsageError("unknown taxonomy '" + name + "' (expected v1..v5 or all)");
    rules.push_back(nnvp::TaxonomyRule::standard(*kind));
  }
  if (cfg.theta)
    for (nnvp::TaxonomyRule& r : rules)
      if (r.kind != nnvp::TaxonomyKind::V1) r.theta = *cfg.theta;
  try {
    for (const nnvp::TaxonomyRule& r : rules) r.validate(num_classes);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return rules;
}

nnvp::MLPConfig mlp_config(const RunConfig& cfg) {
  nnvp::MLPConfig m;
  m.hidden_units = cfg.hidden.value_or(5);
  m.num_restarts = cfg.restarts;
  m.validation_fraction = cfg.validation_fraction;
  m.max_epochs = cfg.max_epochs;
  m.patience = cfg.patience;
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return m;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

fs::path prepare_out_dir(const Runtime& rt, const RunConfig& cfg) {
  const fs::path dir(rt.out_dir);
  fs::create_directories(dir);
  write_json(dir / "run_config.json", to_json(cfg));
  return dir;
}

std::function<void(std::size_t, std::size_t)> progress_printer(const Runtime& rt) {
  if (!rt.verbose) return {};
  return [](std::size_t done, std::size_t total) { std::cerr << "\r" << done << "/" << total << std::flush; };
}

nnvp::Dataset load(const RunConfig& cfg) {
  nnvp::CsvSchema schema;
  schema.has_header = cfg.header;
  return nnvp::load_csv(dataset_path(cfg), schema);
}

int cmd_inspect(const RunConfig& cfg) {
  const nnvp::Dataset ds = load(cfg);
  std::cout << ds.size() << " examples, " << ds.num_attributes() << " attributes, " << ds.num_classes()
            << " classes\n";
  const auto counts = ds.class_counts();
  for (int k = 0; k < ds.num_classes(); ++k)
    std::cout << "  " << ds.class_names()[static_cast<std::size_t>(k)] << ": " << counts[static_cast<std::size_t>(k)]
              << "\n";
  return kOk;
}

int cmd_online(const RunConfig& cfg, const Runtime& rt) {
  const nnvp::Dataset ds = load(cfg);
  const nnvp::MLPConfig mlp = mlp_config(cfg);
  if (cfg.initial_size == 0 || cfg.initial_size >= ds.size())
    throw UsageError("--initial-size must lie in [1, " + std::to_string(ds.size() - 1) + "]");
  if (cfg.method != "vp" && cfg.method != "nn") throw UsageError("--method must be vp or nn");

  nnvp::OnlineOptions opt;
  opt.initial_size = cfg.initial_size;
  opt.seed = cfg.seed;
  if (cfg.subsample > 0) opt.max_steps = cfg.subsample;
  opt.jobs = rt.jobs;
  opt.progress = progress_printer(rt);

  const std::size_t stream_length = ds.size() - cfg.initial_size;
  const std::size_t steps = opt.max_steps ? std::min(stream_length, *opt.max_steps) : stream_length;
  json summary{{"dataset", fs::path(dataset_path(cfg)).stem().string()},
               {"method", cfg.method},
               {"steps", steps},
               {"stream_length", stream_length},
               {"subsampled", steps < stream_length},
               {"restarts", cfg.restarts},
               {"reduced_restarts", cfg.restarts < 3}};

  if (cfg.method == "nn") {
    const fs::path dir = prepare_out_dir(rt, cfg);
    const nnvp::BaselineCurves c = nnvp::run_online_nn(ds, mlp, opt);
    if (rt.verbose) std::cerr << "\n";
    const nnvp::PValue p = nnvp::two_sided_pvalue(c.errors.back(), c.step_error_prob);
    write_file(dir / "curves_nn.csv", nnvp::report::curves_csv(c));
    summary["E_N"] = c.errors.back();
    summary["EP_N"] = c.error_prob.back();
    summary["p_value"] = p.value;
    summary["p_value_degenerate"] = p.degenerate;
    write_json(dir / "summary.json", summary);
    std::cout << "NN: E_N=" << c.errors.back() << " EP_N=" << nnvp::report::format_number(c.error_prob.back())
              << " p=" << nnvp::report::format_number(p.value) << "\n";
    return kOk;
  }

  const auto rules = resolve_rules(cfg, ds.num_classes());
  const fs::path dir = prepare_out_dir(rt, cfg);
  const auto curves = nnvp::run_online_vp(ds, rules, mlp, opt);
  if (rt.verbose) std::cerr << "\n";
  json rows = json::array();
  for (const nnvp::VennCurves& c : curves) {
    write_file(dir / ("curves_" + c.rule.name() + ".csv"), nnvp::report::curves_csv(c));
    rows.push_back({{"taxonomy", c.rule.name()},
                    {"theta", c.rule.theta},
                    {"E_N", c.errors.back()},
                    {"LEP_N", c.lower.back()},
                    {"UEP_N", c.upper.back()},
                    {"contained", c.final_contained()}});
    std::cout << "NN-VP " << c.rule.name() << ": E_N=" << c.errors.back()
              << " LEP_N=" << nnvp::report::format_number(c.lower.back())
              << " UEP_N=" << nnvp::report::format_number(c.upper.back())
              << (c.final_contained() ? " contained" : " NOT contained") << "\n";
  }
  summary["taxonomies"] = rows;
  write_json(dir / "summary.json", summary);
  return kOk;
}

int cmd_batch(const RunConfig& cfg, const Runtime& rt) {
  const nnvp::Dataset ds = load(cfg);
  const nnvp::MLPConfig mlp = mlp_config(cfg);
  const auto rules = resolve_rules(cfg, ds.num_classes());
  const nnvp::SplitPlan plan{cfg.seed, cfg.test_fraction, cfg.repeats};
  try {
    nnvp::split_indices(ds.size(), plan, 0);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  nnvp::BatchOptions opt;
  opt.bins = cfg.bins.value_or(100);
  if (opt.bins < 1) throw UsageError("--bins must be >= 1");
  opt.seed = cfg.seed;
  opt.jobs = rt.jobs;
  opt.progress = progress_printer(rt);

  const fs::path dir = prepare_out_dir(rt, cfg);
  const nnvp::BatchReport rep = nnvp::run_batch(ds, rules, mlp, plan, opt);
  if (rt.verbose) std::cerr << "\n";
  json j = nnvp::report::to_json(rep);
  j["dataset"] = fs::path(dataset_path(cfg)).stem().string();
  j["restarts"] = cfg.restarts;
  j["reduced_restarts"] = cfg.restarts < 3;
  j["bins"] = opt.bins;
  write_json(dir / "metrics.json", j);
  const std::string table = nnvp::report::metrics_table(
      rep, fs::path(dataset_path(cfg)).stem().string() + " (" + std::to_string(rep.test_examples) +
               " pooled test examples)");
  write_file(dir / "metrics.txt", table);
  std::cout << table;
  return kOk;
}

int cmd_predict(const RunConfig& cfg, const Runtime& rt) {
  const nnvp::Dataset ds = load(cfg);
  const nnvp::MLPConfig mlp = mlp_config(cfg);
  const auto rules = resolve_rules(cfg, ds.num_classes());
  if (cfg.x.size() != ds.num_attributes())
    throw UsageError("--x needs " + std::to_string(ds.num_attributes()) + " values");
  const nnvp::CandidateOutputs cand = nnvp::train_candidates(ds, cfg.x, mlp, cfg.seed, rt.jobs);
  const auto results = nnvp::predict_all(cand, rules);
  json out = json::array();
  for (std::size_t r = 0; r < rules.size(); ++r) {
    json one = nnvp::report::to_json(results[r], ds.class_names());
    one["taxonomy"] = rules[r].name();
    out.push_back(one);
  }
  std::cout << out.dump(2) << "\n";
  return kOk;
}

void add_common(CLI::App* sub, RunConfig& cfg, Runtime& rt) {
  sub->add_option("--config", rt.config_file, "Rerun from a run_config.json; explicit flags override it")
      ->check(CLI::ExistingFile);
  sub->add_option("--dataset", cfg.dataset, "CSV file: attribute columns then the class label")
      ->envname("NNVP_DATASET");
  sub->add_flag("--header", cfg.header, "First CSV row is a header");
  sub->add_option("--preset", cfg.preset, "Bundled dataset: hidden units, REL bins and default file")
      ->check(CLI::IsMember({"tae", "glass", "ecoli", "vehicle"}));
}

void add_training(CLI::App* sub, RunConfig& cfg, Runtime& rt) {
  sub->add_option("--hidden", cfg.hidden, "Hidden units")->check(CLI::PositiveNumber);
  sub->add_option("--restarts", cfg.restarts, "Random restarts per training")
      ->envname("NNVP_RESTARTS")
      ->check(CLI::PositiveNumber);
  sub->add_option("--validation-fraction", cfg.validation_fraction, "Held-out share for early stopping");
  sub->add_option("--max-epochs", cfg.max_epochs, "Epoch cap per restart")->envname("NNVP_MAX_EPOCHS");
  sub->add_option("--patience", cfg.patience, "Epochs without validation improvement before stopping");
  sub->add_option("--seed", cfg.seed, "Root seed for every random choice")->envname("NNVP_SEED");
  sub->add_option("--jobs", rt.jobs, "Worker threads (results do not depend on this)")
      ->envname("NNVP_JOBS")
      ->check(CLI::PositiveNumber);
  sub->add_option("--out-dir", rt.out_dir, "Directory for output files")->envname("NNVP_OUT_DIR");
  sub->add_flag("--verbose", rt.verbose, "Progress on stderr");
}

void add_taxonomy(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--taxonomy", cfg.taxonomy, "v1..v5, repeatable, or 'all'")->delimiter(',');
  sub->add_option("--theta", cfg.theta, "Threshold for V2-V5 (defaults 0.75, 0.25, 0.5, 0.25)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Venn prediction with a neural-network underlying algorithm"};
  app.require_subcommand(1);
  RunConfig cfg;
  Runtime rt;

  CLI::App* inspect = app.add_subcommand("inspect", "Summarize a dataset file");
  add_common(inspect, cfg, rt);

  CLI::App* online = app.add_subcommand("online", "On-line protocol: cumulative error curves");
  add_common(online, cfg, rt);
  add_training(online, cfg, rt);
  add_taxonomy(online, cfg);
  online->add_option("--method", cfg.method, "vp (Venn predictor) or nn (plain network)")
      ->check(CLI::IsMember({"vp", "nn"}));
  online->add_option("--initial-size", cfg.initial_size, "Examples known before the first prediction");
  online->add_option("--subsample", cfg.subsample, "Predict only the first N stream examples (0: all)")
      ->envname("NNVP_SUBSAMPLE");

  CLI::App* batch = app.add_subcommand("batch", "Repeated random splits: accuracy, CE, Brier, REL");
  add_common(batch, cfg, rt);
  add_training(batch, cfg, rt);
  add_taxonomy(batch, cfg);
  batch->add_option("--repeats", cfg.repeats, "Number of random splits")->check(CLI::PositiveNumber);
  batch->add_option("--test-fraction", cfg.test_fraction, "Test share of each split");
  batch->add_option("--bins", cfg.bins, "Reliability bins");

  CLI::App* predict = app.add_subcommand("predict", "Probability intervals for a single new example");
  add_common(predict, cfg, rt);
  add_training(predict, cfg, rt);
  add_taxonomy(predict, cfg);
  predict->add_option("--x", cfg.x, "Attribute values of the new example")->delimiter(',')->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  cfg.command = sub->get_name();
  try {
    if (!rt.config_file.empty()) merge_config_file(*sub, rt.config_file, cfg);
    apply_preset(cfg);
    if (cfg.command == "inspect") return cmd_inspect(cfg);
    if (cfg.command == "online") return cmd_online(cfg, rt);
    if (cfg.command == "batch") return cmd_batch(cfg, rt);
    return cmd_predict(cfg, rt);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const nnvp::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const nnvp::TrainingError& e) {
    std::cerr << "training failed: " << e.what() << "\n";
    return kTraining;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
}
