#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "coxplain/dataio.hpp"
#include "coxplain/intershap.hpp"
#include "coxplain/json_writer.hpp"
#include "coxplain/models.hpp"
#include "coxplain/parallel.hpp"
#include "coxplain/stats.hpp"
#include "coxplain/survival.hpp"
#include "coxplain/synthbench.hpp"

namespace fs = std::filesystem;
using namespace coxplain;

namespace {

void ensure_out_dir(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) {
    throw std::runtime_error("cannot create output directory '" + out +
                             "': " + ec.message());
  }
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

// ---------------------------------------------------------------------------
// synth

struct SynthOpts {
  std::string pattern;
  std::size_t n = 2000;
  std::size_t dims = 16;
  double beta = 2.0;
  double sigma = 0.3;
  double event_fraction = 0.65;
  std::uint64_t seed = 42;
  int threads = 0;
  std::string out;
};

int run_synth(const SynthOpts& o) {
  SynthSpec spec;
  spec.pattern = synth_pattern_from_string(o.pattern);
  spec.n = o.n;
  spec.dims = o.dims;
  spec.beta = o.beta;
  spec.sigma = o.sigma;
  spec.event_fraction = o.event_fraction;
  spec.seed = o.seed;
  spec.validate();

  SynthResult result = generate(spec);
  ensure_out_dir(o.out);
  save_dataset(result.dataset, o.out);

  JsonWriter w;
  w.begin_object();
  w.kv("command", "synth");
  w.kv("pattern", synth_pattern_to_string(spec.pattern));
  w.kv("n", spec.n);
  w.kv("dims", spec.dims);
  w.kv("beta", spec.beta);
  w.kv("sigma", spec.sigma);
  w.kv("event_fraction", spec.event_fraction);
  w.kv("seed", spec.seed);
  w.kv("threads", o.threads);
  w.kv("out", o.out);
  w.key("achieved").begin_object();
  w.kv("event_fraction", result.achieved_event_fraction);
  w.kv("censoring_rate", result.censoring_rate);
  w.end_object();
  w.key("ground_truth").begin_object();
  w.kv("target", result.truth.target);
  w.kv("expected_low", result.truth.expected_low);
  w.kv("expected_high", result.truth.expected_high);
  w.end_object();
  w.end_object();
  write_text_file(o.out + "/config.json", w.str());

  std::cout << "wrote " << o.out << ": n=" << spec.n
            << ", achieved event fraction "
            << fixed(result.achieved_event_fraction, 4) << " (target "
            << fixed(spec.event_fraction, 4) << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainOpts {
  std::string data;
  std::string arch;
  std::string preset = "desk";
  std::vector<std::size_t> hidden_dims;
  double dropout = -1.0;  // <0 = keep preset value
  std::uint64_t seed = 42;
  int threads = 0;
  std::string out;
  double lr = 1e-4;
  double weight_decay = 1e-5;
  std::size_t batch_size = 0;
  int patience = 20;
  int max_epochs = 500;
  double val_fraction = 0.2;
  double test_fraction = 0.2;
  double brier_months = 36.0;
};

int run_train(const TrainOpts& o) {
  ArchKind kind = arch_kind_from_string(o.arch);
  ArchitectureSpec spec;
  if (o.preset == "desk") {
    spec = ArchitectureSpec::desk(kind);
  } else if (o.preset == "paper") {
    spec = ArchitectureSpec::paper(kind);
  } else {
    throw std::invalid_argument("unknown preset '" + o.preset +
                                "' (expected desk or paper)");
  }
  if (!(o.val_fraction > 0.0 && o.val_fraction < 1.0) ||
      !(o.test_fraction > 0.0 && o.test_fraction < 1.0)) {
    throw std::invalid_argument(
        "--val-fraction and --test-fraction must lie in (0, 1)");
  }

  if (!o.hidden_dims.empty()) spec.hidden_dims = o.hidden_dims;
  if (o.dropout >= 0.0) spec.dropout = o.dropout;

  MultimodalDataset dataset = load_dataset(o.data);
  if (dataset.n_modalities() != 2) {
    throw std::invalid_argument(
        "training expects exactly two modalities, dataset has " +
        std::to_string(dataset.n_modalities()));
  }
  spec.embed_dim_a = dataset.modalities[0].cols();
  spec.embed_dim_b = dataset.modalities[1].cols();
  spec.validate();

  SplitSpec outer_spec;
  outer_spec.test_fraction = o.test_fraction;
  outer_spec.seed = o.seed;
  SplitResult outer = make_split(dataset, outer_spec);

  MultimodalDataset pool = dataset.subset(outer.train_indices);
  SplitSpec inner_spec;
  inner_spec.test_fraction = o.val_fraction;
  inner_spec.seed = o.seed + 1;
  SplitResult inner = make_split(pool, inner_spec);

  TrainHyperparams hyper;
  hyper.lr = o.lr;
  hyper.weight_decay = o.weight_decay;
  hyper.batch_size = o.batch_size;
  hyper.patience = o.patience;
  hyper.max_epochs = o.max_epochs;

  TrainedModel model =
      train(spec, pool, inner.train_indices, inner.test_indices, hyper, o.seed);
  ensure_out_dir(o.out);
  save_model(model, o.out);

  MultimodalDataset train_ds = pool.subset(inner.train_indices);
  MultimodalDataset val_ds = pool.subset(inner.test_indices);
  MultimodalDataset test_ds = dataset.subset(outer.test_indices);
  auto scores_of = [&](const MultimodalDataset& d) {
    return predict(model, d.modalities[0], d.modalities[1]);
  };
  std::vector<double> train_scores = scores_of(train_ds);
  std::vector<double> val_scores = scores_of(val_ds);
  std::vector<double> test_scores = scores_of(test_ds);

  double c_train = concordance_index(train_scores, train_ds.outcomes);
  double c_val = concordance_index(val_scores, val_ds.outcomes);
  double c_test = concordance_index(test_scores, test_ds.outcomes);
  BaselineSurvival baseline = breslow_baseline(train_scores, train_ds.outcomes);
  BrierResult brier =
      brier_score(test_scores, test_ds.outcomes, baseline, o.brier_months);
  BrierResult ibs =
      integrated_brier(test_scores, test_ds.outcomes, baseline, o.brier_months);

  JsonWriter mw;
  mw.begin_object();
  mw.kv("format", "coxplain-metrics");
  mw.kv("version", 1);
  mw.kv("architecture", arch_kind_to_string(kind));
  mw.kv("preset", o.preset);
  mw.kv("seed", o.seed);
  mw.kv("parameter_count", parameter_count(model.spec));
  mw.kv("epochs_run", model.epochs_run);
  mw.kv("best_val_cindex", model.best_val_cindex);
  mw.kv("n_train", train_ds.n_patients());
  mw.kv("n_val", val_ds.n_patients());
  mw.kv("n_test", test_ds.n_patients());
  mw.key("c_index").begin_object();
  mw.kv("train", c_train);
  mw.kv("val", c_val);
  mw.kv("test", c_test);
  mw.end_object();
  mw.key("brier").begin_object();
  mw.kv("months", o.brier_months);
  mw.kv("value", brier.value);
  mw.kv("dropped", brier.dropped);
  mw.end_object();
  mw.key("integrated_brier").begin_object();
  mw.kv("tau_months", o.brier_months);
  mw.kv("value", ibs.value);
  mw.kv("dropped", ibs.dropped);
  mw.end_object();
  mw.end_object();
  write_text_file(o.out + "/metrics.json", mw.str());

  JsonWriter w;
  w.begin_object();
  w.kv("command", "train");
  w.kv("data", o.data);
  w.kv("arch", arch_kind_to_string(kind));
  w.kv("preset", o.preset);
  w.kv("seed", o.seed);
  w.kv("threads", o.threads);
  w.kv("out", o.out);
  w.key("architecture").begin_object();
  w.kv("embed_dim_a", model.spec.embed_dim_a);
  w.kv("embed_dim_b", model.spec.embed_dim_b);
  w.key("hidden_dims").begin_array();
  for (std::size_t h : model.spec.hidden_dims) w.value(h);
  w.end_array();
  w.kv("dropout", model.spec.dropout);
  w.kv("bilinear_rank", model.spec.bilinear_rank);
  w.kv("attention_dim", model.spec.attention_dim);
  w.kv("branch_dim", model.spec.branch_dim);
  w.kv("head_hidden", model.spec.head_hidden);
  w.end_object();
  w.key("hyperparams").begin_object();
  w.kv("lr", hyper.lr);
  w.kv("weight_decay", hyper.weight_decay);
  w.kv("batch_size", model.hyper.batch_size);
  w.kv("patience", hyper.patience);
  w.kv("max_epochs", hyper.max_epochs);
  w.end_object();
  w.kv("val_fraction", o.val_fraction);
  w.kv("test_fraction", o.test_fraction);
  w.kv("brier_months", o.brier_months);
  w.end_object();
  write_text_file(o.out + "/config.json", w.str());

  std::cout << arch_kind_to_string(kind) << ": " << model.epochs_run
            << " epochs, C-index train " << fixed(c_train, 3) << " / val "
            << fixed(c_val, 3) << " / test " << fixed(c_test, 3)
            << ", Brier@" << fixed(o.brier_months, 0) << "m "
            << fixed(brier.value, 4) << ", IBS " << fixed(ibs.value, 4)
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// audit

struct AuditOpts {
  std::string model;
  std::string data;
  std::string masking = "mean";
  int replicates = 8;
  std::string convention = "moebius";
  std::uint64_t seed = 42;
  int threads = 0;
  std::string out;
};

int run_audit(const AuditOpts& o) {
  MaskingStrategy masking;
  masking.kind = masking_kind_from_string(o.masking);
  masking.shuffle_replicates = o.replicates;
  masking.seed = o.seed;
  if (o.replicates < 1) {
    throw std::invalid_argument("--replicates must be >= 1");
  }
  Convention convention = convention_from_string(o.convention);

  TrainedModel model = load_model(o.model);
  MultimodalDataset dataset = load_dataset(o.data);
  int threads = resolve_threads(o.threads);
  AuditReport report =
      audit(model, dataset, masking, convention, threads, o.model, o.data);

  ensure_out_dir(o.out);
  write_text_file(o.out + "/report.json", report_to_json(report));
  write_text_file(o.out + "/per_patient.csv", report_to_csv(report));

  JsonWriter w;
  w.begin_object();
  w.kv("command", "audit");
  w.kv("model", o.model);
  w.kv("data", o.data);
  w.key("masking").begin_object();
  w.kv("kind", masking_kind_to_string(masking.kind));
  w.kv("shuffle_replicates", masking.shuffle_replicates);
  w.kv("seed", masking.seed);
  w.end_object();
  w.kv("convention", convention_to_string(convention));
  w.kv("seed", o.seed);
  w.kv("threads", o.threads);
  w.kv("out", o.out);
  w.end_object();
  write_text_file(o.out + "/config.json", w.str());

  std::cout << "global interaction "
            << fixed(report.global.interaction_percent, 4) << "% ("
            << convention_to_string(convention) << ", "
            << masking_kind_to_string(masking.kind) << "), "
            << report.global.degenerate_count << "/" << dataset.n_patients()
            << " degenerate patients\n";
  return 0;
}

// ---------------------------------------------------------------------------
// validate

struct ValidateOpts {
  std::size_t n = 2000;
  std::size_t dims = 16;
  double beta = 2.0;
  double sigma = 0.3;
  double event_fraction = 0.65;
  std::uint64_t seed = 42;
  int threads = 0;
  std::string only;
  std::string out;
  TrainHyperparams hyper;
};

int run_validate(const ValidateOpts& o) {
  ValidationConfig cfg;
  cfg.n = o.n;
  cfg.dims = o.dims;
  cfg.beta = o.beta;
  cfg.sigma = o.sigma;
  cfg.event_fraction = o.event_fraction;
  cfg.seed = o.seed;
  cfg.threads = resolve_threads(o.threads);
  cfg.only = o.only;
  cfg.hyper = o.hyper;

  SuiteReport report = run_validation_suite(cfg);
  std::string text = suite_report_to_text(report);

  ensure_out_dir(o.out);
  write_text_file(o.out + "/suite.json", suite_report_to_json(report));
  write_text_file(o.out + "/suite.txt", text);

  JsonWriter w;
  w.begin_object();
  w.kv("command", "validate");
  w.kv("n", cfg.n);
  w.kv("dims", cfg.dims);
  w.kv("beta", cfg.beta);
  w.kv("sigma", cfg.sigma);
  w.kv("event_fraction", cfg.event_fraction);
  w.kv("seed", cfg.seed);
  w.kv("threads", o.threads);
  w.kv("only", cfg.only);
  w.key("hyperparams").begin_object();
  w.kv("lr", cfg.hyper.lr);
  w.kv("weight_decay", cfg.hyper.weight_decay);
  w.kv("batch_size", cfg.hyper.batch_size);
  w.kv("patience", cfg.hyper.patience);
  w.kv("max_epochs", cfg.hyper.max_epochs);
  w.end_object();
  w.kv("out", o.out);
  w.end_object();
  write_text_file(o.out + "/config.json", w.str());

  std::cout << text;
  return report.all_passed ? 0 : 1;
}

// ---------------------------------------------------------------------------
// compare

struct CompareOpts {
  std::vector<std::string> reports;
  std::vector<std::string> metrics;
  std::string baseline;
  int iterations = 1000;
  std::uint64_t seed = 42;
  int threads = 0;
  std::string out;
};

std::pair<std::string, std::string> split_name_path(const std::string& s,
                                                    const char* flag) {
  auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == s.size()) {
    throw std::invalid_argument(std::string(flag) + " expects name=path, got '" +
                                s + "'");
  }
  return {s.substr(0, eq), s.substr(eq + 1)};
}

struct LoadedReport {
  std::string name;
  std::string path;
  std::string convention;
  std::string masking;
  double interaction_percent = 0.0;
  std::vector<std::string> patient_ids;
  std::vector<PatientShare> shares;
  bool has_c_index = false;
  double c_index = 0.0;
  bool is_baseline = false;
  BootstrapResult delta;
};

LoadedReport load_report(const std::string& name, const std::string& path) {
  nlohmann::json j = nlohmann::json::parse(read_text_file(path));
  if (!j.is_object() || j.value("format", std::string()) != "coxplain-audit") {
    throw std::invalid_argument("not an audit report: " + path);
  }
  LoadedReport r;
  r.name = name;
  r.path = path;
  const auto& meta = j.at("metadata");
  r.convention = meta.at("convention").get<std::string>();
  r.masking = meta.at("masking").at("kind").get<std::string>();
  r.interaction_percent = j.at("global").at("interaction_percent").get<double>();
  for (const auto& p : j.at("per_patient")) {
    r.patient_ids.push_back(p.at("patient_id").get<std::string>());
    PatientShare s;
    for (const auto& [k, v] : p.at("mains").items()) {
      (void)k;
      s.denominator += std::abs(v.get<double>());
    }
    for (const auto& [k, v] : p.at("interactions").items()) {
      (void)k;
      double a = std::abs(v.get<double>());
      s.numerator += a;
      s.denominator += a;
    }
    r.shares.push_back(s);
  }
  if (r.shares.empty()) {
    throw std::invalid_argument("audit report has no patients: " + path);
  }
  return r;
}

int run_compare(const CompareOpts& o) {
  if (o.reports.size() < 2) {
    throw std::invalid_argument("compare needs at least two --report entries");
  }
  std::vector<LoadedReport> reports;
  std::set<std::string> seen;
  for (const auto& spec : o.reports) {
    auto [name, path] = split_name_path(spec, "--report");
    if (!seen.insert(name).second) {
      throw std::invalid_argument("duplicate report name '" + name + "'");
    }
    reports.push_back(load_report(name, path));
  }

  for (const auto& spec : o.metrics) {
    auto [name, path] = split_name_path(spec, "--metrics");
    auto it = std::find_if(reports.begin(), reports.end(),
                           [&](const LoadedReport& r) { return r.name == name; });
    if (it == reports.end()) {
      throw std::invalid_argument("--metrics name '" + name +
                                  "' matches no --report entry");
    }
    nlohmann::json j = nlohmann::json::parse(read_text_file(path));
    if (!j.is_object() ||
        j.value("format", std::string()) != "coxplain-metrics") {
      throw std::invalid_argument("not a metrics file: " + path);
    }
    it->c_index = j.at("c_index").at("test").get<double>();
    it->has_c_index = true;
  }

  std::string baseline_name =
      o.baseline.empty() ? reports.front().name : o.baseline;
  auto base_it = std::find_if(
      reports.begin(), reports.end(),
      [&](const LoadedReport& r) { return r.name == baseline_name; });
  if (base_it == reports.end()) {
    throw std::invalid_argument("baseline '" + baseline_name +
                                "' matches no --report entry");
  }
  base_it->is_baseline = true;
  const LoadedReport& base = *base_it;

  for (const auto& r : reports) {
    if (r.patient_ids != base.patient_ids) {
      throw std::invalid_argument(
          "patient sets differ between '" + base.name + "' and '" + r.name +
          "'; the paired bootstrap needs identical patients in the same order");
    }
  }

  int threads = resolve_threads(o.threads);
  for (auto& r : reports) {
    if (r.is_baseline) continue;
    r.delta = bootstrap_diff(r.shares, base.shares, o.iterations, o.seed,
                             threads);
  }

  std::vector<double> sp_c, sp_i;
  for (const auto& r : reports) {
    if (!r.has_c_index) continue;
    sp_c.push_back(r.c_index);
    sp_i.push_back(r.interaction_percent);
  }
  bool has_spearman = false;
  double rho = 0.0;
  if (sp_c.size() >= 3) {
    try {
      rho = spearman(sp_c, sp_i);
      has_spearman = true;
    } catch (const std::invalid_argument& e) {
      std::cerr << "note: spearman skipped: " << e.what() << "\n";
    }
  }

  JsonWriter w;
  w.begin_object();
  w.kv("format", "coxplain-compare");
  w.kv("version", 1);
  w.kv("baseline", baseline_name);
  w.kv("iterations", o.iterations);
  w.kv("seed", o.seed);
  w.key("models").begin_array();
  for (const auto& r : reports) {
    w.begin_object();
    w.kv("name", r.name);
    w.kv("report", r.path);
    w.kv("convention", r.convention);
    w.kv("masking", r.masking);
    w.kv("n_patients", r.patient_ids.size());
    w.kv("interaction_percent", r.interaction_percent);
    w.key("c_index_test");
    if (r.has_c_index) {
      w.value(r.c_index);
    } else {
      w.null();
    }
    w.key("delta_vs_baseline");
    if (r.is_baseline) {
      w.null();
    } else {
      w.begin_object();
      w.kv("estimate", r.delta.estimate);
      w.kv("ci_low", r.delta.ci_low);
      w.kv("ci_high", r.delta.ci_high);
      w.kv("p_value", r.delta.p_value);
      w.end_object();
    }
    w.end_object();
  }
  w.end_array();
  w.key("spearman_c_index_vs_interaction");
  if (has_spearman) {
    w.value(rho);
  } else {
    w.null();
  }
  w.end_object();

  std::string table;
  {
    std::string delta_hdr = "delta vs " + baseline_name;
    char line[256];
    std::snprintf(line, sizeof(line), "%-16s %8s %11s  %-30s %8s\n", "model",
                  "C-index", "InterSHAP%", delta_hdr.c_str(), "p");
    table += line;
    for (const auto& r : reports) {
      std::string c = r.has_c_index ? fixed(r.c_index, 3) : "-";
      std::string delta, p;
      if (r.is_baseline) {
        delta = "baseline";
        p = "-";
      } else {
        delta = fixed(r.delta.estimate, 3) + " [" + fixed(r.delta.ci_low, 3) +
                ", " + fixed(r.delta.ci_high, 3) + "]";
        p = fixed(r.delta.p_value, 4);
      }
      std::snprintf(line, sizeof(line), "%-16s %8s %11s  %-30s %8s\n",
                    r.name.c_str(), c.c_str(),
                    fixed(r.interaction_percent, 3).c_str(), delta.c_str(),
                    p.c_str());
      table += line;
    }
    table += "spearman(C-index, InterSHAP%) = ";
    table += has_spearman ? fixed(rho, 4) : std::string("n/a");
    table += "\n";
  }

  ensure_out_dir(o.out);
  write_text_file(o.out + "/compare.json", w.str());
  write_text_file(o.out + "/compare.txt", table);

  JsonWriter cw;
  cw.begin_object();
  cw.kv("command", "compare");
  cw.key("reports").begin_array();
  for (const auto& r : reports) {
    cw.begin_object();
    cw.kv("name", r.name);
    cw.kv("path", r.path);
    cw.end_object();
  }
  cw.end_array();
  cw.key("metrics").begin_array();
  for (const auto& spec : o.metrics) {
    auto [name, path] = split_name_path(spec, "--metrics");
    cw.begin_object();
    cw.kv("name", name);
    cw.kv("path", path);
    cw.end_object();
  }
  cw.end_array();
  cw.kv("baseline", baseline_name);
  cw.kv("iterations", o.iterations);
  cw.kv("seed", o.seed);
  cw.kv("threads", o.threads);
  cw.kv("out", o.out);
  cw.end_object();
  write_text_file(o.out + "/config.json", cw.str());

  std::cout << table;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "coxplain: small multimodal Cox survival models with Shapley "
      "interaction audits"};
  app.require_subcommand(1);

  SynthOpts so;
  TrainOpts tr;
  AuditOpts au;
  ValidateOpts va;
  CompareOpts cm;

  CLI::App* synth = app.add_subcommand(
      "synth", "Generate a synthetic benchmark dataset with known interaction "
               "structure");
  synth->add_option("--pattern", so.pattern,
                    "uniqueness | xor | redundancy")->required();
  synth->add_option("--n", so.n, "number of patients (>= 50)")
      ->capture_default_str();
  synth->add_option("--dims", so.dims, "embedding dims per modality")
      ->capture_default_str();
  synth->add_option("--beta", so.beta, "risk effect size")
      ->capture_default_str();
  synth->add_option("--sigma", so.sigma, "redundancy noise scale")
      ->capture_default_str();
  synth->add_option("--event-fraction", so.event_fraction,
                    "target observed-event fraction")
      ->capture_default_str();
  synth->add_option("--seed", so.seed, "RNG seed")->capture_default_str();
  synth->add_option("--threads", so.threads, "worker threads (0 = auto)")
      ->capture_default_str();
  synth->add_option("--out", so.out, "output dataset directory")->required();

  CLI::App* train_cmd = app.add_subcommand(
      "train", "Train a survival model on a dataset directory");
  train_cmd->add_option("--data", tr.data, "dataset directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  train_cmd
      ->add_option("--arch", tr.arch,
                   "early-mlp | cross-attention | bilinear | gated | "
                   "unimodal-a | unimodal-b | late-linear")
      ->required();
  train_cmd->add_option("--preset", tr.preset, "desk | paper")
      ->capture_default_str();
  train_cmd->add_option("--hidden-dims", tr.hidden_dims,
                        "early-mlp trunk widths (overrides preset)")
      ->delimiter(',');
  train_cmd->add_option("--dropout", tr.dropout,
                        "dropout rate (overrides preset)");
  train_cmd->add_option("--seed", tr.seed, "RNG seed")->capture_default_str();
  train_cmd->add_option("--threads", tr.threads, "worker threads (0 = auto)")
      ->capture_default_str();
  train_cmd->add_option("--out", tr.out, "checkpoint directory")->required();
  train_cmd->add_option("--lr", tr.lr, "Adam learning rate")
      ->capture_default_str();
  train_cmd->add_option("--weight-decay", tr.weight_decay, "decoupled decay")
      ->capture_default_str();
  train_cmd->add_option("--batch-size", tr.batch_size, "0 = auto")
      ->capture_default_str();
  train_cmd->add_option("--patience", tr.patience, "early-stopping patience")
      ->capture_default_str();
  train_cmd->add_option("--max-epochs", tr.max_epochs, "epoch cap")
      ->capture_default_str();
  train_cmd
      ->add_option("--val-fraction", tr.val_fraction,
                   "validation share of the training pool")
      ->capture_default_str();
  train_cmd->add_option("--test-fraction", tr.test_fraction, "held-out share")
      ->capture_default_str();
  train_cmd->add_option("--brier-months", tr.brier_months, "Brier horizon")
      ->capture_default_str();

  CLI::App* audit_cmd = app.add_subcommand(
      "audit", "Audit a trained checkpoint with Shapley interaction values");
  audit_cmd->add_option("--model", au.model, "checkpoint directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  audit_cmd->add_option("--data", au.data, "dataset directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  audit_cmd->add_option("--masking", au.masking, "mean | shuffle | zero")
      ->capture_default_str();
  audit_cmd->add_option("--replicates", au.replicates, "shuffle replicates")
      ->capture_default_str();
  audit_cmd->add_option("--convention", au.convention, "moebius | paper-eqs")
      ->capture_default_str();
  audit_cmd->add_option("--seed", au.seed, "RNG seed")->capture_default_str();
  audit_cmd->add_option("--threads", au.threads, "worker threads (0 = auto)")
      ->capture_default_str();
  audit_cmd->add_option("--out", au.out, "report directory")->required();

  CLI::App* validate_cmd = app.add_subcommand(
      "validate", "Run the synthetic validation suite with known ground truth");
  validate_cmd->add_option("--n", va.n, "patients per pattern")
      ->capture_default_str();
  validate_cmd->add_option("--dims", va.dims, "embedding dims per modality")
      ->capture_default_str();
  validate_cmd->add_option("--beta", va.beta, "risk effect size")
      ->capture_default_str();
  validate_cmd->add_option("--sigma", va.sigma, "redundancy noise scale")
      ->capture_default_str();
  validate_cmd
      ->add_option("--event-fraction", va.event_fraction,
                   "target observed-event fraction")
      ->capture_default_str();
  validate_cmd->add_option("--seed", va.seed, "RNG seed")
      ->capture_default_str();
  validate_cmd->add_option("--threads", va.threads, "worker threads (0 = auto)")
      ->capture_default_str();
  validate_cmd->add_option("--only", va.only,
                           "run only checks whose name contains this text");
  validate_cmd->add_option("--out", va.out, "report directory")->required();
  validate_cmd->add_option("--lr", va.hyper.lr, "Adam learning rate")
      ->capture_default_str();
  validate_cmd->add_option("--max-epochs", va.hyper.max_epochs, "epoch cap")
      ->capture_default_str();
  validate_cmd
      ->add_option("--patience", va.hyper.patience, "early-stopping patience")
      ->capture_default_str();

  CLI::App* compare_cmd = app.add_subcommand(
      "compare", "Compare audit reports with a paired bootstrap");
  compare_cmd
      ->add_option("--report", cm.reports,
                   "name=path to an audit report.json (repeat, >= 2)")
      ->required();
  compare_cmd->add_option("--metrics", cm.metrics,
                          "name=path to a metrics.json (optional)");
  compare_cmd->add_option("--baseline", cm.baseline,
                          "report name to diff against (default: first)");
  compare_cmd->add_option("--iterations", cm.iterations, "bootstrap resamples")
      ->capture_default_str();
  compare_cmd->add_option("--seed", cm.seed, "RNG seed")
      ->capture_default_str();
  compare_cmd->add_option("--threads", cm.threads, "worker threads (0 = auto)")
      ->capture_default_str();
  compare_cmd->add_option("--out", cm.out, "report directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) return run_synth(so);
    if (train_cmd->parsed()) return run_train(tr);
    if (audit_cmd->parsed()) return run_audit(au);
    if (validate_cmd->parsed()) return run_validate(va);
    if (compare_cmd->parsed()) return run_compare(cm);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
