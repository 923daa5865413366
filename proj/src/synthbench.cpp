#include "coxplain/synthbench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "coxplain/json_writer.hpp"
#include "coxplain/rng.hpp"
#include "coxplain/survival.hpp"

namespace coxplain {

namespace {

constexpr std::uint64_t kStreamFeatures = 0x51;
constexpr std::uint64_t kStreamLatent = 0x52;
constexpr std::uint64_t kStreamEventTime = 0x53;
constexpr std::uint64_t kStreamCensorTime = 0x54;
constexpr std::uint64_t kStreamCvFold = 0x55;
constexpr double kBaselineHazard = 0.02;  // per month; median ~35mo at r=0

}  // namespace

SynthPattern synth_pattern_from_string(std::string_view s) {
  if (s == "uniqueness") return SynthPattern::Uniqueness;
  if (s == "xor" || s == "xor-synergy") return SynthPattern::XorSynergy;
  if (s == "redundancy") return SynthPattern::Redundancy;
  throw std::invalid_argument("unknown pattern '" + std::string(s) +
                              "' (expected uniqueness, xor, or redundancy)");
}

std::string synth_pattern_to_string(SynthPattern p) {
  switch (p) {
    case SynthPattern::Uniqueness: return "uniqueness";
    case SynthPattern::XorSynergy: return "xor-synergy";
    case SynthPattern::Redundancy: return "redundancy";
  }
  throw std::logic_error("unreachable");
}

void SynthSpec::validate() const {
  if (n < 50) throw std::invalid_argument("synthetic n must be >= 50");
  if (dims == 0) throw std::invalid_argument("dims must be positive");
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be > 0");
  if (!(event_fraction > 0.1 && event_fraction < 0.95)) {
    throw std::invalid_argument("event fraction must lie in (0.1, 0.95)");
  }
  if (sigma < 0.0) throw std::invalid_argument("sigma must be >= 0");
}

SynthResult generate(const SynthSpec& spec) {
  spec.validate();
  std::size_t n = spec.n;

  Matrix a(n, spec.dims);
  Matrix b(n, spec.dims);
  RngStream feat = RngStream::derive(spec.seed, {kStreamFeatures});
  for (double& v : a.data()) v = feat.next_gaussian();
  for (double& v : b.data()) v = feat.next_gaussian();

  std::vector<double> risk(n, 0.0);
  GroundTruth truth;
  truth.pattern = synth_pattern_to_string(spec.pattern);
  switch (spec.pattern) {
    case SynthPattern::Uniqueness:
      for (std::size_t i = 0; i < n; ++i) risk[i] = spec.beta * a(i, 0);
      truth.target = "interaction-share";
      truth.expected_low = 0.0;
      truth.expected_high = 2.0;
      break;
    case SynthPattern::XorSynergy:
      // Centered at +-beta so the empty coalition sits between classes.
      for (std::size_t i = 0; i < n; ++i) {
        bool xa = a(i, 0) > 0.0;
        bool xb = b(i, 0) > 0.0;
        risk[i] = spec.beta * (xa != xb ? 1.0 : -1.0);
      }
      truth.target = "interaction-share";
      truth.expected_low = 90.0;
      truth.expected_high = 100.0;
      break;
    case SynthPattern::Redundancy: {
      // The shared latent makes E[z | a, b] linear in a0 + b0, so the ideal
      // model is additive and the range below refers to each modality's
      // contribution share, not the interaction share.
      RngStream latent = RngStream::derive(spec.seed, {kStreamLatent});
      for (std::size_t i = 0; i < n; ++i) {
        double z = latent.next_gaussian();
        a(i, 0) = z + spec.sigma * latent.next_gaussian();
        b(i, 0) = z + spec.sigma * latent.next_gaussian();
        risk[i] = spec.beta * z;
      }
      truth.target = "per-modality-contribution";
      truth.expected_low = 25.0;
      truth.expected_high = 55.0;
      break;
    }
  }

  // Event times ~ Exponential(lambda0 * exp(r)); the censoring uniforms are
  // drawn once so the realized event fraction is monotone in the censoring
  // rate and bisection is well-posed.
  std::vector<double> event_time(n), censor_u(n);
  RngStream timer = RngStream::derive(spec.seed, {kStreamEventTime});
  RngStream censor = RngStream::derive(spec.seed, {kStreamCensorTime});
  for (std::size_t i = 0; i < n; ++i) {
    double rate = kBaselineHazard * std::exp(risk[i]);
    event_time[i] =
        std::max(-std::log(timer.next_uniform_positive()) / rate, 1e-9);
    censor_u[i] = censor.next_uniform_positive();
  }

  auto realized_fraction = [&](double c) {
    std::size_t events = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double censor_time = -std::log(censor_u[i]) / c;
      if (event_time[i] <= censor_time) ++events;
    }
    return static_cast<double>(events) / static_cast<double>(n);
  };

  double lo = 1e-9, hi = 10.0;
  while (realized_fraction(hi) > spec.event_fraction && hi < 1e8) hi *= 10.0;
  double best_c = lo;
  double best_gap = std::fabs(realized_fraction(lo) - spec.event_fraction);
  for (int iter = 0; iter < 200; ++iter) {
    double mid = std::sqrt(lo * hi);  // geometric: rates span many decades
    double f = realized_fraction(mid);
    double gap = std::fabs(f - spec.event_fraction);
    if (gap < best_gap) {
      best_gap = gap;
      best_c = mid;
    }
    if (f > spec.event_fraction) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  if (best_gap > 0.02) {
    throw std::runtime_error(
        "censoring bisection missed the target event fraction " +
        format_double(spec.event_fraction) + "; closest achieved " +
        format_double(spec.event_fraction + best_gap) + " / " +
        format_double(realized_fraction(best_c)));
  }

  SynthResult result;
  result.censoring_rate = best_c;
  result.true_log_risk = risk;
  result.truth = truth;

  MultimodalDataset& ds = result.dataset;
  ds.modality_names = {"modA", "modB"};
  ds.modalities = {std::move(a), std::move(b)};
  ds.source = "synthetic:" + truth.pattern;
  ds.seed = spec.seed;
  ds.has_seed = true;
  ds.outcomes.resize(n);
  std::size_t events = 0;
  char id[32];
  for (std::size_t i = 0; i < n; ++i) {
    double censor_time =
        std::max(-std::log(censor_u[i]) / best_c, 1e-9);
    SurvivalRecord& rec = ds.outcomes[i];
    std::snprintf(id, sizeof(id), "P%06zu", i + 1);
    rec.patient_id = id;
    rec.event = event_time[i] <= censor_time;
    rec.time = rec.event ? event_time[i] : censor_time;
    events += rec.event ? 1 : 0;
  }
  result.achieved_event_fraction =
      static_cast<double>(events) / static_cast<double>(n);
  ds.validate();
  return result;
}

namespace {

// Canonical early-mlp parameter layout: trunk layers in forward order, each
// as row-major (in x out) weights followed by the bias, then the scalar
// output layer.
struct LinearChunk {
  std::size_t offset = 0;
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t w(std::size_t i, std::size_t j) const {
    return offset + i * out + j;
  }
  std::size_t b(std::size_t j) const { return offset + in * out + j; }
};

std::vector<LinearChunk> early_mlp_layout(const ArchitectureSpec& spec) {
  std::vector<LinearChunk> layers;
  std::size_t off = 0;
  std::size_t d = spec.embed_dim_a + spec.embed_dim_b;
  for (std::size_t h : spec.hidden_dims) {
    layers.push_back({off, d, h});
    off += d * h + h;
    d = h;
  }
  layers.push_back({off, d, 1});
  return layers;
}

}  // namespace

TrainedModel pattern_reference_model(SynthPattern pattern,
                                     const MultimodalDataset& dataset,
                                     double beta, double sigma) {
  dataset.validate();
  if (dataset.modalities.size() != 2) {
    throw std::invalid_argument("reference models need two modalities");
  }
  ArchitectureSpec spec = ArchitectureSpec::desk(ArchKind::EarlyMlp);
  spec.embed_dim_a = dataset.modalities[0].cols();
  spec.embed_dim_b = dataset.modalities[1].cols();
  spec.dropout = 0.0;  // never trained, so no dropout nodes
  spec.validate();

  std::size_t lanes = pattern == SynthPattern::XorSynergy ? 4 : 2;
  for (std::size_t h : spec.hidden_dims) {
    if (h < lanes) {
      throw std::invalid_argument("reference construction needs trunk width >= " +
                                  std::to_string(lanes));
    }
  }

  Matrix mean_a = column_means(dataset.modalities[0]);
  Matrix mean_b = column_means(dataset.modalities[1]);
  const double mu_a = mean_a(0, 0);
  const double mu_b = mean_b(0, 0);

  TrainedModel m;
  m.spec = spec;
  m.params.assign(parameter_count(spec), 0.0);
  std::vector<double>& p = m.params;
  std::vector<LinearChunk> layers = early_mlp_layout(spec);
  const LinearChunk& first = layers.front();
  const LinearChunk& out = layers.back();
  const std::size_t a0 = 0;
  const std::size_t b0 = spec.embed_dim_a;  // b's first column after concat

  // The first layer writes the pattern onto ReLU lanes; later trunk layers
  // pass the (non-negative) lanes through unchanged.
  switch (pattern) {
    case SynthPattern::Uniqueness:
      // beta * a0 = beta * (relu(a0) - relu(-a0))
      p[first.w(a0, 0)] = 1.0;
      p[first.w(a0, 1)] = -1.0;
      p[out.w(0, 0)] = beta;
      p[out.w(1, 0)] = -beta;
      break;
    case SynthPattern::XorSynergy: {
      // With at = a0 - mean(a0), bt = b0 - mean(b0):
      //   -beta*sign(at*bt)*min(|at|,|bt|) = -(beta/2)*(|at+bt| - |at-bt|)
      // using |x| = relu(x) + relu(-x); a smooth stand-in for the hard XOR
      // step that a width-4 ReLU layer expresses exactly. Centering puts a
      // mean-imputed modality on the hinge, where its lone effect is zero.
      p[first.w(a0, 0)] = 1.0;
      p[first.w(b0, 0)] = 1.0;
      p[first.b(0)] = -(mu_a + mu_b);
      p[first.w(a0, 1)] = -1.0;
      p[first.w(b0, 1)] = -1.0;
      p[first.b(1)] = mu_a + mu_b;
      p[first.w(a0, 2)] = 1.0;
      p[first.w(b0, 2)] = -1.0;
      p[first.b(2)] = mu_b - mu_a;
      p[first.w(a0, 3)] = -1.0;
      p[first.w(b0, 3)] = 1.0;
      p[first.b(3)] = mu_a - mu_b;
      p[out.w(0, 0)] = -0.5 * beta;
      p[out.w(1, 0)] = -0.5 * beta;
      p[out.w(2, 0)] = 0.5 * beta;
      p[out.w(3, 0)] = 0.5 * beta;
      break;
    }
    case SynthPattern::Redundancy: {
      // posterior mean of the shared latent: beta * (a0 + b0) / (2 + sigma^2)
      double scale = beta / (2.0 + sigma * sigma);
      p[first.w(a0, 0)] = 1.0;
      p[first.w(b0, 0)] = 1.0;
      p[first.w(a0, 1)] = -1.0;
      p[first.w(b0, 1)] = -1.0;
      p[out.w(0, 0)] = scale;
      p[out.w(1, 0)] = -scale;
      break;
    }
  }
  for (std::size_t l = 1; l + 1 < layers.size(); ++l) {
    for (std::size_t j = 0; j < lanes; ++j) p[layers[l].w(j, j)] = 1.0;
  }

  m.modality_names = dataset.modality_names;
  m.seed = dataset.has_seed ? dataset.seed : 0;
  m.train_means.push_back({mean_a.data().begin(), mean_a.data().end()});
  m.train_means.push_back({mean_b.data().begin(), mean_b.data().end()});
  return m;
}

namespace {

struct TrainedForPattern {
  TrainedModel model;
  MultimodalDataset test_set;
};

TrainedForPattern train_on_pattern(const ValidationConfig& cfg,
                                   SynthPattern pattern, ArchKind arch) {
  SynthSpec sp;
  sp.pattern = pattern;
  sp.n = cfg.n;
  sp.dims = cfg.dims;
  sp.beta = cfg.beta;
  sp.sigma = cfg.sigma;
  sp.event_fraction = cfg.event_fraction;
  sp.seed = cfg.seed;
  SynthResult gen = generate(sp);

  SplitSpec outer;
  outer.kind = SplitSpec::Kind::Holdout;
  outer.test_fraction = 0.2;
  outer.seed = cfg.seed;
  SplitResult osplit = make_split(gen.dataset, outer);
  MultimodalDataset train_pool = gen.dataset.subset(osplit.train_indices);

  SplitSpec inner = outer;
  inner.seed = cfg.seed + 1;
  SplitResult isplit = make_split(train_pool, inner);

  ArchitectureSpec aspec = ArchitectureSpec::desk(arch);
  aspec.embed_dim_a = cfg.dims;
  aspec.embed_dim_b = cfg.dims;

  TrainedForPattern out;
  out.model = train(aspec, train_pool, isplit.train_indices,
                    isplit.test_indices, cfg.hyper, cfg.seed);
  out.test_set = gen.dataset.subset(osplit.test_indices);
  return out;
}

struct ReferenceForPattern {
  TrainedModel model;
  MultimodalDataset data;
};

ReferenceForPattern reference_on_pattern(const ValidationConfig& cfg,
                                         SynthPattern pattern) {
  SynthSpec sp;
  sp.pattern = pattern;
  sp.n = cfg.n;
  sp.dims = cfg.dims;
  sp.beta = cfg.beta;
  sp.sigma = cfg.sigma;
  sp.event_fraction = cfg.event_fraction;
  sp.seed = cfg.seed;
  SynthResult gen = generate(sp);

  ReferenceForPattern out;
  out.model =
      pattern_reference_model(pattern, gen.dataset, cfg.beta, cfg.sigma);
  out.data = std::move(gen.dataset);
  return out;
}

double reference_cindex(const ReferenceForPattern& ref) {
  std::vector<double> scores =
      predict(ref.model, ref.data.modalities[0], ref.data.modalities[1]);
  return concordance_index(scores, ref.data.outcomes);
}

SuiteCheck make_check(std::string name, std::string pattern, double lo,
                      double hi, double observed) {
  SuiteCheck c;
  c.name = std::move(name);
  c.pattern = std::move(pattern);
  c.expected_low = lo;
  c.expected_high = hi;
  c.observed = observed;
  c.passed = observed >= lo && observed <= hi;
  return c;
}

}  // namespace

SuiteReport run_validation_suite(const ValidationConfig& cfg) {
  MaskingStrategy masking;
  masking.kind = MaskingStrategy::Kind::MeanImpute;
  masking.seed = cfg.seed;

  auto wanted = [&cfg](std::string_view name) {
    return cfg.only.empty() || name.find(cfg.only) != std::string_view::npos;
  };

  SuiteReport report;

  // Reference checkpoints pin each pattern's target; trained probes then
  // document what small trained models show on the same data.
  if (wanted("uniqueness-interaction-early-mlp") ||
      wanted("uniqueness-noise-contribution") ||
      wanted("uniqueness-reference-cindex")) {
    auto ref = reference_on_pattern(cfg, SynthPattern::Uniqueness);
    AuditReport a = audit(ref.model, ref.data, masking, Convention::Moebius,
                          cfg.threads);
    if (wanted("uniqueness-interaction-early-mlp")) {
      report.checks.push_back(make_check("uniqueness-interaction-early-mlp",
                                         "uniqueness", 0.0, 2.0,
                                         a.global.interaction_percent));
    }
    if (wanted("uniqueness-noise-contribution")) {
      report.checks.push_back(make_check("uniqueness-noise-contribution",
                                         "uniqueness", 0.0, 15.0,
                                         a.global.contribution_percent[1]));
    }
    if (wanted("uniqueness-reference-cindex")) {
      report.checks.push_back(make_check("uniqueness-reference-cindex",
                                         "uniqueness", 0.75, 1.0,
                                         reference_cindex(ref)));
    }
  }
  if (wanted("uniqueness-trained-floor")) {
    auto uniq = train_on_pattern(cfg, SynthPattern::Uniqueness,
                                 ArchKind::EarlyMlp);
    AuditReport a = audit(uniq.model, uniq.test_set, masking,
                          Convention::Moebius, cfg.threads);
    report.checks.push_back(make_check("uniqueness-trained-floor",
                                       "uniqueness", 0.0, 30.0,
                                       a.global.interaction_percent));
  }
  if (wanted("late-fusion-zero")) {
    auto late = train_on_pattern(cfg, SynthPattern::Uniqueness,
                                 ArchKind::LateLinear);
    AuditReport a = audit(late.model, late.test_set, masking,
                          Convention::Moebius, cfg.threads);
    report.checks.push_back(make_check("late-fusion-zero", "uniqueness",
                                       0.0, 1e-10,
                                       a.global.interaction_percent));
  }
  if (wanted("xor-interaction-early-mlp") || wanted("xor-reference-cindex")) {
    auto ref = reference_on_pattern(cfg, SynthPattern::XorSynergy);
    AuditReport a = audit(ref.model, ref.data, masking, Convention::Moebius,
                          cfg.threads);
    if (wanted("xor-interaction-early-mlp")) {
      report.checks.push_back(make_check("xor-interaction-early-mlp",
                                         "xor-synergy", 90.0, 100.0,
                                         a.global.interaction_percent));
    }
    if (wanted("xor-reference-cindex")) {
      report.checks.push_back(make_check("xor-reference-cindex", "xor-synergy",
                                         0.65, 1.0, reference_cindex(ref)));
    }
  }
  if (wanted("xor-interaction-bilinear")) {
    auto x2 = train_on_pattern(cfg, SynthPattern::XorSynergy,
                               ArchKind::Bilinear);
    AuditReport a = audit(x2.model, x2.test_set, masking, Convention::Moebius,
                          cfg.threads);
    report.checks.push_back(make_check("xor-interaction-bilinear",
                                       "xor-synergy", 90.0, 100.0,
                                       a.global.interaction_percent));
  }
  if (wanted("xor-trained-interaction")) {
    auto x1 = train_on_pattern(cfg, SynthPattern::XorSynergy,
                               ArchKind::EarlyMlp);
    AuditReport a = audit(x1.model, x1.test_set, masking, Convention::Moebius,
                          cfg.threads);
    report.checks.push_back(make_check("xor-trained-interaction",
                                       "xor-synergy", 20.0, 100.0,
                                       a.global.interaction_percent));
  }
  if (wanted("redundancy-reference-additive") ||
      wanted("redundancy-reference-cindex")) {
    auto ref = reference_on_pattern(cfg, SynthPattern::Redundancy);
    AuditReport a = audit(ref.model, ref.data, masking, Convention::Moebius,
                          cfg.threads);
    if (wanted("redundancy-reference-additive")) {
      report.checks.push_back(make_check("redundancy-reference-additive",
                                         "redundancy", 0.0, 1e-8,
                                         a.global.interaction_percent));
    }
    if (wanted("redundancy-reference-cindex")) {
      report.checks.push_back(make_check("redundancy-reference-cindex",
                                         "redundancy", 0.70, 1.0,
                                         reference_cindex(ref)));
    }
  }
  if (wanted("redundancy-contribution-a") ||
      wanted("redundancy-contribution-b") ||
      wanted("redundancy-trained-interaction")) {
    auto red = train_on_pattern(cfg, SynthPattern::Redundancy,
                                ArchKind::EarlyMlp);
    AuditReport a = audit(red.model, red.test_set, masking,
                          Convention::Moebius, cfg.threads);
    if (wanted("redundancy-contribution-a")) {
      report.checks.push_back(make_check("redundancy-contribution-a",
                                         "redundancy", 25.0, 55.0,
                                         a.global.contribution_percent[0]));
    }
    if (wanted("redundancy-contribution-b")) {
      report.checks.push_back(make_check("redundancy-contribution-b",
                                         "redundancy", 25.0, 55.0,
                                         a.global.contribution_percent[1]));
    }
    if (wanted("redundancy-trained-interaction")) {
      report.checks.push_back(make_check("redundancy-trained-interaction",
                                         "redundancy", 0.0, 35.0,
                                         a.global.interaction_percent));
    }
  }

  if (report.checks.empty()) {
    throw std::invalid_argument("no validation check matches '" + cfg.only +
                                "'");
  }
  report.all_passed = true;
  for (const auto& c : report.checks) report.all_passed &= c.passed;
  return report;
}

std::string suite_report_to_json(const SuiteReport& report) {
  JsonWriter w;
  w.begin_object();
  w.kv("format", "coxplain-suite");
  w.kv("version", 1);
  w.kv("all_passed", report.all_passed);
  w.key("checks").begin_array();
  for (const auto& c : report.checks) {
    w.begin_object();
    w.kv("name", c.name);
    w.kv("pattern", c.pattern);
    w.kv("expected_low", c.expected_low);
    w.kv("expected_high", c.expected_high);
    w.kv("observed", c.observed);
    w.kv("passed", c.passed);
    w.end_object();
  }
  w.end_array();
  w.end_object();
  return w.str() + "\n";
}

std::string suite_report_to_text(const SuiteReport& report) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-36s %-24s %14s  %s\n", "check",
                "expected", "observed", "result");
  out += line;
  out.append(84, '-');
  out += '\n';
  for (const auto& c : report.checks) {
    char range[64];
    std::snprintf(range, sizeof(range), "[%.4g, %.4g]", c.expected_low,
                  c.expected_high);
    std::snprintf(line, sizeof(line), "%-36s %-24s %14.6g  %s\n",
                  c.name.c_str(), range, c.observed,
                  c.passed ? "PASS" : "FAIL");
    out += line;
  }
  out += report.all_passed ? "all checks passed\n" : "some checks FAILED\n";
  return out;
}

CvStability cv_stability(const MultimodalDataset& dataset, int k,
                         const MaskingStrategy& masking,
                         Convention convention, const TrainerFn& trainer,
                         std::uint64_t seed, int threads) {
  if (k < 2) throw std::invalid_argument("cv_stability needs k >= 2");
  if (dataset.n_patients() < static_cast<std::size_t>(10 * k)) {
    throw std::invalid_argument("cv_stability needs at least 10*k patients, "
                                "got " + std::to_string(dataset.n_patients()));
  }
  SplitSpec folds;
  folds.kind = SplitSpec::Kind::KFold;
  folds.k = k;
  folds.seed = seed;
  SplitResult split = make_split(dataset, folds);

  CvStability out;
  for (std::size_t f = 0; f < split.fold_test_indices.size(); ++f) {
    std::vector<std::size_t> pool = split.kfold_train(f);
    MultimodalDataset train_pool = dataset.subset(pool);
    SplitSpec inner;
    inner.kind = SplitSpec::Kind::Holdout;
    inner.test_fraction = 0.2;
    inner.seed = RngStream::derive(seed, {kStreamCvFold, f}).next_u64();
    SplitResult isplit = make_split(train_pool, inner);
    TrainedModel model =
        trainer(train_pool, isplit.train_indices, isplit.test_indices);
    MultimodalDataset held_out = dataset.subset(split.fold_test_indices[f]);
    AuditReport a = audit(model, held_out, masking, convention, threads);
    out.fold_percents.push_back(a.global.interaction_percent);
  }

  double sum = 0.0;
  for (double v : out.fold_percents) sum += v;
  out.mean = sum / static_cast<double>(out.fold_percents.size());
  double ss = 0.0;
  for (double v : out.fold_percents) ss += (v - out.mean) * (v - out.mean);
  out.sd = std::sqrt(ss / static_cast<double>(out.fold_percents.size() - 1));
  if (out.sd == 0.0) {
    out.cv_percent = 0.0;
  } else if (std::fabs(out.mean) < 1e-15) {
    throw std::runtime_error("coefficient of variation undefined: fold mean "
                             "InterSHAP is zero with nonzero spread");
  } else {
    out.cv_percent = 100.0 * out.sd / std::fabs(out.mean);
  }
  return out;
}

}  // namespace coxplain
