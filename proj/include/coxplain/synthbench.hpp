#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "coxplain/dataio.hpp"
#include "coxplain/intershap.hpp"
#include "coxplain/models.hpp"

namespace coxplain {

enum class SynthPattern { Uniqueness, XorSynergy, Redundancy };

SynthPattern synth_pattern_from_string(std::string_view s);
std::string synth_pattern_to_string(SynthPattern p);

struct SynthSpec {
  SynthPattern pattern = SynthPattern::Uniqueness;
  std::size_t n = 2000;
  std::size_t dims = 16;  // per modality
  double beta = 2.0;
  double event_fraction = 0.65;
  double sigma = 0.3;  // redundancy noise scale
  std::uint64_t seed = 42;

  void validate() const;
};

struct GroundTruth {
  std::string pattern;
  std::string target;          // which audited share the range refers to
  double expected_low = 0.0;   // percent
  double expected_high = 0.0;  // percent
};

struct SynthResult {
  MultimodalDataset dataset;
  GroundTruth truth;
  double achieved_event_fraction = 0.0;
  double censoring_rate = 0.0;
  std::vector<double> true_log_risk;  // latent r per patient
};

/// Standard-normal features; pattern-specific latent risk r; exponential
/// event times with rate lambda0 * exp(r); exponential censoring tuned by
/// bisection to the target event fraction (+-2%). Deterministic per seed.
SynthResult generate(const SynthSpec& spec);

/// Hand-built desk-preset early-mlp checkpoint whose forward pass realizes
/// the pattern's risk surface exactly: uniqueness beta*a0 via a paired-ReLU
/// identity, xor the smooth surrogate -beta*sign(at*bt)*min(|at|,|bt|) on
/// mean-centered a0/b0, and redundancy the posterior mean
/// beta*(a0+b0)/(2+sigma^2) of the shared latent. train_means come from
/// `dataset`. Auditing these checkpoints pins each pattern's target without
/// depending on optimizer behaviour.
TrainedModel pattern_reference_model(SynthPattern pattern,
                                     const MultimodalDataset& dataset,
                                     double beta, double sigma = 0.3);

struct SuiteCheck {
  std::string name;
  std::string pattern;
  double expected_low = 0.0;
  double expected_high = 0.0;
  double observed = 0.0;
  bool passed = false;
};

struct SuiteReport {
  std::vector<SuiteCheck> checks;
  bool all_passed = false;
};

struct ValidationConfig {
  std::size_t n = 2000;
  std::size_t dims = 16;
  double beta = 2.0;
  double sigma = 0.3;
  double event_fraction = 0.65;
  std::uint64_t seed = 42;
  int threads = 1;
  std::string only;  // run only checks whose name contains this substring
  TrainHyperparams hyper;
};

/// Audits the reference checkpoints against each pattern's target range,
/// then trains small per-pattern probes and checks their audited shares
/// against desk-scale expectations (late-fusion zero line, trained floors,
/// redundancy contribution bounds).
SuiteReport run_validation_suite(const ValidationConfig& config);

std::string suite_report_to_json(const SuiteReport& report);
std::string suite_report_to_text(const SuiteReport& report);

struct CvStability {
  std::vector<double> fold_percents;
  double mean = 0.0;
  double sd = 0.0;          // sample standard deviation
  double cv_percent = 0.0;  // 100 * sd / mean
};

using TrainerFn = std::function<TrainedModel(
    const MultimodalDataset&, std::span<const std::size_t>,
    std::span<const std::size_t>)>;

/// Stratified k-fold; per fold, trains via `trainer` on the other folds
/// (with an inner holdout for early stopping) and audits the held-out fold.
CvStability cv_stability(const MultimodalDataset& dataset, int k,
                         const MaskingStrategy& masking,
                         Convention convention, const TrainerFn& trainer,
                         std::uint64_t seed, int threads = 1);

}  // namespace coxplain
