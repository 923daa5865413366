#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "coxplain/dataio.hpp"
#include "coxplain/matrix.hpp"
#include "coxplain/models.hpp"

namespace coxplain {

struct MaskingStrategy {
  enum class Kind { MeanImpute, Shuffle, Zero };
  Kind kind = Kind::MeanImpute;
  int shuffle_replicates = 8;  // shuffle only; others evaluate once
  std::uint64_t seed = 0;
};

MaskingStrategy::Kind masking_kind_from_string(std::string_view s);
std::string masking_kind_to_string(MaskingStrategy::Kind kind);

/// v(S) per patient for every subset S of modalities, indexed by bitmask
/// (bit m set = modality m present, i.e. unmasked).
struct CoalitionTable {
  std::vector<std::string> modality_names;
  std::vector<std::vector<double>> values;  // [patient][mask], 2^M per patient

  std::size_t n_modalities() const { return modality_names.size(); }
  std::size_t n_patients() const { return values.size(); }
  std::size_t full_mask() const { return (std::size_t{1} << n_modalities()) - 1; }
  double v(std::size_t patient, std::size_t mask) const {
    return values[patient][mask];
  }
  void check() const;
};

enum class Convention { PaperEqs, Moebius };

Convention convention_from_string(std::string_view s);
std::string convention_to_string(Convention c);

struct ShapleyDecomposition {
  Convention convention = Convention::Moebius;
  std::vector<std::string> modality_names;
  std::vector<std::string> interaction_labels;       // aligned with columns of
                                                     // `interactions`
  std::vector<std::vector<double>> mains;            // [patient][modality]
  std::vector<std::vector<double>> interactions;     // [patient][term]
  std::vector<double> v_empty;                       // per patient
  std::vector<double> v_full;
};

struct GlobalResult {
  double interaction_percent = 0.0;
  std::vector<double> contribution_percent;  // per modality
  int degenerate_count = 0;                  // |denominator| < 1e-12 patients
};

struct AuditReport {
  std::string model_path;
  std::string dataset_path;
  MaskingStrategy masking;
  Convention convention = Convention::Moebius;
  std::vector<std::string> modality_names;
  std::vector<std::string> patient_ids;
  ShapleyDecomposition decomposition;  // in the chosen convention
  GlobalResult global;
  double interaction_percent_moebius = 0.0;
  double interaction_percent_paper_eqs = 0.0;  // NaN when M != 2
  std::vector<double> per_patient_percent;     // NaN for degenerate patients
};

/// Scores a full batch: given one matrix per modality (all n x d_m), returns
/// n log-risk values.
using ScoreFn =
    std::function<std::vector<double>(const std::vector<Matrix>&)>;

/// General coalition evaluation against any scorer. Masked modalities are
/// replaced per strategy; for shuffle, v(S) is the mean over replicates with
/// donors drawn per (seed, patient, replicate, modality) so the same donor
/// serves every subset. v(full) is a single unmasked evaluation.
/// `train_means[m]` supplies the mean-impute row for modality m.
CoalitionTable evaluate_coalitions(
    const ScoreFn& score, const std::vector<Matrix>& modalities,
    const std::vector<std::string>& modality_names,
    const MaskingStrategy& masking,
    const std::vector<std::vector<double>>& train_means, int threads = 1);

/// TrainedModel adapter (M = 2); mean-impute uses the model's stored
/// training-split means.
CoalitionTable evaluate_coalitions(const TrainedModel& model,
                                   const MultimodalDataset& dataset,
                                   const MaskingStrategy& masking,
                                   int threads = 1);

/// phi_A = 1/2 [v(A) - v(0)] + 1/2 [v(AB) - v(B)], phi_B symmetric,
/// phi_int = 1/2 [v(AB) - v(A) - v(B) + v(0)]. M = 2 only.
ShapleyDecomposition shapley_two_modality(const CoalitionTable& table);

/// Moebius transform m(S) = sum_{T subseteq S} (-1)^{|S|-|T|} v(T); mains are
/// m({i}), interactions all m(S) with |S| >= 2.
ShapleyDecomposition moebius_decomposition(const CoalitionTable& table);

/// Shapley interaction index psi_ij per patient.
std::vector<double> shapley_interaction_index(const CoalitionTable& table,
                                              std::size_t i, std::size_t j);

GlobalResult global_intershap(const ShapleyDecomposition& decomp);

/// Per-patient interaction percentage (same formula restricted to one
/// patient); NaN where the denominator is below 1e-12.
std::vector<double> per_patient_percent(const ShapleyDecomposition& decomp);

AuditReport audit(const TrainedModel& model, const MultimodalDataset& dataset,
                  const MaskingStrategy& masking, Convention convention,
                  int threads = 1, const std::string& model_path = "",
                  const std::string& dataset_path = "");

std::string report_to_json(const AuditReport& report);

/// Per-patient flat table: patient_id, v_empty, v_full, mains, interactions,
/// interaction percent.
std::string report_to_csv(const AuditReport& report);

}  // namespace coxplain
