#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "coxplain/dataio.hpp"
#include "coxplain/graph.hpp"
#include "coxplain/matrix.hpp"

namespace coxplain {

enum class ArchKind {
  EarlyMlp,
  CrossAttention,
  Bilinear,
  Gated,
  UnimodalA,
  UnimodalB,
  LateLinear,
};

ArchKind arch_kind_from_string(std::string_view s);
std::string arch_kind_to_string(ArchKind kind);

struct ArchitectureSpec {
  ArchKind kind = ArchKind::EarlyMlp;
  std::size_t embed_dim_a = 32;
  std::size_t embed_dim_b = 32;
  std::vector<std::size_t> hidden_dims = {32, 8};  // early-mlp trunk
  double dropout = 0.1;
  std::size_t bilinear_rank = 8;
  std::size_t attention_dim = 16;
  std::size_t branch_dim = 16;   // gated f/g output channels
  std::size_t head_hidden = 16;  // hidden width of scalar heads

  void validate() const;

  /// Small preset used for every trained model in this repository.
  static ArchitectureSpec desk(ArchKind kind);
  /// Full-scale preset (2048-dim embeddings); kept for parameter-count
  /// checks, never trained here.
  static ArchitectureSpec paper(ArchKind kind);
};

struct TrainHyperparams {
  double lr = 1e-4;
  double weight_decay = 1e-5;
  std::size_t batch_size = 0;  // 0 = auto: min(128, n_train), or full batch
                               // when n_train <= 256 to keep risk sets large
  int patience = 20;
  int max_epochs = 500;
};

struct TrainedModel {
  ArchitectureSpec spec;
  std::vector<double> params;  // canonical order: layers in forward order,
                               // each layer weights row-major then bias
  std::uint64_t seed = 0;
  TrainHyperparams hyper;
  int epochs_run = 0;
  double best_val_cindex = 0.0;
  std::vector<std::string> modality_names = {"modA", "modB"};
  std::vector<std::vector<double>> train_means;  // per modality column means
};

/// Constructs the compute graph for `spec`. Parameters are zero until
/// initialize_params or set_params runs. Inputs are named "A" and "B";
/// interior taps: gate_alpha / branch_f / branch_g / gated_z (gated),
/// attended_a / attended_b / attn_weights_a / attn_weights_b
/// (cross-attention), bilinear_z, head_a / head_b (late-linear).
Graph build_graph(const ArchitectureSpec& spec);

/// Kaiming-uniform fan-in for ReLU-followed layers, Xavier-uniform for
/// attention/gate projections and output layers, zero biases. Deterministic
/// in (spec, seed).
void initialize_params(Graph& graph, const ArchitectureSpec& spec,
                       std::uint64_t seed);

/// Analytic parameter count; equals build_graph(spec).param_count().
std::size_t parameter_count(const ArchitectureSpec& spec);

/// Untrained model with initialized parameters.
TrainedModel build(const ArchitectureSpec& spec, std::uint64_t seed);

/// Eval-mode log-risk scores, one per row. Pure.
std::vector<double> predict(const TrainedModel& model, const Matrix& mod_a,
                            const Matrix& mod_b);

/// Trains with Adam and early stopping on validation C-index; returns the
/// parameters of the best validation epoch. Deterministic in seed.
TrainedModel train(const ArchitectureSpec& spec,
                   const MultimodalDataset& dataset,
                   std::span<const std::size_t> train_indices,
                   std::span<const std::size_t> val_indices,
                   const TrainHyperparams& hyper, std::uint64_t seed);

/// Checkpoint: model.json manifest + model.bin (canonical-order params as
/// little-endian float64).
void save_model(const TrainedModel& model, const std::string& directory);
TrainedModel load_model(const std::string& directory);

}  // namespace coxplain
