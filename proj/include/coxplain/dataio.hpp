#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "coxplain/matrix.hpp"
#include "coxplain/survival.hpp"

namespace coxplain {

/// Aligned per-modality embeddings plus survival outcomes. Row i of every
/// matrix and outcomes[i] describe the same patient.
struct MultimodalDataset {
  std::vector<std::string> modality_names;
  std::vector<Matrix> modalities;
  std::vector<SurvivalRecord> outcomes;
  std::string source = "unknown";
  std::uint64_t seed = 0;
  bool has_seed = false;

  std::size_t n_patients() const { return outcomes.size(); }
  std::size_t n_modalities() const { return modalities.size(); }
  std::size_t modality_index(std::string_view name) const;
  const Matrix& modality(std::string_view name) const;

  MultimodalDataset subset(std::span<const std::size_t> rows) const;
  void validate() const;
};

struct SplitSpec {
  enum class Kind { Holdout, KFold };
  Kind kind = Kind::Holdout;
  double test_fraction = 0.2;
  int k = 10;
  bool stratify_by_event = true;
  std::uint64_t seed = 0;
};

struct SplitResult {
  // Holdout populates train/test; k-fold populates fold_test_indices.
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
  std::vector<std::vector<std::size_t>> fold_test_indices;

  std::vector<std::size_t> kfold_train(std::size_t fold) const;
};

/// EMB1: magic "EMB1", u32le rows, u32le cols, rows*cols f64le row-major.
Matrix read_emb1(const std::string& path);
void write_emb1(const std::string& path, const Matrix& m);

std::vector<SurvivalRecord> read_survival_csv(const std::string& path);
void write_survival_csv(const std::string& path,
                        std::span<const SurvivalRecord> outcomes);

MultimodalDataset load_dataset(const std::string& directory);
void save_dataset(const MultimodalDataset& dataset,
                  const std::string& directory);

SplitResult make_split(const MultimodalDataset& dataset,
                       const SplitSpec& spec);

/// Writes `text` to `path` atomically enough for our purposes (truncate +
/// write + close), throwing on any I/O failure.
void write_text_file(const std::string& path, std::string_view text);
std::string read_text_file(const std::string& path);

/// Raw little-endian float64 vector files (model.bin payloads).
void write_f64_vector(const std::string& path, std::span<const double> values);
std::vector<double> read_f64_vector(const std::string& path);

}  // namespace coxplain
