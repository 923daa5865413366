#include "coxplain/intershap.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "coxplain/json_writer.hpp"
#include "coxplain/parallel.hpp"
#include "coxplain/rng.hpp"

namespace coxplain {

namespace {

constexpr std::uint64_t kStreamShuffleDonor = 0x44;
constexpr double kDegenerateEps = 1e-12;

std::string join_names(const std::vector<std::string>& names,
                       std::size_t mask) {
  std::string label;
  for (std::size_t m = 0; m < names.size(); ++m) {
    if (!(mask >> m & 1)) continue;
    if (!label.empty()) label += '*';
    label += names[m];
  }
  return label;
}

}  // namespace

MaskingStrategy::Kind masking_kind_from_string(std::string_view s) {
  if (s == "mean" || s == "mean-impute") return MaskingStrategy::Kind::MeanImpute;
  if (s == "shuffle") return MaskingStrategy::Kind::Shuffle;
  if (s == "zero") return MaskingStrategy::Kind::Zero;
  throw std::invalid_argument("unknown masking strategy '" + std::string(s) +
                              "' (expected mean, shuffle, or zero)");
}

std::string masking_kind_to_string(MaskingStrategy::Kind kind) {
  switch (kind) {
    case MaskingStrategy::Kind::MeanImpute: return "mean-impute";
    case MaskingStrategy::Kind::Shuffle: return "shuffle";
    case MaskingStrategy::Kind::Zero: return "zero";
  }
  throw std::logic_error("unreachable");
}

Convention convention_from_string(std::string_view s) {
  if (s == "paper-eqs") return Convention::PaperEqs;
  if (s == "moebius") return Convention::Moebius;
  throw std::invalid_argument("unknown convention '" + std::string(s) +
                              "' (expected moebius or paper-eqs)");
}

std::string convention_to_string(Convention c) {
  return c == Convention::Moebius ? "moebius" : "paper-eqs";
}

void CoalitionTable::check() const {
  std::size_t m = n_modalities();
  if (m < 2) {
    throw std::invalid_argument("coalition table needs at least 2 modalities");
  }
  if (m > 10) {
    throw std::invalid_argument("coalition tables are exact over 2^M subsets; "
                                "M is capped at 10, got " + std::to_string(m));
  }
  std::size_t want = std::size_t{1} << m;
  if (values.empty()) {
    throw std::invalid_argument("coalition table has no patients");
  }
  for (const auto& row : values) {
    if (row.size() != want) {
      throw std::invalid_argument("coalition table row holds " +
                                  std::to_string(row.size()) + " subsets, " +
                                  "expected " + std::to_string(want));
    }
    for (double v : row) {
      if (!std::isfinite(v)) {
        throw std::invalid_argument("coalition table contains non-finite v(S)");
      }
    }
  }
}

CoalitionTable evaluate_coalitions(
    const ScoreFn& score, const std::vector<Matrix>& modalities,
    const std::vector<std::string>& modality_names,
    const MaskingStrategy& masking,
    const std::vector<std::vector<double>>& train_means, int threads) {
  std::size_t m_count = modalities.size();
  if (m_count < 2 || m_count != modality_names.size()) {
    throw std::invalid_argument("evaluate_coalitions needs >= 2 named modalities");
  }
  if (m_count > 10) {
    throw std::invalid_argument("M capped at 10 (exact 2^M evaluation)");
  }
  std::size_t n = modalities[0].rows();
  if (n == 0) throw std::invalid_argument("empty dataset");
  for (const auto& mat : modalities) {
    if (mat.rows() != n) {
      throw std::invalid_argument("modalities disagree on patient count");
    }
  }
  bool shuffle = masking.kind == MaskingStrategy::Kind::Shuffle;
  std::size_t replicates =
      shuffle ? static_cast<std::size_t>(std::max(1, masking.shuffle_replicates))
              : 1;

  // One masked variant per (modality, replicate). Donors depend only on
  // (seed, patient, replicate, modality), never on the subset, so additive
  // models cancel exactly in the second difference.
  std::vector<std::vector<Matrix>> masked(m_count);
  for (std::size_t m = 0; m < m_count; ++m) {
    masked[m].reserve(replicates);
    const Matrix& src = modalities[m];
    for (std::size_t r = 0; r < replicates; ++r) {
      Matrix variant(src.rows(), src.cols());
      switch (masking.kind) {
        case MaskingStrategy::Kind::Zero:
          break;  // already zeros
        case MaskingStrategy::Kind::MeanImpute: {
          if (m >= train_means.size() || train_means[m].size() != src.cols()) {
            throw std::invalid_argument(
                "mean-impute masking needs a training mean vector of length " +
                std::to_string(src.cols()) + " for modality '" +
                modality_names[m] + "'");
          }
          for (std::size_t i = 0; i < n; ++i) {
            std::copy(train_means[m].begin(), train_means[m].end(),
                      variant.row(i).begin());
          }
          break;
        }
        case MaskingStrategy::Kind::Shuffle: {
          for (std::size_t i = 0; i < n; ++i) {
            RngStream rng = RngStream::derive(
                masking.seed, {kStreamShuffleDonor, i, r, m});
            std::size_t donor = i;
            if (n > 1) {
              donor = static_cast<std::size_t>(rng.next_below(n - 1));
              if (donor >= i) ++donor;  // uniform over the other patients
            }
            std::copy(src.row(donor).begin(), src.row(donor).end(),
                      variant.row(i).begin());
          }
          break;
        }
      }
      masked[m].push_back(std::move(variant));
    }
  }

  std::size_t n_masks = std::size_t{1} << m_count;
  std::size_t full = n_masks - 1;
  // Work items: every (mask, replicate) pair except the full coalition,
  // which is evaluated once unmasked.
  struct Item {
    std::size_t mask;
    std::size_t replicate;
  };
  std::vector<Item> items;
  for (std::size_t mask = 0; mask < full; ++mask) {
    for (std::size_t r = 0; r < replicates; ++r) items.push_back({mask, r});
  }
  items.push_back({full, 0});

  std::vector<std::vector<double>> slot(items.size());
  parallel_for(items.size(), resolve_threads(threads), [&](std::size_t t) {
    const Item& item = items[t];
    std::vector<Matrix> inputs;
    inputs.reserve(m_count);
    for (std::size_t m = 0; m < m_count; ++m) {
      inputs.push_back(item.mask >> m & 1 ? modalities[m]
                                          : masked[m][item.replicate]);
    }
    auto scores = score(inputs);
    if (scores.size() != n) {
      throw std::runtime_error("scorer returned " +
                               std::to_string(scores.size()) + " values for " +
                               std::to_string(n) + " patients");
    }
    slot[t] = std::move(scores);
  });

  CoalitionTable table;
  table.modality_names = modality_names;
  table.values.assign(n, std::vector<double>(n_masks, 0.0));
  double inv_r = 1.0 / static_cast<double>(replicates);
  for (std::size_t t = 0; t < items.size(); ++t) {
    const Item& item = items[t];
    double w = item.mask == full ? 1.0 : inv_r;
    for (std::size_t i = 0; i < n; ++i) {
      table.values[i][item.mask] += w * slot[t][i];
    }
  }
  table.check();
  return table;
}

CoalitionTable evaluate_coalitions(const TrainedModel& model,
                                   const MultimodalDataset& dataset,
                                   const MaskingStrategy& masking,
                                   int threads) {
  if (dataset.n_modalities() != 2) {
    throw std::invalid_argument(
        "model audits are bimodal; dataset has " +
        std::to_string(dataset.n_modalities()) + " modalities");
  }
  if (masking.kind == MaskingStrategy::Kind::MeanImpute &&
      model.train_means.size() != 2) {
    throw std::invalid_argument(
        "mean-impute masking needs the model's training-split means; this "
        "model has none (was it trained?)");
  }
  ScoreFn score = [&model](const std::vector<Matrix>& inputs) {
    return predict(model, inputs[0], inputs[1]);
  };
  return evaluate_coalitions(score, dataset.modalities,
                             dataset.modality_names, masking,
                             model.train_means, threads);
}

ShapleyDecomposition shapley_two_modality(const CoalitionTable& table) {
  table.check();
  if (table.n_modalities() != 2) {
    throw std::invalid_argument(
        "shapley_two_modality requires exactly 2 modalities, got " +
        std::to_string(table.n_modalities()));
  }
  ShapleyDecomposition d;
  d.convention = Convention::PaperEqs;
  d.modality_names = table.modality_names;
  d.interaction_labels = {join_names(table.modality_names, 3)};
  std::size_t n = table.n_patients();
  d.mains.resize(n);
  d.interactions.resize(n);
  d.v_empty.resize(n);
  d.v_full.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double v00 = table.v(i, 0);
    double va = table.v(i, 1);
    double vb = table.v(i, 2);
    double vab = table.v(i, 3);
    double phi_a = 0.5 * (va - v00) + 0.5 * (vab - vb);
    double phi_b = 0.5 * (vb - v00) + 0.5 * (vab - va);
    double phi_int = 0.5 * (vab - va - vb + v00);
    d.mains[i] = {phi_a, phi_b};
    d.interactions[i] = {phi_int};
    d.v_empty[i] = v00;
    d.v_full[i] = vab;
  }
  return d;
}

ShapleyDecomposition moebius_decomposition(const CoalitionTable& table) {
  table.check();
  std::size_t m_count = table.n_modalities();
  std::size_t n_masks = std::size_t{1} << m_count;
  ShapleyDecomposition d;
  d.convention = Convention::Moebius;
  d.modality_names = table.modality_names;
  for (std::size_t mask = 0; mask < n_masks; ++mask) {
    if (std::popcount(mask) >= 2) {
      d.interaction_labels.push_back(join_names(table.modality_names, mask));
    }
  }
  std::size_t n = table.n_patients();
  d.mains.resize(n);
  d.interactions.resize(n);
  d.v_empty.resize(n);
  d.v_full.resize(n);
  std::vector<double> mob(n_masks);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(table.values[i].begin(), table.values[i].end(), mob.begin());
    for (std::size_t b = 0; b < m_count; ++b) {
      for (std::size_t mask = 0; mask < n_masks; ++mask) {
        if (mask >> b & 1) mob[mask] -= mob[mask ^ (std::size_t{1} << b)];
      }
    }
    d.mains[i].reserve(m_count);
    for (std::size_t b = 0; b < m_count; ++b) {
      d.mains[i].push_back(mob[std::size_t{1} << b]);
    }
    for (std::size_t mask = 0; mask < n_masks; ++mask) {
      if (std::popcount(mask) >= 2) d.interactions[i].push_back(mob[mask]);
    }
    d.v_empty[i] = table.v(i, 0);
    d.v_full[i] = table.v(i, n_masks - 1);
  }
  return d;
}

std::vector<double> shapley_interaction_index(const CoalitionTable& table,
                                              std::size_t i, std::size_t j) {
  table.check();
  std::size_t m_count = table.n_modalities();
  if (i == j || i >= m_count || j >= m_count) {
    throw std::invalid_argument("shapley_interaction_index needs two distinct "
                                "modality indices below M");
  }
  // Precompute |S|! (M-|S|-2)! / (M-1)! for |S| = 0..M-2.
  std::vector<double> fact(m_count + 1, 1.0);
  for (std::size_t k = 1; k <= m_count; ++k) {
    fact[k] = fact[k - 1] * static_cast<double>(k);
  }
  std::vector<double> weight(m_count - 1);
  for (std::size_t s = 0; s + 2 <= m_count; ++s) {
    weight[s] = fact[s] * fact[m_count - s - 2] / fact[m_count - 1];
  }
  std::size_t bit_i = std::size_t{1} << i;
  std::size_t bit_j = std::size_t{1} << j;
  std::size_t rest = table.full_mask() & ~(bit_i | bit_j);

  std::vector<double> psi(table.n_patients(), 0.0);
  for (std::size_t p = 0; p < table.n_patients(); ++p) {
    // Enumerate subsets S of the remaining modalities via the standard
    // submask walk.
    std::size_t s = rest;
    while (true) {
      double delta = table.v(p, s | bit_i | bit_j) - table.v(p, s | bit_i) -
                     table.v(p, s | bit_j) + table.v(p, s);
      psi[p] += weight[static_cast<std::size_t>(std::popcount(s))] * delta;
      if (s == 0) break;
      s = (s - 1) & rest;
    }
  }
  return psi;
}

namespace {

struct PatientSums {
  double main_abs = 0.0;
  double inter_abs = 0.0;
  std::vector<double> per_main_abs;
};

PatientSums patient_sums(const ShapleyDecomposition& d, std::size_t p) {
  PatientSums s;
  s.per_main_abs.resize(d.modality_names.size(), 0.0);
  for (std::size_t m = 0; m < d.mains[p].size(); ++m) {
    double a = std::fabs(d.mains[p][m]);
    s.main_abs += a;
    s.per_main_abs[m] = a;
  }
  for (double v : d.interactions[p]) s.inter_abs += std::fabs(v);
  return s;
}

}  // namespace

GlobalResult global_intershap(const ShapleyDecomposition& decomp) {
  std::size_t n = decomp.mains.size();
  if (n == 0) throw std::invalid_argument("decomposition has no patients");
  GlobalResult g;
  g.contribution_percent.assign(decomp.modality_names.size(), 0.0);
  double denom_total = 0.0;
  double inter_total = 0.0;
  std::vector<double> main_totals(decomp.modality_names.size(), 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    PatientSums s = patient_sums(decomp, p);
    double denom = s.main_abs + s.inter_abs;
    if (denom < kDegenerateEps) {
      ++g.degenerate_count;
      continue;
    }
    denom_total += denom;
    inter_total += s.inter_abs;
    for (std::size_t m = 0; m < main_totals.size(); ++m) {
      main_totals[m] += s.per_main_abs[m];
    }
  }
  if (denom_total < kDegenerateEps) {
    throw std::runtime_error(
        "every patient is degenerate (decomposition magnitudes all below " +
        format_double(kDegenerateEps) + "); no global InterSHAP defined");
  }
  g.interaction_percent = 100.0 * inter_total / denom_total;
  for (std::size_t m = 0; m < main_totals.size(); ++m) {
    g.contribution_percent[m] = 100.0 * main_totals[m] / denom_total;
  }
  return g;
}

std::vector<double> per_patient_percent(const ShapleyDecomposition& decomp) {
  std::size_t n = decomp.mains.size();
  std::vector<double> out(n, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t p = 0; p < n; ++p) {
    PatientSums s = patient_sums(decomp, p);
    double denom = s.main_abs + s.inter_abs;
    if (denom >= kDegenerateEps) out[p] = 100.0 * s.inter_abs / denom;
  }
  return out;
}

AuditReport audit(const TrainedModel& model, const MultimodalDataset& dataset,
                  const MaskingStrategy& masking, Convention convention,
                  int threads, const std::string& model_path,
                  const std::string& dataset_path) {
  AuditReport report;
  report.model_path = model_path;
  report.dataset_path = dataset_path;
  report.masking = masking;
  report.convention = convention;
  report.modality_names = dataset.modality_names;
  for (const auto& rec : dataset.outcomes) {
    report.patient_ids.push_back(rec.patient_id);
  }
  CoalitionTable table = evaluate_coalitions(model, dataset, masking, threads);
  ShapleyDecomposition moebius = moebius_decomposition(table);
  ShapleyDecomposition paper_eqs = shapley_two_modality(table);
  report.decomposition =
      convention == Convention::Moebius ? moebius : paper_eqs;
  report.global = global_intershap(report.decomposition);
  report.interaction_percent_moebius =
      global_intershap(moebius).interaction_percent;
  report.interaction_percent_paper_eqs =
      global_intershap(paper_eqs).interaction_percent;
  report.per_patient_percent = per_patient_percent(report.decomposition);
  return report;
}

std::string report_to_json(const AuditReport& report) {
  const auto& d = report.decomposition;
  JsonWriter w;
  w.begin_object();
  w.kv("format", "coxplain-audit");
  w.kv("version", 1);
  w.key("metadata").begin_object();
  w.kv("model_path", report.model_path);
  w.kv("dataset_path", report.dataset_path);
  w.key("masking").begin_object();
  w.kv("kind", masking_kind_to_string(report.masking.kind));
  w.kv("shuffle_replicates", report.masking.shuffle_replicates);
  w.kv("seed", report.masking.seed);
  w.end_object();
  w.kv("convention", convention_to_string(report.convention));
  w.key("modalities").begin_array();
  for (const auto& name : report.modality_names) w.value(name);
  w.end_array();
  w.kv("n_patients", report.patient_ids.size());
  w.end_object();

  w.key("global").begin_object();
  w.kv("interaction_percent", report.global.interaction_percent);
  w.key("contribution_percent").begin_object();
  for (std::size_t m = 0; m < report.modality_names.size(); ++m) {
    w.kv(report.modality_names[m], report.global.contribution_percent[m]);
  }
  w.end_object();
  w.kv("degenerate_count", report.global.degenerate_count);
  w.key("interaction_percent_by_convention").begin_object();
  w.kv("moebius", report.interaction_percent_moebius);
  if (std::isfinite(report.interaction_percent_paper_eqs)) {
    w.kv("paper-eqs", report.interaction_percent_paper_eqs);
  } else {
    w.key("paper-eqs").null();
  }
  w.end_object();
  w.end_object();

  w.key("per_patient").begin_array();
  for (std::size_t p = 0; p < report.patient_ids.size(); ++p) {
    w.begin_object();
    w.kv("patient_id", report.patient_ids[p]);
    w.kv("v_empty", d.v_empty[p]);
    w.kv("v_full", d.v_full[p]);
    w.key("mains").begin_object();
    for (std::size_t m = 0; m < d.modality_names.size(); ++m) {
      w.kv(d.modality_names[m], d.mains[p][m]);
    }
    w.end_object();
    w.key("interactions").begin_object();
    for (std::size_t t = 0; t < d.interaction_labels.size(); ++t) {
      w.kv(d.interaction_labels[t], d.interactions[p][t]);
    }
    w.end_object();
    if (std::isnan(report.per_patient_percent[p])) {
      w.key("interaction_percent").null();
    } else {
      w.kv("interaction_percent", report.per_patient_percent[p]);
    }
    w.end_object();
  }
  w.end_array();
  w.end_object();
  return w.str() + "\n";
}

std::string report_to_csv(const AuditReport& report) {
  const auto& d = report.decomposition;
  std::string out = "patient_id,v_empty,v_full";
  for (const auto& name : d.modality_names) out += ",main_" + name;
  for (const auto& label : d.interaction_labels) {
    std::string col = label;
    std::replace(col.begin(), col.end(), '*', 'x');
    out += ",interaction_" + col;
  }
  out += ",interaction_percent\n";
  for (std::size_t p = 0; p < report.patient_ids.size(); ++p) {
    out += report.patient_ids[p];
    out += ',' + format_double(d.v_empty[p]);
    out += ',' + format_double(d.v_full[p]);
    for (double v : d.mains[p]) out += ',' + format_double(v);
    for (double v : d.interactions[p]) out += ',' + format_double(v);
    if (std::isnan(report.per_patient_percent[p])) {
      out += ",";
    } else {
      out += ',' + format_double(report.per_patient_percent[p]);
    }
    out += '\n';
  }
  return out;
}

}  // namespace coxplain
