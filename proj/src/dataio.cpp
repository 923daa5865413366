#include "coxplain/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "coxplain/json_writer.hpp"
#include "coxplain/rng.hpp"

namespace fs = std::filesystem;

namespace coxplain {

std::size_t MultimodalDataset::modality_index(std::string_view name) const {
  for (std::size_t i = 0; i < modality_names.size(); ++i) {
    if (modality_names[i] == name) return i;
  }
  throw std::invalid_argument("unknown modality '" + std::string(name) + "'");
}

const Matrix& MultimodalDataset::modality(std::string_view name) const {
  return modalities[modality_index(name)];
}

MultimodalDataset MultimodalDataset::subset(
    std::span<const std::size_t> rows) const {
  MultimodalDataset out;
  out.modality_names = modality_names;
  out.source = source;
  out.seed = seed;
  out.has_seed = has_seed;
  for (const Matrix& m : modalities) out.modalities.push_back(gather_rows(m, rows));
  out.outcomes.reserve(rows.size());
  for (std::size_t r : rows) {
    if (r >= outcomes.size()) {
      throw std::out_of_range("subset: row " + std::to_string(r) +
                              " out of range for " +
                              std::to_string(outcomes.size()) + " patients");
    }
    out.outcomes.push_back(outcomes[r]);
  }
  return out;
}

void MultimodalDataset::validate() const {
  if (modalities.empty()) {
    throw std::invalid_argument("dataset has no modalities");
  }
  if (modality_names.size() != modalities.size()) {
    throw std::invalid_argument("modality name/matrix count mismatch");
  }
  std::size_t n = outcomes.size();
  if (n == 0) throw std::invalid_argument("dataset has no patients");
  for (std::size_t m = 0; m < modalities.size(); ++m) {
    if (modalities[m].rows() != n) {
      throw std::invalid_argument(
          "modality '" + modality_names[m] + "' has " +
          std::to_string(modalities[m].rows()) + " rows but survival table has " +
          std::to_string(n));
    }
    if (!modalities[m].all_finite()) {
      throw std::invalid_argument("modality '" + modality_names[m] +
                                  "' contains non-finite values");
    }
  }
  std::set<std::string> seen;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(outcomes[i].time > 0.0) || !std::isfinite(outcomes[i].time)) {
      throw std::invalid_argument("patient row " + std::to_string(i) +
                                  " has non-positive survival time");
    }
    if (!seen.insert(outcomes[i].patient_id).second) {
      throw std::invalid_argument("duplicate patient_id '" +
                                  outcomes[i].patient_id + "'");
    }
  }
}

namespace {

std::uint32_t read_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 |
         static_cast<std::uint32_t>(p[3]) << 24;
}

void push_u32le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

double f64_from_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = bits << 8 | p[i];
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

void push_f64le(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
}

}  // namespace

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw std::runtime_error("read failure on '" + path + "'");
  return buf.str();
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.flush();
  if (!out) throw std::runtime_error("write failure on '" + path + "'");
}

void write_f64_vector(const std::string& path, std::span<const double> values) {
  std::string out;
  out.reserve(values.size() * 8);
  for (double v : values) push_f64le(out, v);
  write_text_file(path, out);
}

std::vector<double> read_f64_vector(const std::string& path) {
  std::string raw = read_text_file(path);
  if (raw.size() % 8 != 0) {
    throw std::runtime_error("'" + path + "': size " + std::to_string(raw.size()) +
                             " is not a multiple of 8 bytes");
  }
  const auto* bytes = reinterpret_cast<const unsigned char*>(raw.data());
  std::vector<double> values(raw.size() / 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = f64_from_le(bytes + 8 * i);
  }
  return values;
}

Matrix read_emb1(const std::string& path) {
  std::string raw = read_text_file(path);
  const auto* bytes = reinterpret_cast<const unsigned char*>(raw.data());
  if (raw.size() < 12 || std::memcmp(raw.data(), "EMB1", 4) != 0) {
    throw std::runtime_error("'" + path +
                             "': missing EMB1 magic in 12-byte header");
  }
  std::uint32_t rows = read_u32le(bytes + 4);
  std::uint32_t cols = read_u32le(bytes + 8);
  std::size_t expected = 12 + static_cast<std::size_t>(rows) * cols * 8;
  if (raw.size() != expected) {
    throw std::runtime_error("'" + path + "': expected " +
                             std::to_string(expected) + " bytes for " +
                             std::to_string(rows) + "x" + std::to_string(cols) +
                             ", found " + std::to_string(raw.size()));
  }
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < static_cast<std::size_t>(rows) * cols; ++i) {
    double v = f64_from_le(bytes + 12 + 8 * i);
    if (!std::isfinite(v)) {
      throw std::runtime_error("'" + path + "': non-finite value at byte offset " +
                               std::to_string(12 + 8 * i));
    }
    m.data()[i] = v;
  }
  return m;
}

void write_emb1(const std::string& path, const Matrix& m) {
  if (m.rows() > 0xffffffffull || m.cols() > 0xffffffffull) {
    throw std::invalid_argument("matrix too large for EMB1 header");
  }
  std::string out;
  out.reserve(12 + m.rows() * m.cols() * 8);
  out += "EMB1";
  push_u32le(out, static_cast<std::uint32_t>(m.rows()));
  push_u32le(out, static_cast<std::uint32_t>(m.cols()));
  for (std::size_t i = 0; i < m.rows() * m.cols(); ++i) push_f64le(out, m.data()[i]);
  write_text_file(path, out);
}

std::vector<SurvivalRecord> read_survival_csv(const std::string& path) {
  std::string raw = read_text_file(path);
  std::istringstream in(raw);
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("'" + path + "': empty file");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "patient_id,time_months,event") {
    throw std::runtime_error("'" + path + "': bad header '" + line +
                             "', expected 'patient_id,time_months,event'");
  }
  std::vector<SurvivalRecord> records;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto c1 = line.find(',');
    auto c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
    if (c2 == std::string::npos || line.find(',', c2 + 1) != std::string::npos) {
      throw std::runtime_error("'" + path + "' row " + std::to_string(row) +
                               ": expected 3 comma-separated fields");
    }
    SurvivalRecord rec;
    rec.patient_id = line.substr(0, c1);
    std::string time_str = line.substr(c1 + 1, c2 - c1 - 1);
    std::string event_str = line.substr(c2 + 1);
    try {
      std::size_t used = 0;
      rec.time = std::stod(time_str, &used);
      if (used != time_str.size()) throw std::invalid_argument("trailing junk");
    } catch (const std::exception&) {
      throw std::runtime_error("'" + path + "' row " + std::to_string(row) +
                               ": unparseable time '" + time_str + "'");
    }
    if (!(rec.time > 0.0) || !std::isfinite(rec.time)) {
      throw std::runtime_error("'" + path + "' row " + std::to_string(row) +
                               ": time must be > 0, got '" + time_str + "'");
    }
    if (event_str == "0") {
      rec.event = false;
    } else if (event_str == "1") {
      rec.event = true;
    } else {
      throw std::runtime_error("'" + path + "' row " + std::to_string(row) +
                               ": event must be 0 or 1, got '" + event_str + "'");
    }
    if (rec.patient_id.empty()) {
      throw std::runtime_error("'" + path + "' row " + std::to_string(row) +
                               ": empty patient_id");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void write_survival_csv(const std::string& path,
                        std::span<const SurvivalRecord> outcomes) {
  std::string out = "patient_id,time_months,event\n";
  for (const auto& rec : outcomes) {
    out += rec.patient_id;
    out += ',';
    out += format_double(rec.time);
    out += ',';
    out += rec.event ? '1' : '0';
    out += '\n';
  }
  write_text_file(path, out);
}

MultimodalDataset load_dataset(const std::string& directory) {
  fs::path dir(directory);
  std::string meta_path = (dir / "meta.json").string();
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_text_file(meta_path));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("'" + meta_path + "': " + e.what());
  }

  MultimodalDataset ds;
  ds.source = meta.value("source", std::string("unknown"));
  if (meta.contains("seed")) {
    ds.seed = meta.at("seed").get<std::uint64_t>();
    ds.has_seed = true;
  }
  if (!meta.contains("modalities") || !meta["modalities"].is_array() ||
      meta["modalities"].empty()) {
    throw std::runtime_error("'" + meta_path +
                             "': missing or empty 'modalities' array");
  }
  if (!meta.contains("patient_ids") || !meta["patient_ids"].is_array()) {
    throw std::runtime_error("'" + meta_path + "': missing 'patient_ids' array");
  }

  ds.outcomes = read_survival_csv((dir / "survival.csv").string());
  const auto& ids = meta["patient_ids"];
  if (ids.size() != ds.outcomes.size()) {
    throw std::runtime_error("'" + meta_path + "': " + std::to_string(ids.size()) +
                             " patient_ids but survival.csv has " +
                             std::to_string(ds.outcomes.size()) + " rows");
  }
  for (std::size_t i = 0; i < ds.outcomes.size(); ++i) {
    if (ids[i].get<std::string>() != ds.outcomes[i].patient_id) {
      throw std::runtime_error("patient order mismatch at row " +
                               std::to_string(i) + ": meta.json has '" +
                               ids[i].get<std::string>() +
                               "', survival.csv has '" +
                               ds.outcomes[i].patient_id + "'");
    }
  }

  for (const auto& mod : meta["modalities"]) {
    std::string name = mod.at("name").get<std::string>();
    std::string file = mod.at("file").get<std::string>();
    std::string emb_path = (dir / file).string();
    Matrix m = read_emb1(emb_path);
    auto want_rows = mod.at("rows").get<std::size_t>();
    auto want_cols = mod.at("cols").get<std::size_t>();
    if (m.rows() != want_rows || m.cols() != want_cols) {
      throw std::runtime_error("'" + emb_path + "': meta.json promises " +
                               std::to_string(want_rows) + "x" +
                               std::to_string(want_cols) + " but file holds " +
                               m.shape_str());
    }
    ds.modality_names.push_back(std::move(name));
    ds.modalities.push_back(std::move(m));
  }
  ds.validate();
  return ds;
}

namespace {

std::string meta_json_text(const MultimodalDataset& ds) {
  JsonWriter w;
  w.begin_object();
  w.kv("format", "coxplain-dataset");
  w.kv("version", 1);
  w.kv("source", ds.source);
  if (ds.has_seed) w.kv("seed", ds.seed);
  w.key("n_patients").value(ds.n_patients());
  w.key("modalities").begin_array();
  for (std::size_t m = 0; m < ds.modalities.size(); ++m) {
    w.begin_object();
    w.kv("name", ds.modality_names[m]);
    w.kv("file", ds.modality_names[m] + ".emb1");
    w.kv("rows", ds.modalities[m].rows());
    w.kv("cols", ds.modalities[m].cols());
    w.end_object();
  }
  w.end_array();
  w.key("patient_ids").begin_array();
  for (const auto& rec : ds.outcomes) w.value(rec.patient_id);
  w.end_array();
  w.end_object();
  return w.str() + "\n";
}

}  // namespace

void save_dataset(const MultimodalDataset& dataset,
                  const std::string& directory) {
  dataset.validate();
  fs::path dir(directory);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw std::runtime_error("cannot create directory '" + directory +
                             "': " + ec.message());
  }
  write_text_file((dir / "meta.json").string(), meta_json_text(dataset));
  write_survival_csv((dir / "survival.csv").string(), dataset.outcomes);
  for (std::size_t m = 0; m < dataset.modalities.size(); ++m) {
    write_emb1((dir / (dataset.modality_names[m] + ".emb1")).string(),
               dataset.modalities[m]);
  }
}

std::vector<std::size_t> SplitResult::kfold_train(std::size_t fold) const {
  if (fold >= fold_test_indices.size()) {
    throw std::out_of_range("fold " + std::to_string(fold) + " out of range");
  }
  std::vector<std::size_t> train;
  for (std::size_t f = 0; f < fold_test_indices.size(); ++f) {
    if (f == fold) continue;
    train.insert(train.end(), fold_test_indices[f].begin(),
                 fold_test_indices[f].end());
  }
  std::sort(train.begin(), train.end());
  return train;
}

namespace {

/// Strata in a fixed order (events first, then censored); unstratified use
/// collapses to a single stratum.
std::vector<std::vector<std::size_t>> build_strata(
    const MultimodalDataset& ds, bool stratify) {
  std::vector<std::vector<std::size_t>> strata;
  if (!stratify) {
    strata.emplace_back(ds.n_patients());
    std::iota(strata[0].begin(), strata[0].end(), std::size_t{0});
    return strata;
  }
  strata.resize(2);
  for (std::size_t i = 0; i < ds.n_patients(); ++i) {
    strata[ds.outcomes[i].event ? 0 : 1].push_back(i);
  }
  if (strata[1].empty()) strata.pop_back();
  if (strata[0].empty()) strata.erase(strata.begin());
  return strata;
}

}  // namespace

SplitResult make_split(const MultimodalDataset& dataset,
                       const SplitSpec& spec) {
  std::size_t n = dataset.n_patients();
  if (n < 2) throw std::invalid_argument("make_split: need at least 2 patients");
  auto strata = build_strata(dataset, spec.stratify_by_event);

  SplitResult result;
  if (spec.kind == SplitSpec::Kind::Holdout) {
    if (!(spec.test_fraction > 0.0) || !(spec.test_fraction < 1.0)) {
      throw std::invalid_argument("holdout test fraction must be in (0, 1)");
    }
    for (const auto& s : strata) {
      if (s.size() < 2) {
        throw std::invalid_argument(
            "holdout: a stratum has fewer than 2 members (" +
            std::to_string(s.size()) + ")");
      }
    }
    std::size_t test_total = static_cast<std::size_t>(
        std::llround(spec.test_fraction * static_cast<double>(n)));
    test_total = std::max<std::size_t>(1, std::min(test_total, n - 1));

    // Largest-remainder allocation of the test quota across strata.
    std::vector<std::size_t> take(strata.size());
    std::vector<double> frac(strata.size());
    std::size_t assigned = 0;
    for (std::size_t s = 0; s < strata.size(); ++s) {
      double quota = spec.test_fraction * static_cast<double>(strata[s].size());
      take[s] = static_cast<std::size_t>(std::floor(quota));
      frac[s] = quota - std::floor(quota);
      assigned += take[s];
    }
    std::vector<std::size_t> order(strata.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return frac[a] > frac[b];
    });
    for (std::size_t r = 0; assigned < test_total; ++r) {
      std::size_t s = order[r % order.size()];
      if (take[s] < strata[s].size()) {
        ++take[s];
        ++assigned;
      }
    }
    while (assigned > test_total) {
      for (std::size_t r = order.size(); r-- > 0 && assigned > test_total;) {
        std::size_t s = order[r];
        if (take[s] > 0) {
          --take[s];
          --assigned;
        }
      }
    }

    for (std::size_t s = 0; s < strata.size(); ++s) {
      auto members = strata[s];
      RngStream rng = RngStream::derive(spec.seed, {0x5b17u, s});
      rng.shuffle(std::span<std::size_t>(members));
      // Clamp within stratum so neither side is emptied.
      std::size_t t = std::min(take[s], members.size() - 1);
      t = std::max<std::size_t>(t, members.size() >= 2 && take[s] > 0 ? 1 : 0);
      for (std::size_t i = 0; i < members.size(); ++i) {
        (i < t ? result.test_indices : result.train_indices).push_back(members[i]);
      }
    }
    std::sort(result.train_indices.begin(), result.train_indices.end());
    std::sort(result.test_indices.begin(), result.test_indices.end());
    if (result.train_indices.empty() || result.test_indices.empty()) {
      throw std::invalid_argument("holdout produced an empty partition");
    }
  } else {
    if (spec.k < 2) throw std::invalid_argument("kfold requires k >= 2");
    std::size_t k = static_cast<std::size_t>(spec.k);
    for (const auto& s : strata) {
      if (s.size() < k) {
        throw std::invalid_argument("kfold: stratum with " +
                                    std::to_string(s.size()) +
                                    " members is smaller than k=" +
                                    std::to_string(k));
      }
    }
    result.fold_test_indices.resize(k);
    std::size_t cursor = 0;
    for (std::size_t s = 0; s < strata.size(); ++s) {
      auto members = strata[s];
      RngStream rng = RngStream::derive(spec.seed, {0x5b17u, s});
      rng.shuffle(std::span<std::size_t>(members));
      for (std::size_t m : members) {
        result.fold_test_indices[cursor % k].push_back(m);
        ++cursor;
      }
    }
    for (auto& fold : result.fold_test_indices) std::sort(fold.begin(), fold.end());
  }
  return result;
}

}  // namespace coxplain
