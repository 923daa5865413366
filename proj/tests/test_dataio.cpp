#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "coxplain/dataio.hpp"
#include "coxplain/matrix.hpp"
#include "coxplain/rng.hpp"

using namespace coxplain;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("coxplain-test-" + std::to_string(RngStream(
                static_cast<std::uint64_t>(
                    std::chrono::steady_clock::now().time_since_epoch().count()))
                .next_u64()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

MultimodalDataset toy_dataset(std::size_t n, std::uint64_t seed,
                              double event_rate = 0.6) {
  RngStream rng(seed);
  MultimodalDataset ds;
  ds.modality_names = {"wsi", "rna"};
  Matrix a(n, 3), b(n, 2);
  for (std::size_t i = 0; i < n * 3; ++i) a.data()[i] = rng.next_gaussian();
  for (std::size_t i = 0; i < n * 2; ++i) b.data()[i] = rng.next_gaussian();
  ds.modalities = {std::move(a), std::move(b)};
  for (std::size_t i = 0; i < n; ++i) {
    ds.outcomes.push_back({"P" + std::to_string(i),
                           1.0 + 50.0 * rng.next_uniform(),
                           rng.next_uniform() < event_rate});
  }
  ds.source = "toy";
  ds.seed = seed;
  ds.has_seed = true;
  return ds;
}

}  // namespace

TEST_CASE("emb1 roundtrip preserves every bit") {
  TempDir tmp;
  Matrix m(3, 4);
  RngStream rng(7);
  for (std::size_t i = 0; i < 12; ++i) m.data()[i] = rng.next_gaussian() * 1e3;
  m(0, 0) = -0.0;
  m(2, 3) = 2.2250738585072014e-308;
  write_emb1(tmp.file("m.emb1"), m);
  Matrix back = read_emb1(tmp.file("m.emb1"));
  REQUIRE(back.rows() == 3);
  REQUIRE(back.cols() == 4);
  for (std::size_t i = 0; i < 12; ++i) CHECK(back.data()[i] == m.data()[i]);
  CHECK(std::signbit(back(0, 0)));
}

TEST_CASE("emb1 rejects bad magic and truncated payloads") {
  TempDir tmp;
  write_text_file(tmp.file("bad.emb1"), "XXXX\x02\x00\x00\x00\x02\x00\x00\x00");
  CHECK_THROWS_AS(read_emb1(tmp.file("bad.emb1")), std::runtime_error);

  Matrix m(2, 2);
  write_emb1(tmp.file("trunc.emb1"), m);
  std::string raw = read_text_file(tmp.file("trunc.emb1"));
  write_text_file(tmp.file("trunc.emb1"), raw.substr(0, raw.size() - 1));
  CHECK_THROWS_AS(read_emb1(tmp.file("trunc.emb1")), std::runtime_error);

  CHECK_THROWS_AS(read_emb1(tmp.file("missing.emb1")), std::runtime_error);
}

TEST_CASE("survival csv roundtrip and parse errors") {
  TempDir tmp;
  std::vector<SurvivalRecord> recs = {
      {"A", 12.5, true}, {"B", 3.0, false}, {"C", 0.125, true}};
  write_survival_csv(tmp.file("s.csv"), recs);
  auto back = read_survival_csv(tmp.file("s.csv"));
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].patient_id == recs[i].patient_id);
    CHECK(back[i].time == recs[i].time);
    CHECK(back[i].event == recs[i].event);
  }

  // CRLF and trailing blank lines are tolerated.
  write_text_file(tmp.file("crlf.csv"),
                  "patient_id,time_months,event\r\nA,1.5,1\r\n\r\n");
  auto crlf = read_survival_csv(tmp.file("crlf.csv"));
  REQUIRE(crlf.size() == 1);
  CHECK(crlf[0].time == 1.5);

  write_text_file(tmp.file("hdr.csv"), "id,time,event\nA,1,1\n");
  CHECK_THROWS_AS(read_survival_csv(tmp.file("hdr.csv")), std::runtime_error);
  write_text_file(tmp.file("time.csv"),
                  "patient_id,time_months,event\nA,abc,1\n");
  CHECK_THROWS_AS(read_survival_csv(tmp.file("time.csv")), std::runtime_error);
  write_text_file(tmp.file("neg.csv"), "patient_id,time_months,event\nA,-2,1\n");
  CHECK_THROWS_AS(read_survival_csv(tmp.file("neg.csv")), std::runtime_error);
  write_text_file(tmp.file("ev.csv"), "patient_id,time_months,event\nA,2,yes\n");
  CHECK_THROWS_AS(read_survival_csv(tmp.file("ev.csv")), std::runtime_error);
  write_text_file(tmp.file("cols.csv"), "patient_id,time_months,event\nA,2\n");
  CHECK_THROWS_AS(read_survival_csv(tmp.file("cols.csv")), std::runtime_error);
}

TEST_CASE("dataset save/load roundtrip") {
  TempDir tmp;
  auto ds = toy_dataset(17, 42);
  save_dataset(ds, tmp.file("ds"));
  auto back = load_dataset(tmp.file("ds"));
  CHECK(back.modality_names == ds.modality_names);
  CHECK(back.source == "toy");
  CHECK(back.has_seed);
  CHECK(back.seed == 42);
  REQUIRE(back.n_patients() == 17);
  for (std::size_t m = 0; m < 2; ++m) {
    REQUIRE(back.modalities[m].rows() == ds.modalities[m].rows());
    REQUIRE(back.modalities[m].cols() == ds.modalities[m].cols());
    for (std::size_t i = 0;
         i < ds.modalities[m].rows() * ds.modalities[m].cols(); ++i) {
      CHECK(back.modalities[m].data()[i] == ds.modalities[m].data()[i]);
    }
  }
  for (std::size_t i = 0; i < 17; ++i) {
    CHECK(back.outcomes[i].patient_id == ds.outcomes[i].patient_id);
    CHECK(back.outcomes[i].time == ds.outcomes[i].time);
    CHECK(back.outcomes[i].event == ds.outcomes[i].event);
  }
}

TEST_CASE("load_dataset rejects inconsistent directories") {
  TempDir tmp;
  auto ds = toy_dataset(6, 1);
  save_dataset(ds, tmp.file("ds"));

  // Swap two survival rows so csv order disagrees with meta.json.
  auto recs = ds.outcomes;
  std::swap(recs[0], recs[1]);
  write_survival_csv(tmp.file("ds") + "/survival.csv", recs);
  CHECK_THROWS_AS(load_dataset(tmp.file("ds")), std::runtime_error);

  CHECK_THROWS_AS(load_dataset(tmp.file("nowhere")), std::runtime_error);
}

TEST_CASE("dataset validate catches structural problems") {
  auto ds = toy_dataset(5, 3);
  ds.validate();

  auto dup = ds;
  dup.outcomes[2].patient_id = dup.outcomes[0].patient_id;
  CHECK_THROWS_AS(dup.validate(), std::invalid_argument);

  auto bad_rows = ds;
  bad_rows.modalities[1] = Matrix(4, 2);
  CHECK_THROWS_AS(bad_rows.validate(), std::invalid_argument);

  auto bad_time = ds;
  bad_time.outcomes[1].time = 0.0;
  CHECK_THROWS_AS(bad_time.validate(), std::invalid_argument);

  auto non_finite = ds;
  non_finite.modalities[0](0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(non_finite.validate(), std::invalid_argument);

  auto empty = MultimodalDataset{};
  CHECK_THROWS_AS(empty.validate(), std::invalid_argument);
}

TEST_CASE("subset keeps rows aligned") {
  auto ds = toy_dataset(10, 9);
  std::vector<std::size_t> rows = {7, 2, 2};
  auto sub = ds.subset(rows);
  REQUIRE(sub.n_patients() == 3);
  CHECK(sub.outcomes[0].patient_id == "P7");
  CHECK(sub.outcomes[1].patient_id == "P2");
  CHECK(sub.outcomes[2].patient_id == "P2");
  CHECK(sub.modalities[0](0, 1) == ds.modalities[0](7, 1));
  CHECK(sub.modalities[1](1, 0) == ds.modalities[1](2, 0));

  std::vector<std::size_t> oob = {10};
  CHECK_THROWS_AS(ds.subset(oob), std::out_of_range);
}

TEST_CASE("stratified holdout split arithmetic") {
  // Force exactly 34 events out of 100 so the quota math is predictable.
  auto ds = toy_dataset(100, 11);
  for (std::size_t i = 0; i < 100; ++i) ds.outcomes[i].event = i < 34;

  SplitSpec spec;
  spec.kind = SplitSpec::Kind::Holdout;
  spec.test_fraction = 0.2;
  spec.seed = 5;
  auto split = make_split(ds, spec);

  CHECK(split.test_indices.size() == 20);
  CHECK(split.train_indices.size() == 80);
  std::size_t test_events = 0;
  for (std::size_t i : split.test_indices) {
    if (ds.outcomes[i].event) ++test_events;
  }
  // floor(0.2*34)=6 plus one largest-remainder top-up.
  CHECK(test_events == 7);

  // Partition: disjoint and complete.
  std::set<std::size_t> all(split.train_indices.begin(),
                            split.train_indices.end());
  all.insert(split.test_indices.begin(), split.test_indices.end());
  CHECK(all.size() == 100);
  CHECK(*all.rbegin() == 99);

  CHECK(std::is_sorted(split.test_indices.begin(), split.test_indices.end()));
  CHECK(std::is_sorted(split.train_indices.begin(), split.train_indices.end()));

  // Same seed reproduces the split; a different seed moves it.
  auto again = make_split(ds, spec);
  CHECK(again.test_indices == split.test_indices);
  spec.seed = 6;
  auto moved = make_split(ds, spec);
  CHECK(moved.test_indices != split.test_indices);
}

TEST_CASE("holdout rejects degenerate requests") {
  auto ds = toy_dataset(10, 2);
  SplitSpec spec;
  spec.test_fraction = 0.0;
  CHECK_THROWS_AS(make_split(ds, spec), std::invalid_argument);
  spec.test_fraction = 1.0;
  CHECK_THROWS_AS(make_split(ds, spec), std::invalid_argument);

  auto one = ds.subset(std::vector<std::size_t>{0});
  spec.test_fraction = 0.5;
  CHECK_THROWS_AS(make_split(one, spec), std::invalid_argument);
}

TEST_CASE("stratified kfold partitions evenly") {
  auto ds = toy_dataset(100, 13);
  for (std::size_t i = 0; i < 100; ++i) ds.outcomes[i].event = i < 34;

  SplitSpec spec;
  spec.kind = SplitSpec::Kind::KFold;
  spec.k = 10;
  spec.seed = 21;
  auto split = make_split(ds, spec);
  REQUIRE(split.fold_test_indices.size() == 10);

  std::set<std::size_t> seen;
  for (const auto& fold : split.fold_test_indices) {
    CHECK(fold.size() == 10);
    std::size_t events = 0;
    for (std::size_t i : fold) {
      CHECK(seen.insert(i).second);
      if (ds.outcomes[i].event) events += 1;
    }
    // 34 events round-robin over 10 folds: each fold gets 3 or 4.
    CHECK(events >= 3);
    CHECK(events <= 4);
  }
  CHECK(seen.size() == 100);

  auto train0 = split.kfold_train(0);
  CHECK(train0.size() == 90);
  CHECK(std::is_sorted(train0.begin(), train0.end()));
  for (std::size_t i : train0) {
    CHECK(!std::binary_search(split.fold_test_indices[0].begin(),
                              split.fold_test_indices[0].end(), i));
  }
  CHECK_THROWS_AS(split.kfold_train(10), std::out_of_range);

  spec.k = 1;
  CHECK_THROWS_AS(make_split(ds, spec), std::invalid_argument);
  spec.k = 40;  // events stratum only has 34 members
  CHECK_THROWS_AS(make_split(ds, spec), std::invalid_argument);
}

TEST_CASE("f64 vector files roundtrip exactly") {
  TempDir tmp;
  std::vector<double> values = {0.0, -0.0, 1.0 / 3.0, -1e300,
                                2.2250738585072014e-308};
  write_f64_vector(tmp.file("v.bin"), values);
  auto back = read_f64_vector(tmp.file("v.bin"));
  REQUIRE(back.size() == values.size());
  for (std::size_t i = 0; i < values.size(); ++i) CHECK(back[i] == values[i]);
  CHECK(std::signbit(back[1]));

  write_text_file(tmp.file("odd.bin"), "12345");
  CHECK_THROWS_AS(read_f64_vector(tmp.file("odd.bin")), std::runtime_error);
}

TEST_CASE("text file helpers preserve binary content") {
  TempDir tmp;
  std::string payload("a\0b\r\n\xff", 6);
  write_text_file(tmp.file("t.bin"), payload);
  CHECK(read_text_file(tmp.file("t.bin")) == payload);
  CHECK_THROWS_AS(read_text_file(tmp.file("absent")), std::runtime_error);
}
