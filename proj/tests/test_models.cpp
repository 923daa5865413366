#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "coxplain/dataio.hpp"
#include "coxplain/models.hpp"
#include "coxplain/rng.hpp"
#include "oracles.hpp"

using namespace coxplain;

namespace {

const ArchKind kAllKinds[] = {
    ArchKind::EarlyMlp,  ArchKind::CrossAttention, ArchKind::Bilinear,
    ArchKind::Gated,     ArchKind::UnimodalA,      ArchKind::UnimodalB,
    ArchKind::LateLinear,
};

Matrix random_inputs(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Matrix m(rows, cols);
  RngStream r = RngStream::derive(seed, {rows, cols});
  for (double& v : m.data()) v = r.next_gaussian();
  return m;
}

/// Tiny spec so finite-difference loops stay cheap.
ArchitectureSpec small_spec(ArchKind kind) {
  ArchitectureSpec s;
  s.kind = kind;
  s.embed_dim_a = 3;
  s.embed_dim_b = 3;
  s.hidden_dims = {4, 3};
  s.dropout = 0.0;
  s.bilinear_rank = 2;
  s.attention_dim = 3;
  s.branch_dim = 3;
  s.head_hidden = 4;
  return s;
}

}  // namespace

TEST_CASE("architecture names roundtrip") {
  for (ArchKind kind : kAllKinds) {
    CHECK(arch_kind_from_string(arch_kind_to_string(kind)) == kind);
  }
  CHECK_THROWS_AS(arch_kind_from_string("transformer"), std::invalid_argument);
}

TEST_CASE("spec validation rejects bad dimensions") {
  auto spec = ArchitectureSpec::desk(ArchKind::EarlyMlp);
  spec.validate();

  auto zero_embed = spec;
  zero_embed.embed_dim_a = 0;
  CHECK_THROWS_AS(zero_embed.validate(), std::invalid_argument);

  auto no_hidden = spec;
  no_hidden.hidden_dims.clear();
  CHECK_THROWS_AS(no_hidden.validate(), std::invalid_argument);

  auto bad_dropout = spec;
  bad_dropout.dropout = 1.0;
  CHECK_THROWS_AS(bad_dropout.validate(), std::invalid_argument);

  auto uneven_attn = ArchitectureSpec::desk(ArchKind::CrossAttention);
  uneven_attn.embed_dim_b = 16;
  CHECK_THROWS_AS(uneven_attn.validate(), std::invalid_argument);
}

TEST_CASE("parameter counts: hand tallies vs formula vs graph") {
  // Hand-tallied from the layer shapes (weights in*out plus bias out; the
  // attention/bilinear projections carry no bias).
  const std::unordered_map<ArchKind, std::size_t> desk_expected = {
      {ArchKind::EarlyMlp, 2353},  {ArchKind::CrossAttention, 3617},
      {ArchKind::Bilinear, 673},   {ArchKind::Gated, 2113},
      {ArchKind::UnimodalA, 545},  {ArchKind::UnimodalB, 545},
      {ArchKind::LateLinear, 1093},
  };
  for (ArchKind kind : kAllKinds) {
    auto spec = ArchitectureSpec::desk(kind);
    CAPTURE(arch_kind_to_string(kind));
    CHECK(parameter_count(spec) == desk_expected.at(kind));
    CHECK(build_graph(spec).param_count() == desk_expected.at(kind));
  }

  auto paper_mlp = ArchitectureSpec::paper(ArchKind::EarlyMlp);
  CHECK(parameter_count(paper_mlp) == 8'800'657u);
  CHECK(build_graph(paper_mlp).param_count() == 8'800'657u);

  auto paper_bilinear = ArchitectureSpec::paper(ArchKind::Bilinear);
  std::size_t core = paper_bilinear.embed_dim_a * paper_bilinear.bilinear_rank +
                     paper_bilinear.embed_dim_b * paper_bilinear.bilinear_rank;
  CHECK(core == 262'144u);
  // core plus the scalar head (64->256 hidden, 256->1 out).
  CHECK(parameter_count(paper_bilinear) == core + 16'640u + 257u);

  auto paper_uni = ArchitectureSpec::paper(ArchKind::UnimodalA);
  CHECK(parameter_count(paper_uni) == 524'801u);
  for (ArchKind kind : kAllKinds) {
    auto spec = ArchitectureSpec::paper(kind);
    CHECK(parameter_count(spec) == build_graph(spec).param_count());
  }
}

TEST_CASE("initialization is deterministic in seed") {
  auto spec = ArchitectureSpec::desk(ArchKind::Gated);
  auto m1 = build(spec, 42);
  auto m2 = build(spec, 42);
  auto m3 = build(spec, 43);
  REQUIRE(m1.params.size() == parameter_count(spec));
  CHECK(m1.params == m2.params);
  CHECK(m1.params != m3.params);
  for (double v : m1.params) CHECK(std::isfinite(v));
}

TEST_CASE("every architecture passes a finite-difference check") {
  for (ArchKind kind : kAllKinds) {
    CAPTURE(arch_kind_to_string(kind));
    auto spec = small_spec(kind);
    Graph g = build_graph(spec);
    initialize_params(g, spec, 11);

    Matrix a = random_inputs(4, spec.embed_dim_a, 1);
    Matrix b = random_inputs(4, spec.embed_dim_b, 2);
    std::unordered_map<std::string, const Matrix*> ins = {{"A", &a},
                                                          {"B", &b}};
    std::vector<double> params(g.param_count());
    g.get_params(params);

    auto loss = [&](std::span<const double> p) {
      g.set_params(p);
      const Matrix& out = g.forward(ins);
      double total = 0.0;
      for (double v : out.data()) total += v;
      return total;
    };
    loss(params);
    const Matrix& out = g.value(g.output());
    REQUIRE(out.rows() == 4);
    REQUIRE(out.cols() == 1);
    Matrix adjoint(out.rows(), out.cols(), 1.0);
    std::vector<double> grad(params.size());
    g.backward_into(adjoint, grad);
    for (std::size_t i = 0; i < params.size(); ++i) {
      double fd = oracles::central_diff(loss, params, i, 1e-5);
      CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("predict is pure and row-independent") {
  for (ArchKind kind : kAllKinds) {
    CAPTURE(arch_kind_to_string(kind));
    auto spec = ArchitectureSpec::desk(kind);
    auto model = build(spec, 7);
    Matrix a = random_inputs(9, spec.embed_dim_a, 3);
    Matrix b = random_inputs(9, spec.embed_dim_b, 4);

    auto full = predict(model, a, b);
    auto again = predict(model, a, b);
    REQUIRE(full.size() == 9);
    CHECK(full == again);

    std::vector<std::size_t> rows = {8, 0, 5};
    auto sub = predict(model, gather_rows(a, rows), gather_rows(b, rows));
    REQUIRE(sub.size() == 3);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      CHECK(sub[i] == full[rows[i]]);
    }
  }
}

TEST_CASE("dropout only acts in training mode") {
  auto spec = ArchitectureSpec::desk(ArchKind::EarlyMlp);
  spec.dropout = 0.5;
  auto model = build(spec, 99);
  auto no_drop = model;
  no_drop.spec.dropout = 0.0;

  Matrix a = random_inputs(6, spec.embed_dim_a, 5);
  Matrix b = random_inputs(6, spec.embed_dim_b, 6);
  CHECK(predict(model, a, b) == predict(no_drop, a, b));
}

TEST_CASE("training learns a unimodal signal deterministically") {
  // Risk is driven by the first coordinate of modality A.
  RngStream rng(404);
  std::size_t n = 60;
  MultimodalDataset ds;
  ds.modality_names = {"modA", "modB"};
  Matrix a(n, 4), b(n, 4);
  for (double& v : a.data()) v = rng.next_gaussian();
  for (double& v : b.data()) v = rng.next_gaussian();
  for (std::size_t i = 0; i < n; ++i) {
    double hazard = std::exp(1.4 * a(i, 0));
    double t = -std::log(rng.next_uniform() + 1e-12) / hazard;
    ds.outcomes.push_back({"P" + std::to_string(i), 0.01 + t,
                           rng.next_uniform() < 0.75});
  }
  ds.modalities = {std::move(a), std::move(b)};

  std::vector<std::size_t> train_idx, val_idx;
  for (std::size_t i = 0; i < n; ++i) {
    (i < 45 ? train_idx : val_idx).push_back(i);
  }

  ArchitectureSpec spec;
  spec.kind = ArchKind::EarlyMlp;
  spec.embed_dim_a = 4;
  spec.embed_dim_b = 4;
  spec.hidden_dims = {8};
  spec.dropout = 0.0;

  TrainHyperparams hyper;
  hyper.lr = 5e-3;
  hyper.max_epochs = 80;
  hyper.patience = 80;

  auto model = train(spec, ds, train_idx, val_idx, hyper, 12);
  CHECK(model.epochs_run >= 1);
  CHECK(model.best_val_cindex > 0.6);
  CHECK(model.best_val_cindex <= 1.0);
  for (double v : model.params) CHECK(std::isfinite(v));
  CHECK(model.modality_names == ds.modality_names);
  REQUIRE(model.train_means.size() == 2);
  CHECK(model.train_means[0].size() == 4);

  auto rerun = train(spec, ds, train_idx, val_idx, hyper, 12);
  CHECK(rerun.params == model.params);
  CHECK(rerun.best_val_cindex == model.best_val_cindex);
}

TEST_CASE("model checkpoints roundtrip") {
  namespace fs = std::filesystem;
  auto spec = ArchitectureSpec::desk(ArchKind::LateLinear);
  auto model = build(spec, 31);
  model.best_val_cindex = 0.7125;
  model.epochs_run = 17;
  model.modality_names = {"wsi", "rna"};
  model.train_means = {{0.5, -0.25}, {1.0 / 3.0}};

  fs::path dir = fs::temp_directory_path() / "coxplain-test-model-roundtrip";
  fs::remove_all(dir);
  save_model(model, dir.string());
  auto back = load_model(dir.string());
  fs::remove_all(dir);

  CHECK(back.spec.kind == spec.kind);
  CHECK(back.spec.embed_dim_a == spec.embed_dim_a);
  CHECK(back.spec.embed_dim_b == spec.embed_dim_b);
  CHECK(back.spec.hidden_dims == spec.hidden_dims);
  CHECK(back.spec.dropout == spec.dropout);
  CHECK(back.spec.head_hidden == spec.head_hidden);
  CHECK(back.params == model.params);
  CHECK(back.seed == model.seed);
  CHECK(back.epochs_run == 17);
  CHECK(back.best_val_cindex == 0.7125);
  CHECK(back.modality_names == model.modality_names);
  CHECK(back.train_means == model.train_means);

  CHECK_THROWS_AS(load_model("/nonexistent/coxplain-model"),
                  std::runtime_error);
}
