#include "coxplain/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "coxplain/adam.hpp"
#include "coxplain/json_writer.hpp"
#include "coxplain/rng.hpp"
#include "coxplain/survival.hpp"

namespace fs = std::filesystem;

namespace coxplain {

namespace {

// Stream labels so every stochastic piece of training owns an independent
// substream of the run seed.
constexpr std::uint64_t kStreamInit = 0x11;
constexpr std::uint64_t kStreamEpochShuffle = 0x22;
constexpr std::uint64_t kStreamDropout = 0x33;

enum class InitRule { KaimingUniform, XavierUniform, ZeroBias };

struct ParamPlan {
  std::size_t fan_in = 0;
  std::size_t fan_out = 0;
  InitRule rule = InitRule::ZeroBias;
};

class Builder {
 public:
  explicit Builder(const ArchitectureSpec& spec) : spec_(spec) {}

  Graph::NodeId linear(Graph::NodeId x, std::size_t in, std::size_t out,
                       InitRule rule, const std::string& name) {
    Graph::NodeId w = g.param(name + ".weight", Matrix(in, out));
    plans.push_back({in, out, rule});
    Graph::NodeId b = g.param(name + ".bias", Matrix(1, out));
    plans.push_back({in, out, InitRule::ZeroBias});
    return g.add(g.matmul(x, w), b);
  }

  /// Bias-free projection with Xavier init (attention / gate style).
  Graph::NodeId projection_weight(std::size_t in, std::size_t out,
                                  const std::string& name) {
    Graph::NodeId w = g.param(name + ".weight", Matrix(in, out));
    plans.push_back({in, out, InitRule::XavierUniform});
    return w;
  }

  Graph::NodeId relu_drop(Graph::NodeId x) {
    Graph::NodeId r = g.relu(x);
    if (spec_.dropout > 0.0) r = g.dropout(r, spec_.dropout);
    return r;
  }

  /// hidden-ReLU-dropout then linear scalar head.
  Graph::NodeId scalar_head(Graph::NodeId x, std::size_t in,
                            const std::string& name) {
    Graph::NodeId h =
        relu_drop(linear(x, in, spec_.head_hidden, InitRule::KaimingUniform,
                         name + ".hidden"));
    return linear(h, spec_.head_hidden, 1, InitRule::XavierUniform,
                  name + ".out");
  }

  Graph g;
  std::vector<ParamPlan> plans;

 private:
  const ArchitectureSpec& spec_;
};

void build_early_mlp(Builder& b, const ArchitectureSpec& spec,
                     Graph::NodeId in_a, Graph::NodeId in_b) {
  Graph::NodeId x = b.g.concat_cols(in_a, in_b);
  std::size_t d = spec.embed_dim_a + spec.embed_dim_b;
  for (std::size_t i = 0; i < spec.hidden_dims.size(); ++i) {
    x = b.relu_drop(b.linear(x, d, spec.hidden_dims[i],
                             InitRule::KaimingUniform,
                             "trunk" + std::to_string(i)));
    d = spec.hidden_dims[i];
  }
  b.g.mark_output(b.linear(x, d, 1, InitRule::XavierUniform, "out"));
}

void build_unimodal(Builder& b, Graph::NodeId in, std::size_t dim) {
  b.g.mark_output(b.scalar_head(in, dim, "head"));
}

void build_late_linear(Builder& b, const ArchitectureSpec& spec,
                       Graph::NodeId in_a, Graph::NodeId in_b) {
  Graph::NodeId h_a = b.scalar_head(in_a, spec.embed_dim_a, "branch_a");
  Graph::NodeId h_b = b.scalar_head(in_b, spec.embed_dim_b, "branch_b");
  b.g.tap("head_a", h_a);
  b.g.tap("head_b", h_b);
  Graph::NodeId both = b.g.concat_cols(h_a, h_b);
  b.g.mark_output(b.linear(both, 2, 1, InitRule::XavierUniform, "combine"));
}

void build_bilinear(Builder& b, const ArchitectureSpec& spec,
                    Graph::NodeId in_a, Graph::NodeId in_b) {
  Graph::NodeId w1 =
      b.projection_weight(spec.embed_dim_a, spec.bilinear_rank, "proj_a");
  Graph::NodeId w2 =
      b.projection_weight(spec.embed_dim_b, spec.bilinear_rank, "proj_b");
  Graph::NodeId z = b.g.multiply(b.g.matmul(in_a, w1), b.g.matmul(in_b, w2));
  b.g.tap("bilinear_z", z);
  b.g.mark_output(b.scalar_head(z, spec.bilinear_rank, "head"));
}

void build_gated(Builder& b, const ArchitectureSpec& spec,
                 Graph::NodeId in_a, Graph::NodeId in_b) {
  Graph::NodeId both = b.g.concat_cols(in_a, in_b);
  Graph::NodeId alpha = b.g.sigmoid(
      b.linear(both, spec.embed_dim_a + spec.embed_dim_b, spec.branch_dim,
               InitRule::XavierUniform, "gate"));
  Graph::NodeId f = b.relu_drop(b.linear(in_a, spec.embed_dim_a,
                                         spec.branch_dim,
                                         InitRule::KaimingUniform, "f"));
  Graph::NodeId gg = b.relu_drop(b.linear(in_b, spec.embed_dim_b,
                                          spec.branch_dim,
                                          InitRule::KaimingUniform, "g"));
  // z = alpha*f + (1-alpha)*g, written as alpha*(f-g) + g.
  Graph::NodeId z =
      b.g.add(b.g.multiply(alpha, b.g.add(f, b.g.scale(gg, -1.0))), gg);
  b.g.tap("gate_alpha", alpha);
  b.g.tap("branch_f", f);
  b.g.tap("branch_g", gg);
  b.g.tap("gated_z", z);
  b.g.mark_output(
      b.linear(z, spec.branch_dim, 1, InitRule::XavierUniform, "out"));
}

/// One attention direction with a single token per modality. The query comes
/// from `q_src`; keys and values for both tokens share per-direction
/// projections, so equal token embeddings yield exactly uniform weights.
Graph::NodeId attention_direction(Builder& b, const ArchitectureSpec& spec,
                                  Graph::NodeId q_src, Graph::NodeId tok1,
                                  Graph::NodeId tok2, std::size_t dim,
                                  const std::string& name) {
  std::size_t a = spec.attention_dim;
  Graph::NodeId wq = b.projection_weight(dim, a, name + ".query");
  Graph::NodeId wk = b.projection_weight(dim, a, name + ".key");
  Graph::NodeId wv = b.projection_weight(dim, a, name + ".value");
  Graph::NodeId q = b.g.matmul(q_src, wq);
  Graph::NodeId k1 = b.g.matmul(tok1, wk);
  Graph::NodeId k2 = b.g.matmul(tok2, wk);
  Graph::NodeId v1 = b.g.matmul(tok1, wv);
  Graph::NodeId v2 = b.g.matmul(tok2, wv);
  // row_mean is (1/a) * dot, so scaling by sqrt(a) gives dot / sqrt(a).
  double s = std::sqrt(static_cast<double>(a));
  Graph::NodeId l1 = b.g.scale(b.g.row_mean(b.g.multiply(q, k1)), s);
  Graph::NodeId l2 = b.g.scale(b.g.row_mean(b.g.multiply(q, k2)), s);
  Graph::NodeId weights = b.g.softmax_rows(b.g.concat_cols(l1, l2));
  b.g.tap("attn_weights_" + name.substr(name.size() - 1), weights);

  // Broadcast the two weights across the value columns: E is the 2 x 2a
  // block indicator, F = [I; I] sums the two weighted blocks back to n x a.
  Matrix e(2, 2 * a);
  for (std::size_t j = 0; j < a; ++j) {
    e(0, j) = 1.0;
    e(1, a + j) = 1.0;
  }
  Matrix f(2 * a, a);
  for (std::size_t j = 0; j < a; ++j) {
    f(j, j) = 1.0;
    f(a + j, j) = 1.0;
  }
  Graph::NodeId wide = b.g.matmul(weights, b.g.constant(std::move(e)));
  Graph::NodeId vals = b.g.concat_cols(v1, v2);
  return b.g.matmul(b.g.multiply(wide, vals), b.g.constant(std::move(f)));
}

void build_cross_attention(Builder& b, const ArchitectureSpec& spec,
                           Graph::NodeId in_a, Graph::NodeId in_b) {
  Graph::NodeId att_a = attention_direction(b, spec, in_a, in_a, in_b,
                                            spec.embed_dim_a, "dir_a");
  Graph::NodeId att_b = attention_direction(b, spec, in_b, in_a, in_b,
                                            spec.embed_dim_b, "dir_b");
  b.g.tap("attended_a", att_a);
  b.g.tap("attended_b", att_b);
  Graph::NodeId h = b.g.concat_cols(att_a, att_b);
  b.g.mark_output(b.scalar_head(h, 2 * spec.attention_dim, "head"));
}

Graph build_graph_impl(const ArchitectureSpec& spec,
                       std::vector<ParamPlan>& plans) {
  spec.validate();
  Builder b(spec);
  Graph::NodeId in_a = b.g.input("A");
  Graph::NodeId in_b = b.g.input("B");
  switch (spec.kind) {
    case ArchKind::EarlyMlp: build_early_mlp(b, spec, in_a, in_b); break;
    case ArchKind::CrossAttention: build_cross_attention(b, spec, in_a, in_b); break;
    case ArchKind::Bilinear: build_bilinear(b, spec, in_a, in_b); break;
    case ArchKind::Gated: build_gated(b, spec, in_a, in_b); break;
    case ArchKind::UnimodalA: build_unimodal(b, in_a, spec.embed_dim_a); break;
    case ArchKind::UnimodalB: build_unimodal(b, in_b, spec.embed_dim_b); break;
    case ArchKind::LateLinear: build_late_linear(b, spec, in_a, in_b); break;
  }
  plans = std::move(b.plans);
  return std::move(b.g);
}

void initialize_from_plans(Graph& graph, const std::vector<ParamPlan>& plans,
                           std::uint64_t seed) {
  const auto& nodes = graph.param_nodes();
  if (nodes.size() != plans.size()) {
    throw std::logic_error("parameter plan and graph disagree");
  }
  RngStream rng = RngStream::derive(seed, {kStreamInit});
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    Matrix& m = graph.param_value(nodes[i]);
    double bound = 0.0;
    switch (plans[i].rule) {
      case InitRule::ZeroBias:
        std::fill(m.data().begin(), m.data().end(), 0.0);
        continue;
      case InitRule::KaimingUniform:
        bound = std::sqrt(6.0 / static_cast<double>(plans[i].fan_in));
        break;
      case InitRule::XavierUniform:
        bound = std::sqrt(6.0 / static_cast<double>(plans[i].fan_in +
                                                    plans[i].fan_out));
        break;
    }
    for (double& v : m.data()) v = (2.0 * rng.next_uniform() - 1.0) * bound;
  }
}

}  // namespace

ArchKind arch_kind_from_string(std::string_view s) {
  if (s == "early-mlp") return ArchKind::EarlyMlp;
  if (s == "cross-attention") return ArchKind::CrossAttention;
  if (s == "bilinear") return ArchKind::Bilinear;
  if (s == "gated") return ArchKind::Gated;
  if (s == "unimodal-a") return ArchKind::UnimodalA;
  if (s == "unimodal-b") return ArchKind::UnimodalB;
  if (s == "late-linear") return ArchKind::LateLinear;
  throw std::invalid_argument("unknown architecture '" + std::string(s) +
                              "' (expected early-mlp, cross-attention, "
                              "bilinear, gated, unimodal-a, unimodal-b, or "
                              "late-linear)");
}

std::string arch_kind_to_string(ArchKind kind) {
  switch (kind) {
    case ArchKind::EarlyMlp: return "early-mlp";
    case ArchKind::CrossAttention: return "cross-attention";
    case ArchKind::Bilinear: return "bilinear";
    case ArchKind::Gated: return "gated";
    case ArchKind::UnimodalA: return "unimodal-a";
    case ArchKind::UnimodalB: return "unimodal-b";
    case ArchKind::LateLinear: return "late-linear";
  }
  throw std::logic_error("unreachable");
}

void ArchitectureSpec::validate() const {
  if (embed_dim_a == 0 || embed_dim_b == 0) {
    throw std::invalid_argument("embedding dims must be positive");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw std::invalid_argument("dropout must lie in [0, 1)");
  }
  if (kind == ArchKind::EarlyMlp && hidden_dims.empty()) {
    throw std::invalid_argument("early-mlp needs at least one hidden dim");
  }
  for (std::size_t h : hidden_dims) {
    if (h == 0) throw std::invalid_argument("hidden dims must be positive");
  }
  if (bilinear_rank == 0 || attention_dim == 0 || branch_dim == 0 ||
      head_hidden == 0) {
    throw std::invalid_argument("all architecture dims must be positive");
  }
  if (kind == ArchKind::CrossAttention && embed_dim_a != embed_dim_b) {
    throw std::invalid_argument(
        "cross-attention shares key/value projections per direction and "
        "needs equal embedding dims");
  }
}

ArchitectureSpec ArchitectureSpec::desk(ArchKind kind) {
  ArchitectureSpec s;
  s.kind = kind;
  s.embed_dim_a = 32;
  s.embed_dim_b = 32;
  s.hidden_dims = {32, 8};
  s.dropout = 0.1;
  s.bilinear_rank = 8;
  s.attention_dim = 16;
  s.branch_dim = 16;
  s.head_hidden = 16;
  return s;
}

ArchitectureSpec ArchitectureSpec::paper(ArchKind kind) {
  ArchitectureSpec s;
  s.kind = kind;
  s.embed_dim_a = 2048;
  s.embed_dim_b = 2048;
  s.hidden_dims = {2048, 200};
  s.dropout = 0.25;
  s.bilinear_rank = 64;
  s.attention_dim = 64;
  s.branch_dim = 256;
  s.head_hidden = 256;
  return s;
}

Graph build_graph(const ArchitectureSpec& spec) {
  std::vector<ParamPlan> plans;
  return build_graph_impl(spec, plans);
}

void initialize_params(Graph& graph, const ArchitectureSpec& spec,
                       std::uint64_t seed) {
  std::vector<ParamPlan> plans;
  Graph throwaway = build_graph_impl(spec, plans);
  initialize_from_plans(graph, plans, seed);
}

std::size_t parameter_count(const ArchitectureSpec& spec) {
  spec.validate();
  auto lin = [](std::size_t in, std::size_t out) { return in * out + out; };
  std::size_t head = lin(spec.head_hidden, 1);
  switch (spec.kind) {
    case ArchKind::EarlyMlp: {
      std::size_t total = 0;
      std::size_t d = spec.embed_dim_a + spec.embed_dim_b;
      for (std::size_t h : spec.hidden_dims) {
        total += lin(d, h);
        d = h;
      }
      return total + lin(d, 1);
    }
    case ArchKind::CrossAttention:
      return 6 * spec.embed_dim_a * spec.attention_dim +
             lin(2 * spec.attention_dim, spec.head_hidden) + head;
    case ArchKind::Bilinear:
      return spec.embed_dim_a * spec.bilinear_rank +
             spec.embed_dim_b * spec.bilinear_rank +
             lin(spec.bilinear_rank, spec.head_hidden) + head;
    case ArchKind::Gated:
      return lin(spec.embed_dim_a + spec.embed_dim_b, spec.branch_dim) +
             lin(spec.embed_dim_a, spec.branch_dim) +
             lin(spec.embed_dim_b, spec.branch_dim) + lin(spec.branch_dim, 1);
    case ArchKind::UnimodalA:
      return lin(spec.embed_dim_a, spec.head_hidden) + head;
    case ArchKind::UnimodalB:
      return lin(spec.embed_dim_b, spec.head_hidden) + head;
    case ArchKind::LateLinear:
      return lin(spec.embed_dim_a, spec.head_hidden) + head +
             lin(spec.embed_dim_b, spec.head_hidden) + head + lin(2, 1);
  }
  throw std::logic_error("unreachable");
}

TrainedModel build(const ArchitectureSpec& spec, std::uint64_t seed) {
  std::vector<ParamPlan> plans;
  Graph g = build_graph_impl(spec, plans);
  initialize_from_plans(g, plans, seed);
  TrainedModel model;
  model.spec = spec;
  model.seed = seed;
  model.params.resize(g.param_count());
  g.get_params(model.params);
  return model;
}

namespace {

std::vector<double> scores_from_output(const Matrix& out) {
  if (out.cols() != 1) {
    throw std::logic_error("model output is " + out.shape_str() +
                           ", expected a column");
  }
  if (!out.all_finite()) {
    throw std::runtime_error("model produced non-finite log-risk scores");
  }
  return {out.data().begin(), out.data().end()};
}

void check_inputs(const ArchitectureSpec& spec, const Matrix& a,
                  const Matrix& b) {
  if (a.cols() != spec.embed_dim_a || b.cols() != spec.embed_dim_b) {
    throw std::invalid_argument(
        "input dims " + a.shape_str() + " / " + b.shape_str() +
        " do not match architecture dims " + std::to_string(spec.embed_dim_a) +
        " / " + std::to_string(spec.embed_dim_b));
  }
  if (a.rows() != b.rows()) {
    throw std::invalid_argument("modality row counts differ: " +
                                a.shape_str() + " vs " + b.shape_str());
  }
  if (a.rows() == 0) throw std::invalid_argument("empty input");
}

}  // namespace

std::vector<double> predict(const TrainedModel& model, const Matrix& mod_a,
                            const Matrix& mod_b) {
  check_inputs(model.spec, mod_a, mod_b);
  Graph g = build_graph(model.spec);
  if (model.params.size() != g.param_count()) {
    throw std::invalid_argument(
        "parameter vector has " + std::to_string(model.params.size()) +
        " entries, architecture needs " + std::to_string(g.param_count()));
  }
  g.set_params(model.params);
  std::unordered_map<std::string, const Matrix*> inputs{{"A", &mod_a},
                                                        {"B", &mod_b}};
  return scores_from_output(g.forward(inputs, false, nullptr));
}

TrainedModel train(const ArchitectureSpec& spec,
                   const MultimodalDataset& dataset,
                   std::span<const std::size_t> train_indices,
                   std::span<const std::size_t> val_indices,
                   const TrainHyperparams& hyper, std::uint64_t seed) {
  if (dataset.n_modalities() != 2) {
    throw std::invalid_argument("training expects exactly 2 modalities, got " +
                                std::to_string(dataset.n_modalities()));
  }
  if (train_indices.empty() || val_indices.empty()) {
    throw std::invalid_argument("train and validation splits must be non-empty");
  }
  const Matrix& full_a = dataset.modalities[0];
  const Matrix& full_b = dataset.modalities[1];
  Matrix train_a = gather_rows(full_a, train_indices);
  Matrix train_b = gather_rows(full_b, train_indices);
  Matrix val_a = gather_rows(full_a, val_indices);
  Matrix val_b = gather_rows(full_b, val_indices);
  std::vector<SurvivalRecord> train_out, val_out;
  for (std::size_t i : train_indices) train_out.push_back(dataset.outcomes[i]);
  for (std::size_t i : val_indices) val_out.push_back(dataset.outcomes[i]);
  check_inputs(spec, train_a, train_b);

  std::size_t n_train = train_out.size();
  std::size_t batch = hyper.batch_size;
  if (batch == 0) batch = 128;  // spec default
  batch = std::min(batch, n_train);
  if (hyper.batch_size == 0 && n_train <= 256) batch = n_train;

  std::vector<ParamPlan> plans;
  Graph g = build_graph_impl(spec, plans);
  initialize_from_plans(g, plans, seed);

  std::vector<double> params(g.param_count());
  g.get_params(params);
  AdamState adam(params.size(), hyper.lr, hyper.weight_decay);

  auto val_cindex = [&]() {
    std::unordered_map<std::string, const Matrix*> inputs{{"A", &val_a},
                                                          {"B", &val_b}};
    auto scores = scores_from_output(g.forward(inputs, false, nullptr));
    return concordance_index(scores, val_out);
  };

  double best_c = val_cindex();
  std::vector<double> best_params = params;
  int epochs_without_improvement = 0;
  int epochs_run = 0;

  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> grad_flat(params.size());
  std::vector<double> cox_grad;

  for (int epoch = 1; epoch <= hyper.max_epochs; ++epoch) {
    RngStream shuffle_rng = RngStream::derive(
        seed, {kStreamEpochShuffle, static_cast<std::uint64_t>(epoch)});
    // Partition into batches; every batch must contain an event or the
    // partial likelihood is undefined, so reshuffle when one does not.
    std::vector<std::vector<std::size_t>> batches;
    bool ok = false;
    for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
      shuffle_rng.shuffle(std::span<std::size_t>(order));
      batches.clear();
      for (std::size_t lo = 0; lo < n_train; lo += batch) {
        std::size_t hi = std::min(lo + batch, n_train);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(lo),
                             order.begin() + static_cast<std::ptrdiff_t>(hi));
      }
      if (batches.size() > 1 && batches.back().size() < 2) {
        auto tail = std::move(batches.back());
        batches.pop_back();
        batches.back().insert(batches.back().end(), tail.begin(), tail.end());
      }
      ok = true;
      for (const auto& bt : batches) {
        std::size_t events = 0;
        for (std::size_t i : bt) events += train_out[i].event ? 1 : 0;
        if (events == 0) {
          ok = false;
          break;
        }
      }
      if (!ok && attempt == 0) {
        std::fprintf(stderr,
                     "warning: epoch %d produced a zero-event batch, "
                     "reshuffling the partition\n",
                     epoch);
      }
    }
    if (!ok) {
      throw std::runtime_error(
          "could not build a batch partition where every batch has an event; "
          "training set has too few events for batch size " +
          std::to_string(batch));
    }

    RngStream dropout_rng = RngStream::derive(
        seed, {kStreamDropout, static_cast<std::uint64_t>(epoch)});
    for (const auto& bt : batches) {
      Matrix ba = gather_rows(train_a, bt);
      Matrix bb = gather_rows(train_b, bt);
      std::vector<SurvivalRecord> bout;
      bout.reserve(bt.size());
      for (std::size_t i : bt) bout.push_back(train_out[i]);

      std::unordered_map<std::string, const Matrix*> inputs{{"A", &ba},
                                                            {"B", &bb}};
      const Matrix& out = g.forward(inputs, true, &dropout_rng);
      std::vector<double> scores(out.data().begin(), out.data().end());
      for (double s : scores) {
        if (!std::isfinite(s)) {
          throw std::runtime_error("training diverged: non-finite risk score "
                                   "at epoch " + std::to_string(epoch));
        }
      }
      double nll = cox_nll_with_gradient(scores, bout, cox_grad);
      if (!std::isfinite(nll)) {
        throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                 std::to_string(epoch));
      }
      double events = 0.0;
      for (const auto& r : bout) events += r.event ? 1.0 : 0.0;
      // Normalize by batch event count so the gradient scale does not depend
      // on how many events a batch happened to draw.
      Matrix adjoint(scores.size(), 1);
      for (std::size_t i = 0; i < scores.size(); ++i) {
        adjoint(i, 0) = cox_grad[i] / events;
      }
      g.backward_into(adjoint, grad_flat);
      adam_step(adam, params, grad_flat);
      g.set_params(params);
    }
    epochs_run = epoch;

    double c = val_cindex();
    if (c > best_c) {
      best_c = c;
      best_params = params;
      epochs_without_improvement = 0;
    } else {
      ++epochs_without_improvement;
    }
    if (epochs_without_improvement >= hyper.patience) break;
  }

  TrainedModel model;
  model.spec = spec;
  model.params = std::move(best_params);
  model.seed = seed;
  model.hyper = hyper;
  model.hyper.batch_size = batch;
  model.epochs_run = epochs_run;
  model.best_val_cindex = best_c;
  model.modality_names = dataset.modality_names;
  model.train_means.clear();
  Matrix mean_a = column_means(train_a);
  Matrix mean_b = column_means(train_b);
  model.train_means.push_back({mean_a.data().begin(), mean_a.data().end()});
  model.train_means.push_back({mean_b.data().begin(), mean_b.data().end()});
  return model;
}

void save_model(const TrainedModel& model, const std::string& directory) {
  model.spec.validate();
  if (model.params.size() != parameter_count(model.spec)) {
    throw std::invalid_argument("refusing to save: parameter vector size " +
                                std::to_string(model.params.size()) +
                                " does not match architecture count " +
                                std::to_string(parameter_count(model.spec)));
  }
  fs::path dir(directory);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw std::runtime_error("cannot create directory '" + directory +
                             "': " + ec.message());
  }
  JsonWriter w;
  w.begin_object();
  w.kv("format", "coxplain-model");
  w.kv("version", 1);
  w.key("architecture").begin_object();
  w.kv("kind", arch_kind_to_string(model.spec.kind));
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
  w.kv("seed", model.seed);
  w.key("hyperparams").begin_object();
  w.kv("lr", model.hyper.lr);
  w.kv("weight_decay", model.hyper.weight_decay);
  w.kv("batch_size", model.hyper.batch_size);
  w.kv("patience", model.hyper.patience);
  w.kv("max_epochs", model.hyper.max_epochs);
  w.end_object();
  w.kv("epochs_run", model.epochs_run);
  w.kv("best_val_cindex", model.best_val_cindex);
  w.kv("parameter_count", model.params.size());
  w.kv("byte_order", "little-endian float64");
  w.key("modality_names").begin_array();
  for (const auto& name : model.modality_names) w.value(name);
  w.end_array();
  w.key("train_means").begin_array();
  for (const auto& means : model.train_means) {
    w.begin_array();
    for (double v : means) w.value(v);
    w.end_array();
  }
  w.end_array();
  w.end_object();
  write_text_file((dir / "model.json").string(), w.str() + "\n");
  write_f64_vector((dir / "model.bin").string(), model.params);
}

TrainedModel load_model(const std::string& directory) {
  fs::path dir(directory);
  std::string manifest_path = (dir / "model.json").string();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("'" + manifest_path + "': " + e.what());
  }
  TrainedModel model;
  try {
    const auto& arch = j.at("architecture");
    model.spec.kind = arch_kind_from_string(arch.at("kind").get<std::string>());
    model.spec.embed_dim_a = arch.at("embed_dim_a").get<std::size_t>();
    model.spec.embed_dim_b = arch.at("embed_dim_b").get<std::size_t>();
    model.spec.hidden_dims =
        arch.at("hidden_dims").get<std::vector<std::size_t>>();
    model.spec.dropout = arch.at("dropout").get<double>();
    model.spec.bilinear_rank = arch.at("bilinear_rank").get<std::size_t>();
    model.spec.attention_dim = arch.at("attention_dim").get<std::size_t>();
    model.spec.branch_dim = arch.at("branch_dim").get<std::size_t>();
    model.spec.head_hidden = arch.at("head_hidden").get<std::size_t>();
    model.seed = j.at("seed").get<std::uint64_t>();
    const auto& hp = j.at("hyperparams");
    model.hyper.lr = hp.at("lr").get<double>();
    model.hyper.weight_decay = hp.at("weight_decay").get<double>();
    model.hyper.batch_size = hp.at("batch_size").get<std::size_t>();
    model.hyper.patience = hp.at("patience").get<int>();
    model.hyper.max_epochs = hp.at("max_epochs").get<int>();
    model.epochs_run = j.at("epochs_run").get<int>();
    model.best_val_cindex = j.at("best_val_cindex").get<double>();
    model.modality_names =
        j.at("modality_names").get<std::vector<std::string>>();
    model.train_means =
        j.at("train_means").get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("'" + manifest_path + "': " + e.what());
  }
  model.spec.validate();
  model.params = read_f64_vector((dir / "model.bin").string());
  std::size_t want = j.at("parameter_count").get<std::size_t>();
  if (model.params.size() != want ||
      want != parameter_count(model.spec)) {
    throw std::runtime_error(
        "'" + directory + "': model.bin holds " +
        std::to_string(model.params.size()) + " parameters, manifest says " +
        std::to_string(want) + ", architecture needs " +
        std::to_string(parameter_count(model.spec)));
  }
  for (double v : model.params) {
    if (!std::isfinite(v)) {
      throw std::runtime_error("'" + directory +
                               "': model.bin contains non-finite parameters");
    }
  }
  return model;
}

}  // namespace coxplain
