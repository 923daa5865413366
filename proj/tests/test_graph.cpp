#include <doctest.h>

#include <cmath>
#include <unordered_map>
#include <vector>

#include "coxplain/graph.hpp"
#include "coxplain/matrix.hpp"
#include "coxplain/rng.hpp"
#include "oracles.hpp"

using namespace coxplain;

namespace {

// Sum-of-output scalar loss of `make_graph` as a function of the flat
// parameter vector, compared against reverse-mode gradients.
void check_gradients(Graph& g,
                     const std::unordered_map<std::string, const Matrix*>& ins,
                     double tol = 1e-6) {
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
  Matrix adjoint(out.rows(), out.cols(), 1.0);
  std::vector<double> grad(params.size());
  g.backward_into(adjoint, grad);

  for (std::size_t i = 0; i < params.size(); ++i) {
    double fd = oracles::central_diff(loss, params, i, 1e-5);
    CHECK(grad[i] == doctest::Approx(fd).epsilon(tol));
  }
  g.set_params(params);
}

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Matrix m(rows, cols);
  RngStream r = RngStream::derive(seed, {rows, cols});
  for (double& v : m.data()) v = r.next_gaussian();
  return m;
}

}  // namespace

TEST_CASE("forward hand case: relu(x @ w + b)") {
  Graph g;
  Graph::NodeId x = g.input("x");
  Graph::NodeId w = g.param("w", Matrix::from_rows({{1.0, -1.0}, {2.0, 0.5}}));
  Graph::NodeId b = g.param("b", Matrix::from_rows({{0.5, -3.0}}));
  g.mark_output(g.relu(g.add(g.matmul(x, w), b)));

  Matrix in = Matrix::from_rows({{1.0, 1.0}, {0.0, 2.0}});
  const Matrix& out = g.forward({{"x", &in}});
  // row 0: (1+2+0.5, -1+0.5-3) -> (3.5, 0); row 1: (4+0.5, 1-3) -> (4.5, 0)
  CHECK(out(0, 0) == 3.5);
  CHECK(out(0, 1) == 0.0);
  CHECK(out(1, 0) == 4.5);
  CHECK(out(1, 1) == 0.0);
}

TEST_CASE("gradients match finite differences per op") {
  Matrix xa = random_matrix(3, 4, 1);
  Matrix xb = random_matrix(3, 4, 2);

  SUBCASE("matmul + bias add") {
    Graph g;
    Graph::NodeId x = g.input("x");
    Graph::NodeId w = g.param("w", random_matrix(4, 2, 3));
    Graph::NodeId b = g.param("b", random_matrix(1, 2, 4));
    g.mark_output(g.add(g.matmul(x, w), b));
    check_gradients(g, {{"x", &xa}});
  }
  SUBCASE("relu") {
    Graph g;
    Graph::NodeId x = g.input("x");
    Graph::NodeId w = g.param("w", random_matrix(4, 4, 5));
    g.mark_output(g.relu(g.matmul(x, w)));
    check_gradients(g, {{"x", &xa}});
  }
  SUBCASE("sigmoid") {
    Graph g;
    Graph::NodeId x = g.input("x");
    Graph::NodeId w = g.param("w", random_matrix(4, 3, 6));
    g.mark_output(g.sigmoid(g.matmul(x, w)));
    check_gradients(g, {{"x", &xa}});
  }
  SUBCASE("softmax_rows") {
    Graph g;
    Graph::NodeId x = g.input("x");
    Graph::NodeId w = g.param("w", random_matrix(4, 5, 7));
    g.mark_output(g.softmax_rows(g.matmul(x, w)));
    check_gradients(g, {{"x", &xa}});
  }
  SUBCASE("elementwise multiply") {
    Graph g;
    Graph::NodeId x = g.input("x");
    Graph::NodeId w1 = g.param("w1", random_matrix(4, 3, 8));
    Graph::NodeId w2 = g.param("w2", random_matrix(4, 3, 9));
    g.mark_output(g.multiply(g.matmul(x, w1), g.matmul(x, w2)));
    check_gradients(g, {{"x", &xa}});
  }
  SUBCASE("concat + row_mean + scale") {
    Graph g;
    Graph::NodeId a = g.input("a");
    Graph::NodeId b = g.input("b");
    Graph::NodeId w = g.param("w", random_matrix(4, 2, 10));
    Graph::NodeId cat = g.concat_cols(g.matmul(a, w), g.matmul(b, w));
    g.mark_output(g.scale(g.row_mean(cat), 2.5));
    check_gradients(g, {{"a", &xa}, {"b", &xb}});
  }
}

TEST_CASE("dropout is identity in eval mode and masks in training") {
  Graph g;
  Graph::NodeId x = g.input("x");
  Graph::NodeId w = g.param("w", random_matrix(4, 6, 11));
  g.mark_output(g.dropout(g.matmul(x, w), 0.5));

  Matrix in = random_matrix(8, 4, 12);
  Matrix pre = matmul(in, g.param_value(g.param_nodes()[0]));
  const Matrix& eval_out = g.forward({{"x", &in}});
  for (std::size_t i = 0; i < eval_out.size(); ++i) {
    CHECK(eval_out.data()[i] == doctest::Approx(pre.data()[i]).epsilon(1e-12));
  }

  RngStream rng = RngStream::derive(99, {0});
  const Matrix& train_out = g.forward({{"x", &in}}, true, &rng);
  std::size_t zeros = 0, scaled = 0;
  for (std::size_t i = 0; i < train_out.size(); ++i) {
    double v = train_out.data()[i];
    if (v == 0.0) {
      ++zeros;
    } else {
      CHECK(v == doctest::Approx(2.0 * pre.data()[i]).epsilon(1e-12));
      ++scaled;
    }
  }
  CHECK(zeros > 0);
  CHECK(scaled > 0);
}

TEST_CASE("param roundtrip and taps") {
  Graph g;
  Graph::NodeId x = g.input("x");
  Graph::NodeId w = g.param("w", random_matrix(2, 2, 13));
  Graph::NodeId h = g.matmul(x, w);
  g.tap("hidden", h);
  g.mark_output(g.relu(h));

  CHECK(g.param_count() == 4);
  std::vector<double> fresh(4, 1.5);
  g.set_params(fresh);
  std::vector<double> after(4);
  g.get_params(after);
  CHECK(after == fresh);

  Matrix in = Matrix::from_rows({{1.0, 2.0}});
  g.forward({{"x", &in}});
  CHECK(g.value(g.tapped("hidden"))(0, 0) == doctest::Approx(4.5));
  CHECK_THROWS_AS(g.tapped("missing"), GraphError);
}

TEST_CASE("shape mismatches raise GraphError") {
  Graph g;
  Graph::NodeId x = g.input("x");
  Graph::NodeId w = g.param("w", random_matrix(3, 2, 14));
  g.mark_output(g.matmul(x, w));
  Matrix bad = Matrix::from_rows({{1.0, 2.0}});
  CHECK_THROWS_AS(g.forward({{"x", &bad}}), GraphError);
}

TEST_CASE("missing input binding raises GraphError") {
  Graph g;
  Graph::NodeId x = g.input("x");
  g.mark_output(g.relu(x));
  CHECK_THROWS_AS(g.forward({}), GraphError);
}
