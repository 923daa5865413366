#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "coxplain/matrix.hpp"
#include "coxplain/rng.hpp"

namespace coxplain {

struct GraphError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class OpKind {
  Input,
  Param,
  Constant,
  Matmul,
  Add,          // same-shape add, or row-wise bias add when rhs is 1 x cols
  Multiply,     // elementwise
  ConcatCols,
  Relu,
  Sigmoid,
  SoftmaxRows,
  Dropout,
  RowMean,      // n x d -> n x 1
  Scale,        // multiply by a fixed scalar
};

/// Reverse-mode autodiff over a fixed list of primitive ops. Nodes are stored
/// in construction order, which is a topological order by construction (an op
/// can only reference ids that already exist). Shapes are inferred at forward
/// time from the bound inputs, so one graph instance serves any batch size.
///
/// A graph instance is single-user during forward/backward.
class Graph {
 public:
  using NodeId = std::size_t;
  static constexpr NodeId npos = std::numeric_limits<NodeId>::max();

  NodeId input(std::string name);
  NodeId param(std::string name, Matrix value);
  NodeId constant(Matrix value);

  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId multiply(NodeId a, NodeId b);
  NodeId concat_cols(NodeId a, NodeId b);
  NodeId relu(NodeId x);
  NodeId sigmoid(NodeId x);
  NodeId softmax_rows(NodeId x);
  NodeId dropout(NodeId x, double p);
  NodeId row_mean(NodeId x);
  NodeId scale(NodeId x, double factor);

  void mark_output(NodeId id);
  NodeId output() const { return output_; }

  /// Name an interior node so tests and diagnostics can read its value.
  void tap(std::string name, NodeId id) { taps_[std::move(name)] = id; }
  NodeId tapped(const std::string& name) const;

  /// Runs the whole graph in topological order and returns the output value.
  /// `training` enables dropout (inverted scaling); `rng` must be non-null if
  /// any dropout node exists and training is true.
  const Matrix& forward(const std::unordered_map<std::string, const Matrix*>& inputs,
                        bool training = false, RngStream* rng = nullptr);

  /// Gradient of the scalar-valued loss w.r.t. every parameter, given the
  /// adjoint of the output node. Requires a prior forward on this instance.
  std::unordered_map<std::string, Matrix> backward(const Matrix& output_adjoint);

  /// Same as backward but writes gradients into a flat buffer in canonical
  /// parameter order (creation order, each matrix row-major).
  void backward_into(const Matrix& output_adjoint, std::span<double> grad_out);

  std::size_t param_count() const;
  void get_params(std::span<double> out) const;
  void set_params(std::span<const double> in);
  const std::vector<NodeId>& param_nodes() const { return param_nodes_; }
  const std::string& param_name(NodeId id) const { return nodes_[id].name; }

  const Matrix& value(NodeId id) const;
  Matrix& param_value(NodeId id);

 private:
  struct Node {
    OpKind kind;
    NodeId a = npos;
    NodeId b = npos;
    double scalar = 0.0;  // Scale factor or Dropout rate
    std::string name;     // Input / Param
    Matrix value;
    Matrix adjoint;
    Matrix mask;  // Dropout keep-mask, already scaled by 1/(1-p)
  };

  NodeId add_node(Node node);
  void check_id(NodeId id) const;
  [[noreturn]] void shape_error(NodeId id, const std::string& what) const;
  void forward_node(NodeId id, bool training, RngStream* rng);
  void backward_node(NodeId id);

  std::vector<Node> nodes_;
  std::vector<NodeId> param_nodes_;
  std::unordered_map<std::string, NodeId> taps_;
  NodeId output_ = npos;
  bool forward_done_ = false;
};

}  // namespace coxplain
