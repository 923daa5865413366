#include "coxplain/graph.hpp"

#include <algorithm>
#include <cmath>

namespace coxplain {

namespace {
const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::Input: return "input";
    case OpKind::Param: return "param";
    case OpKind::Constant: return "constant";
    case OpKind::Matmul: return "matmul";
    case OpKind::Add: return "add";
    case OpKind::Multiply: return "multiply";
    case OpKind::ConcatCols: return "concat";
    case OpKind::Relu: return "relu";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::SoftmaxRows: return "softmax-rows";
    case OpKind::Dropout: return "dropout";
    case OpKind::RowMean: return "row-mean";
    case OpKind::Scale: return "scale";
  }
  return "?";
}
}  // namespace

Graph::NodeId Graph::add_node(Node node) {
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

void Graph::check_id(NodeId id) const {
  if (id >= nodes_.size()) throw GraphError("graph: unknown node id " + std::to_string(id));
}

void Graph::shape_error(NodeId id, const std::string& what) const {
  throw GraphError("graph node " + std::to_string(id) + " (" + op_name(nodes_[id].kind) +
                   "): " + what);
}

Graph::NodeId Graph::input(std::string name) {
  Node n;
  n.kind = OpKind::Input;
  n.name = std::move(name);
  return add_node(std::move(n));
}

Graph::NodeId Graph::param(std::string name, Matrix value) {
  Node n;
  n.kind = OpKind::Param;
  n.name = std::move(name);
  n.value = std::move(value);
  const NodeId id = add_node(std::move(n));
  param_nodes_.push_back(id);
  return id;
}

Graph::NodeId Graph::constant(Matrix value) {
  Node n;
  n.kind = OpKind::Constant;
  n.value = std::move(value);
  return add_node(std::move(n));
}

Graph::NodeId Graph::matmul(NodeId a, NodeId b) {
  check_id(a);
  check_id(b);
  Node n;
  n.kind = OpKind::Matmul;
  n.a = a;
  n.b = b;
  return add_node(std::move(n));
}

Graph::NodeId Graph::add(NodeId a, NodeId b) {
  check_id(a);
  check_id(b);
  Node n;
  n.kind = OpKind::Add;
  n.a = a;
  n.b = b;
  return add_node(std::move(n));
}

Graph::NodeId Graph::multiply(NodeId a, NodeId b) {
  check_id(a);
  check_id(b);
  Node n;
  n.kind = OpKind::Multiply;
  n.a = a;
  n.b = b;
  return add_node(std::move(n));
}

Graph::NodeId Graph::concat_cols(NodeId a, NodeId b) {
  check_id(a);
  check_id(b);
  Node n;
  n.kind = OpKind::ConcatCols;
  n.a = a;
  n.b = b;
  return add_node(std::move(n));
}

Graph::NodeId Graph::relu(NodeId x) {
  check_id(x);
  Node n;
  n.kind = OpKind::Relu;
  n.a = x;
  return add_node(std::move(n));
}

Graph::NodeId Graph::sigmoid(NodeId x) {
  check_id(x);
  Node n;
  n.kind = OpKind::Sigmoid;
  n.a = x;
  return add_node(std::move(n));
}

Graph::NodeId Graph::softmax_rows(NodeId x) {
  check_id(x);
  Node n;
  n.kind = OpKind::SoftmaxRows;
  n.a = x;
  return add_node(std::move(n));
}

Graph::NodeId Graph::dropout(NodeId x, double p) {
  check_id(x);
  if (p < 0.0 || p >= 1.0) throw GraphError("dropout: rate must be in [0,1)");
  Node n;
  n.kind = OpKind::Dropout;
  n.a = x;
  n.scalar = p;
  return add_node(std::move(n));
}

Graph::NodeId Graph::row_mean(NodeId x) {
  check_id(x);
  Node n;
  n.kind = OpKind::RowMean;
  n.a = x;
  return add_node(std::move(n));
}

Graph::NodeId Graph::scale(NodeId x, double factor) {
  check_id(x);
  Node n;
  n.kind = OpKind::Scale;
  n.a = x;
  n.scalar = factor;
  return add_node(std::move(n));
}

void Graph::mark_output(NodeId id) {
  check_id(id);
  output_ = id;
}

Graph::NodeId Graph::tapped(const std::string& name) const {
  auto it = taps_.find(name);
  if (it == taps_.end()) throw GraphError("graph: no tap named '" + name + "'");
  return it->second;
}

void Graph::forward_node(NodeId id, bool training, RngStream* rng) {
  Node& n = nodes_[id];
  switch (n.kind) {
    case OpKind::Input:
    case OpKind::Param:
    case OpKind::Constant:
      break;
    case OpKind::Matmul: {
      const Matrix& a = nodes_[n.a].value;
      const Matrix& b = nodes_[n.b].value;
      if (a.cols() != b.rows())
        shape_error(id, "expected inner dims to agree, got " + a.shape_str() + " @ " +
                            b.shape_str());
      n.value = coxplain::matmul(a, b);
      break;
    }
    case OpKind::Add: {
      const Matrix& a = nodes_[n.a].value;
      const Matrix& b = nodes_[n.b].value;
      if (a.same_shape(b)) {
        n.value = a;
        auto dst = n.value.data();
        auto src = b.data();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
      } else if (b.rows() == 1 && b.cols() == a.cols()) {
        // Row-wise bias broadcast; the one broadcast form allowed.
        n.value = a;
        for (std::size_t r = 0; r < a.rows(); ++r)
          for (std::size_t c = 0; c < a.cols(); ++c) n.value(r, c) += b(0, c);
      } else {
        shape_error(id, "expected " + a.shape_str() + " or 1x" + std::to_string(a.cols()) +
                            ", got " + b.shape_str());
      }
      break;
    }
    case OpKind::Multiply: {
      const Matrix& a = nodes_[n.a].value;
      const Matrix& b = nodes_[n.b].value;
      if (!a.same_shape(b))
        shape_error(id, "expected " + a.shape_str() + ", got " + b.shape_str());
      n.value = a;
      auto dst = n.value.data();
      auto src = b.data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] *= src[i];
      break;
    }
    case OpKind::ConcatCols: {
      const Matrix& a = nodes_[n.a].value;
      const Matrix& b = nodes_[n.b].value;
      if (a.rows() != b.rows())
        shape_error(id, "row counts differ: " + a.shape_str() + " vs " + b.shape_str());
      Matrix out(a.rows(), a.cols() + b.cols());
      for (std::size_t r = 0; r < a.rows(); ++r) {
        auto dst = out.row(r);
        auto ra = a.row(r);
        auto rb = b.row(r);
        std::copy(ra.begin(), ra.end(), dst.begin());
        std::copy(rb.begin(), rb.end(), dst.begin() + static_cast<std::ptrdiff_t>(a.cols()));
      }
      n.value = std::move(out);
      break;
    }
    case OpKind::Relu: {
      n.value = nodes_[n.a].value;
      for (double& v : n.value.data()) v = v > 0.0 ? v : 0.0;
      break;
    }
    case OpKind::Sigmoid: {
      n.value = nodes_[n.a].value;
      for (double& v : n.value.data()) v = 1.0 / (1.0 + std::exp(-v));
      break;
    }
    case OpKind::SoftmaxRows: {
      const Matrix& x = nodes_[n.a].value;
      n.value = x;
      for (std::size_t r = 0; r < x.rows(); ++r) {
        auto row = n.value.row(r);
        const double mx = *std::max_element(row.begin(), row.end());
        double sum = 0.0;
        for (double& v : row) {
          v = std::exp(v - mx);
          sum += v;
        }
        for (double& v : row) v /= sum;
      }
      break;
    }
    case OpKind::Dropout: {
      const Matrix& x = nodes_[n.a].value;
      if (!training || n.scalar == 0.0) {
        n.value = x;       // identity at inference
        n.mask = Matrix();
        break;
      }
      if (rng == nullptr) throw GraphError("dropout: training forward requires an RNG stream");
      const double keep = 1.0 - n.scalar;
      n.mask = Matrix(x.rows(), x.cols());
      auto md = n.mask.data();
      for (double& m : md) m = rng->next_uniform() < keep ? 1.0 / keep : 0.0;
      n.value = x;
      auto vd = n.value.data();
      for (std::size_t i = 0; i < vd.size(); ++i) vd[i] *= md[i];
      break;
    }
    case OpKind::RowMean: {
      const Matrix& x = nodes_[n.a].value;
      if (x.cols() == 0) shape_error(id, "zero columns");
      Matrix out(x.rows(), 1);
      for (std::size_t r = 0; r < x.rows(); ++r) {
        double acc = 0.0;
        for (double v : x.row(r)) acc += v;
        out(r, 0) = acc / static_cast<double>(x.cols());
      }
      n.value = std::move(out);
      break;
    }
    case OpKind::Scale: {
      n.value = nodes_[n.a].value;
      for (double& v : n.value.data()) v *= n.scalar;
      break;
    }
  }
}

const Matrix& Graph::forward(const std::unordered_map<std::string, const Matrix*>& inputs,
                             bool training, RngStream* rng) {
  if (output_ == npos) throw GraphError("forward: no output marked");
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    Node& n = nodes_[id];
    if (n.kind == OpKind::Input) {
      auto it = inputs.find(n.name);
      if (it == inputs.end() || it->second == nullptr)
        throw GraphError("forward: input '" + n.name + "' not bound");
      n.value = *it->second;
    }
    forward_node(id, training, rng);
  }
  forward_done_ = true;
  return nodes_[output_].value;
}

void Graph::backward_node(NodeId id) {
  Node& n = nodes_[id];
  if (n.adjoint.empty()) return;  // nothing flowed into this node
  auto accumulate = [&](NodeId target, const Matrix& grad) {
    Node& t = nodes_[target];
    if (t.adjoint.empty()) {
      t.adjoint = grad;
    } else {
      auto dst = t.adjoint.data();
      auto src = grad.data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
  };
  const Matrix& g = n.adjoint;
  switch (n.kind) {
    case OpKind::Input:
    case OpKind::Param:
    case OpKind::Constant:
      break;
    case OpKind::Matmul: {
      accumulate(n.a, coxplain::matmul(g, nodes_[n.b].value, false, true));
      accumulate(n.b, coxplain::matmul(nodes_[n.a].value, g, true, false));
      break;
    }
    case OpKind::Add: {
      accumulate(n.a, g);
      const Matrix& b = nodes_[n.b].value;
      if (b.same_shape(g)) {
        accumulate(n.b, g);
      } else {
        Matrix col(1, g.cols());
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < g.cols(); ++c) col(0, c) += g(r, c);
        accumulate(n.b, col);
      }
      break;
    }
    case OpKind::Multiply: {
      Matrix ga = g;
      {
        auto d = ga.data();
        auto o = nodes_[n.b].value.data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] *= o[i];
      }
      accumulate(n.a, ga);
      Matrix gb = g;
      {
        auto d = gb.data();
        auto o = nodes_[n.a].value.data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] *= o[i];
      }
      accumulate(n.b, gb);
      break;
    }
    case OpKind::ConcatCols: {
      const std::size_t ca = nodes_[n.a].value.cols();
      const std::size_t cb = nodes_[n.b].value.cols();
      Matrix ga(g.rows(), ca), gb(g.rows(), cb);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < ca; ++c) ga(r, c) = g(r, c);
        for (std::size_t c = 0; c < cb; ++c) gb(r, c) = g(r, ca + c);
      }
      accumulate(n.a, ga);
      accumulate(n.b, gb);
      break;
    }
    case OpKind::Relu: {
      Matrix ga = g;
      auto d = ga.data();
      auto x = nodes_[n.a].value.data();
      for (std::size_t i = 0; i < d.size(); ++i)
        if (x[i] <= 0.0) d[i] = 0.0;
      accumulate(n.a, ga);
      break;
    }
    case OpKind::Sigmoid: {
      Matrix ga = g;
      auto d = ga.data();
      auto y = n.value.data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] *= y[i] * (1.0 - y[i]);
      accumulate(n.a, ga);
      break;
    }
    case OpKind::SoftmaxRows: {
      const Matrix& y = n.value;
      Matrix ga(g.rows(), g.cols());
      for (std::size_t r = 0; r < g.rows(); ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < g.cols(); ++c) dot += g(r, c) * y(r, c);
        for (std::size_t c = 0; c < g.cols(); ++c) ga(r, c) = y(r, c) * (g(r, c) - dot);
      }
      accumulate(n.a, ga);
      break;
    }
    case OpKind::Dropout: {
      if (n.mask.empty()) {
        accumulate(n.a, g);
      } else {
        Matrix ga = g;
        auto d = ga.data();
        auto m = n.mask.data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] *= m[i];
        accumulate(n.a, ga);
      }
      break;
    }
    case OpKind::RowMean: {
      const Matrix& x = nodes_[n.a].value;
      Matrix ga(x.rows(), x.cols());
      const double inv = 1.0 / static_cast<double>(x.cols());
      for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < x.cols(); ++c) ga(r, c) = g(r, 0) * inv;
      accumulate(n.a, ga);
      break;
    }
    case OpKind::Scale: {
      Matrix ga = g;
      for (double& v : ga.data()) v *= n.scalar;
      accumulate(n.a, ga);
      break;
    }
  }
}

std::unordered_map<std::string, Matrix> Graph::backward(const Matrix& output_adjoint) {
  if (!forward_done_) throw GraphError("backward: called before forward");
  if (!output_adjoint.same_shape(nodes_[output_].value))
    throw GraphError("backward: output adjoint shape " + output_adjoint.shape_str() +
                     " does not match output " + nodes_[output_].value.shape_str());
  for (Node& n : nodes_) n.adjoint = Matrix();
  nodes_[output_].adjoint = output_adjoint;
  for (NodeId id = nodes_.size(); id-- > 0;) backward_node(id);
  std::unordered_map<std::string, Matrix> grads;
  for (NodeId pid : param_nodes_) {
    const Node& p = nodes_[pid];
    grads[p.name] = p.adjoint.empty() ? Matrix(p.value.rows(), p.value.cols()) : p.adjoint;
  }
  return grads;
}

void Graph::backward_into(const Matrix& output_adjoint, std::span<double> grad_out) {
  if (!forward_done_) throw GraphError("backward: called before forward");
  if (!output_adjoint.same_shape(nodes_[output_].value))
    throw GraphError("backward: output adjoint shape " + output_adjoint.shape_str() +
                     " does not match output " + nodes_[output_].value.shape_str());
  if (grad_out.size() != param_count())
    throw GraphError("backward: gradient buffer size mismatch");
  for (Node& n : nodes_) n.adjoint = Matrix();
  nodes_[output_].adjoint = output_adjoint;
  for (NodeId id = nodes_.size(); id-- > 0;) backward_node(id);
  std::size_t off = 0;
  for (NodeId pid : param_nodes_) {
    Node& p = nodes_[pid];
    const std::size_t sz = p.value.size();
    if (p.adjoint.empty()) {
      std::fill(grad_out.begin() + static_cast<std::ptrdiff_t>(off),
                grad_out.begin() + static_cast<std::ptrdiff_t>(off + sz), 0.0);
    } else {
      auto src = p.adjoint.data();
      for (std::size_t i = 0; i < sz; ++i) {
        if (!std::isfinite(src[i]))
          throw GraphError("backward: non-finite gradient in parameter '" + p.name + "'");
        grad_out[off + i] = src[i];
      }
    }
    off += sz;
  }
}

std::size_t Graph::param_count() const {
  std::size_t n = 0;
  for (NodeId pid : param_nodes_) n += nodes_[pid].value.size();
  return n;
}

void Graph::get_params(std::span<double> out) const {
  if (out.size() != param_count()) throw GraphError("get_params: buffer size mismatch");
  std::size_t off = 0;
  for (NodeId pid : param_nodes_) {
    auto src = nodes_[pid].value.data();
    std::copy(src.begin(), src.end(), out.begin() + static_cast<std::ptrdiff_t>(off));
    off += src.size();
  }
}

void Graph::set_params(std::span<const double> in) {
  if (in.size() != param_count()) throw GraphError("set_params: buffer size mismatch");
  std::size_t off = 0;
  for (NodeId pid : param_nodes_) {
    auto dst = nodes_[pid].value.data();
    std::copy(in.begin() + static_cast<std::ptrdiff_t>(off),
              in.begin() + static_cast<std::ptrdiff_t>(off + dst.size()), dst.begin());
    off += dst.size();
  }
}

const Matrix& Graph::value(NodeId id) const {
  check_id(id);
  return nodes_[id].value;
}

Matrix& Graph::param_value(NodeId id) {
  check_id(id);
  if (nodes_[id].kind != OpKind::Param) throw GraphError("param_value: not a param node");
  return nodes_[id].value;
}

}  // namespace coxplain
