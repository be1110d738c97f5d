#include "lcam/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lcam/kernels.hpp"

namespace lcam {

const char* op_name(Op op) {
  switch (op) {
    case Op::leaf: return "leaf";
    case Op::matmul: return "matmul";
    case Op::transpose: return "transpose";
    case Op::add: return "add";
    case Op::add_rows: return "add_rows";
    case Op::mul: return "mul";
    case Op::scale: return "scale";
    case Op::tanh: return "tanh";
    case Op::sigmoid: return "sigmoid";
    case Op::concat_rows: return "concat_rows";
    case Op::concat_cols: return "concat_cols";
    case Op::slice_cols: return "slice_cols";
    case Op::select_row: return "select_row";
    case Op::mean_rows: return "mean_rows";
    case Op::dropout: return "dropout";
    case Op::softmax_rows: return "softmax_rows";
    case Op::sum: return "sum";
    case Op::cross_entropy: return "cross_entropy";
    case Op::bce_with_logits: return "bce_with_logits";
  }
  return "?";
}

const Tensor& Var::value() const { return tape_->node(id_).value; }
bool Var::requires_grad() const { return tape_->node(id_).requires_grad; }

const Tensor& Gradients::operator[](Var leaf) const {
  const Tensor& g = grads_.at(leaf.id());
  if (g.size() == 0) throw std::invalid_argument("gradients: node " + std::to_string(leaf.id()) + " is not a parameter");
  return g;
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.op = Op::leaf;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::record(Node n) {
  n.requires_grad = false;
  for (std::uint32_t in : n.inputs) {
    if (in >= nodes_.size()) throw std::logic_error("tape: input refers to a later node");
    n.requires_grad = n.requires_grad || nodes_[in].requires_grad;
  }
  n.value = evaluate(n);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Tensor Tape::evaluate(const Node& n) const {
  auto in = [&](std::size_t i) -> const Tensor& { return nodes_[n.inputs[i]].value; };
  switch (n.op) {
    case Op::leaf: return n.value;
    case Op::matmul: return kernels::matmul(in(0), in(1));
    case Op::transpose: return kernels::transpose(in(0));
    case Op::add: return kernels::add(in(0), in(1));
    case Op::add_rows: return kernels::add_rows(in(0), in(1));
    case Op::mul: return kernels::mul(in(0), in(1));
    case Op::scale: return kernels::scale(in(0), n.factor);
    case Op::tanh: return kernels::tanh(in(0));
    case Op::sigmoid: return kernels::sigmoid(in(0));
    case Op::concat_rows:
    case Op::concat_cols: {
      std::vector<const Tensor*> parts;
      for (std::uint32_t id : n.inputs) parts.push_back(&nodes_[id].value);
      return n.op == Op::concat_rows ? kernels::concat_rows(parts) : kernels::concat_cols(parts);
    }
    case Op::slice_cols: return kernels::slice_cols(in(0), n.begin, n.count);
    case Op::select_row: return kernels::select_row(in(0), n.begin);
    case Op::mean_rows: return kernels::mean_rows(in(0));
    case Op::dropout: return kernels::dropout(in(0), n.aux);
    case Op::softmax_rows: return kernels::softmax_rows(in(0));
    case Op::sum: return kernels::sum(in(0));
    case Op::cross_entropy: return kernels::cross_entropy(in(0), n.targets);
    case Op::bce_with_logits: return kernels::bce_with_logits(in(0), n.aux);
  }
  throw std::logic_error("tape: unknown op");
}

bool Tape::replay_matches() const {
  for (const Node& n : nodes_) {
    if (n.op == Op::leaf) continue;
    if (!(evaluate(n) == n.value)) return false;
  }
  return true;
}

namespace {

void accumulate(Tensor& into, const Tensor& delta) {
  if (into.size() == 0) {
    into = delta;
    return;
  }
  for (std::size_t i = 0; i < into.size(); ++i) into[i] += delta[i];
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Gradients Tape::backward(Var loss) const {
  if (loss.tape() != this) throw std::invalid_argument("backward: loss belongs to another tape");
  const Tensor& lv = node(loss).value;
  if (lv.size() != 1) throw DimensionError("backward: loss must be scalar, got " + shape_string(lv.shape()));

  Gradients out;
  auto& g = out.grads_;
  g.assign(nodes_.size(), Tensor());
  g[loss.id()] = Tensor(lv.shape(), {1.0});

  for (std::size_t idx = loss.id() + 1; idx-- > 0;) {
    const Node& n = nodes_[idx];
    if (!n.requires_grad || n.op == Op::leaf || g[idx].size() == 0) continue;
    const Tensor& dy = g[idx];
    auto in = [&](std::size_t i) -> const Tensor& { return nodes_[n.inputs[i]].value; };
    auto wants = [&](std::size_t i) { return nodes_[n.inputs[i]].requires_grad; };
    auto push = [&](std::size_t i, const Tensor& delta) {
      if (wants(i)) accumulate(g[n.inputs[i]], delta);
    };

    switch (n.op) {
      case Op::leaf: break;
      case Op::matmul:
        if (wants(0)) push(0, kernels::matmul(dy, kernels::transpose(in(1))));
        if (wants(1)) push(1, kernels::matmul(kernels::transpose(in(0)), dy));
        break;
      case Op::transpose: push(0, kernels::transpose(dy)); break;
      case Op::add:
        push(0, dy);
        push(1, dy);
        break;
      case Op::add_rows: {
        push(0, dy);
        if (wants(1)) {
          Tensor col_sums = Tensor::zeros(1, dy.cols());
          for (std::size_t i = 0; i < dy.rows(); ++i)
            for (std::size_t j = 0; j < dy.cols(); ++j) col_sums[j] += dy(i, j);
          push(1, col_sums);
        }
        break;
      }
      case Op::mul:
        if (wants(0)) push(0, kernels::mul(dy, in(1)));
        if (wants(1)) push(1, kernels::mul(dy, in(0)));
        break;
      case Op::scale: push(0, kernels::scale(dy, n.factor)); break;
      case Op::tanh: {
        Tensor d = dy;
        for (std::size_t i = 0; i < d.size(); ++i) d[i] *= 1.0 - n.value[i] * n.value[i];
        push(0, d);
        break;
      }
      case Op::sigmoid: {
        Tensor d = dy;
        for (std::size_t i = 0; i < d.size(); ++i) d[i] *= n.value[i] * (1.0 - n.value[i]);
        push(0, d);
        break;
      }
      case Op::concat_rows: {
        std::size_t offset = 0;
        for (std::size_t p = 0; p < n.inputs.size(); ++p) {
          const Tensor& part = in(p);
          if (wants(p)) {
            std::vector<double> vals(dy.values().begin() + static_cast<std::ptrdiff_t>(offset * dy.cols()),
                                     dy.values().begin() +
                                         static_cast<std::ptrdiff_t>((offset + part.rows()) * dy.cols()));
            push(p, Tensor(part.shape(), std::move(vals)));
          }
          offset += part.rows();
        }
        break;
      }
      case Op::concat_cols: {
        std::size_t offset = 0;
        for (std::size_t p = 0; p < n.inputs.size(); ++p) {
          const Tensor& part = in(p);
          if (wants(p)) push(p, kernels::slice_cols(dy, offset, part.cols()));
          offset += part.cols();
        }
        break;
      }
      case Op::slice_cols: {
        Tensor d = Tensor::zeros(in(0).rows(), in(0).cols());
        for (std::size_t i = 0; i < dy.rows(); ++i)
          for (std::size_t j = 0; j < n.count; ++j) d(i, n.begin + j) = dy(i, j);
        push(0, d);
        break;
      }
      case Op::select_row: {
        Tensor d = Tensor::zeros(in(0).rows(), in(0).cols());
        for (std::size_t j = 0; j < dy.cols(); ++j) d(n.begin, j) = dy[j];
        push(0, d);
        break;
      }
      case Op::mean_rows: {
        const std::size_t m = in(0).rows();
        Tensor d = Tensor::zeros(m, in(0).cols());
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < d.cols(); ++j) d(i, j) = dy[j] / static_cast<double>(m);
        push(0, d);
        break;
      }
      case Op::dropout: push(0, kernels::mul(dy, n.aux)); break;
      case Op::softmax_rows: {
        const Tensor& y = n.value;
        Tensor d = Tensor::zeros(y.rows(), y.cols());
        for (std::size_t i = 0; i < y.rows(); ++i) {
          double dot = 0.0;
          for (std::size_t j = 0; j < y.cols(); ++j) dot += dy(i, j) * y(i, j);
          for (std::size_t j = 0; j < y.cols(); ++j) d(i, j) = y(i, j) * (dy(i, j) - dot);
        }
        push(0, d);
        break;
      }
      case Op::sum: push(0, Tensor(in(0).shape(), std::vector<double>(in(0).size(), dy.item()))); break;
      case Op::cross_entropy: {
        const Tensor& z = in(0);
        Tensor d = kernels::softmax_rows(z);
        for (std::size_t r = 0; r < z.rows(); ++r) d(r, n.targets[r]) -= 1.0;
        push(0, kernels::scale(d, dy.item()));
        break;
      }
      case Op::bce_with_logits: {
        const Tensor& z = in(0);
        Tensor d(z.shape(), std::vector<double>(z.size()));
        for (std::size_t i = 0; i < z.size(); ++i) d[i] = (stable_sigmoid(z[i]) - n.aux[i]) * dy.item();
        push(0, d);
        break;
      }
    }
  }

  for (std::size_t idx = 0; idx < nodes_.size(); ++idx) {
    const Node& n = nodes_[idx];
    if (n.op == Op::leaf && n.requires_grad && g[idx].size() == 0) {
      g[idx] = Tensor(n.value.shape(), std::vector<double>(n.value.size(), 0.0));
    }
    if (n.op != Op::leaf || !n.requires_grad) g[idx] = Tensor();
  }
  return out;
}

namespace {

Tape& tape_of(Var v) {
  if (v.tape() == nullptr) throw std::invalid_argument("tape op on an unbound Var");
  return *v.tape();
}

Tape& same_tape(Var a, Var b) {
  if (a.tape() != b.tape()) throw std::invalid_argument("tape op mixes two tapes");
  return tape_of(a);
}

Tape::Node make(Op op, std::initializer_list<Var> inputs) {
  Tape::Node n;
  n.op = op;
  for (Var v : inputs) n.inputs.push_back(v.id());
  return n;
}

Var record_list(Op op, std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError(std::string(op_name(op)) + ": no inputs");
  Tape& t = tape_of(parts[0]);
  Tape::Node n;
  n.op = op;
  for (Var v : parts) {
    if (v.tape() != &t) throw std::invalid_argument("tape op mixes two tapes");
    n.inputs.push_back(v.id());
  }
  return t.record(std::move(n));
}

}  // namespace

Var matmul(Var a, Var b) { return same_tape(a, b).record(make(Op::matmul, {a, b})); }
Var transpose(Var a) { return tape_of(a).record(make(Op::transpose, {a})); }
Var add(Var a, Var b) { return same_tape(a, b).record(make(Op::add, {a, b})); }
Var add_rows(Var matrix, Var row) { return same_tape(matrix, row).record(make(Op::add_rows, {matrix, row})); }
Var mul(Var a, Var b) { return same_tape(a, b).record(make(Op::mul, {a, b})); }

Var scale(Var a, double factor) {
  auto n = make(Op::scale, {a});
  n.factor = factor;
  return tape_of(a).record(std::move(n));
}

Var tanh(Var a) { return tape_of(a).record(make(Op::tanh, {a})); }
Var sigmoid(Var a) { return tape_of(a).record(make(Op::sigmoid, {a})); }
Var concat_rows(std::span<const Var> parts) { return record_list(Op::concat_rows, parts); }
Var concat_cols(std::span<const Var> parts) { return record_list(Op::concat_cols, parts); }

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  auto n = make(Op::slice_cols, {a});
  n.begin = begin;
  n.count = count;
  return tape_of(a).record(std::move(n));
}

Var select_row(Var a, std::size_t row) {
  auto n = make(Op::select_row, {a});
  n.begin = row;
  return tape_of(a).record(std::move(n));
}

Var mean_rows(Var a) { return tape_of(a).record(make(Op::mean_rows, {a})); }

Var dropout(Var a, Tensor mask) {
  auto n = make(Op::dropout, {a});
  n.aux = std::move(mask);
  return tape_of(a).record(std::move(n));
}

Var softmax_rows(Var a) { return tape_of(a).record(make(Op::softmax_rows, {a})); }
Var sum(Var a) { return tape_of(a).record(make(Op::sum, {a})); }

Var cross_entropy(Var logits, std::vector<std::size_t> targets) {
  auto n = make(Op::cross_entropy, {logits});
  n.targets = std::move(targets);
  return tape_of(logits).record(std::move(n));
}

Var bce_with_logits(Var logits, Tensor targets) {
  auto n = make(Op::bce_with_logits, {logits});
  n.aux = std::move(targets);
  return tape_of(logits).record(std::move(n));
}

}  // namespace lcam
