#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lcam/tensor.hpp"

namespace lcam {

enum class Op : std::uint8_t {
  leaf,
  matmul,
  transpose,
  add,
  add_rows,
  mul,
  scale,
  tanh,
  sigmoid,
  concat_rows,
  concat_cols,
  slice_cols,
  select_row,
  mean_rows,
  dropout,
  softmax_rows,
  sum,
  cross_entropy,
  bce_with_logits,
};

const char* op_name(Op op);

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  std::uint32_t id() const { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

class Gradients {
 public:
  // Gradient of the loss w.r.t. a requires_grad leaf; zeros if the leaf does
  // not reach the loss.
  const Tensor& operator[](Var leaf) const;

 private:
  friend class Tape;
  std::vector<Tensor> grads_;
};

// Records operations in execution order (which is topological by
// construction) together with their cached forward values.
class Tape {
 public:
  struct Node {
    Op op = Op::leaf;
    std::vector<std::uint32_t> inputs;
    Tensor value;
    bool requires_grad = false;
    // Per-op attributes.
    std::size_t begin = 0;
    std::size_t count = 0;
    double factor = 0.0;
    std::vector<std::size_t> targets;
    Tensor aux;  // dropout mask or BCE targets
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  std::size_t size() const { return nodes_.size(); }
  const Node& node(Var v) const { return nodes_.at(v.id()); }
  const Node& node(std::size_t id) const { return nodes_.at(id); }

  // Reverse-mode pass from a 1 x 1 loss.
  Gradients backward(Var loss) const;

  // Recomputes every non-leaf node from its inputs' cached values and checks
  // bit equality with the cached result.
  bool replay_matches() const;

  Var record(Node node);

 private:
  Tensor evaluate(const Node& node) const;

  std::vector<Node> nodes_;
};

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var add_rows(Var matrix, Var row);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var tanh(Var a);
Var sigmoid(Var a);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var slice_cols(Var a, std::size_t begin, std::size_t count);
Var select_row(Var a, std::size_t row);
Var mean_rows(Var a);
Var dropout(Var a, Tensor mask);
Var softmax_rows(Var a);
Var sum(Var a);
Var cross_entropy(Var logits, std::vector<std::size_t> targets);
Var bce_with_logits(Var logits, Tensor targets);

inline Var operator+(Var a, Var b) { return add(a, b); }

}  // namespace lcam
