#pragma once

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace mvil {

template <typename Scalar>
using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

inline std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

inline int shape_numel(const std::vector<int>& s) {
  int n = 1;
  for (int e : s) {
    if (e < 1) throw std::invalid_argument("tensor extent must be >= 1, got shape " + shape_str(s));
    n *= e;
  }
  return n;
}

template <typename Scalar>
class Tensor;

// One node of the compute graph. Values are immutable after the forward
// pass; `grad` is the persistent accumulator that backward() adds into.
template <typename Scalar>
struct TensorNode {
  std::vector<int> shape;
  ArrayX<Scalar> value;
  ArrayX<Scalar> grad;  // empty until first backward touches this node
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  // backward_fn(pass_grad_of_this, parent pass-grad slots). A null slot
  // means that parent does not need gradients.
  std::function<void(const ArrayX<Scalar>&, std::vector<ArrayX<Scalar>*>&)> backward_fn;

  int numel() const { return static_cast<int>(value.size()); }
};

// Per-call cumulative gradient table for thread-confined training workers.
// Maps parameter nodes to locally owned accumulators so that concurrent
// graphs can share parameter values without racing on their .grad.
template <typename Scalar>
struct GradTable {
  std::unordered_map<const TensorNode<Scalar>*, ArrayX<Scalar>> slots;

  void track(const Tensor<Scalar>& t);
  void add_into(GradTable& other) const {
    for (auto& [k, v] : slots) other.slots.at(k) += v;
  }
};

template <typename Scalar>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorNode<Scalar>> n) : node_(std::move(n)) {}

  static Tensor zeros(std::vector<int> shape) {
    auto n = std::make_shared<TensorNode<Scalar>>();
    n->value = ArrayX<Scalar>::Zero(shape_numel(shape));
    n->shape = std::move(shape);
    return Tensor(n);
  }

  static Tensor from_array(std::vector<int> shape, ArrayX<Scalar> data) {
    if (static_cast<int>(data.size()) != shape_numel(shape))
      throw std::invalid_argument("data length does not match shape " + shape_str(shape));
    auto n = std::make_shared<TensorNode<Scalar>>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    return Tensor(n);
  }

  static Tensor from_vector(std::vector<int> shape, const std::vector<Scalar>& data) {
    ArrayX<Scalar> a(static_cast<Eigen::Index>(data.size()));
    for (std::size_t i = 0; i < data.size(); ++i) a[static_cast<Eigen::Index>(i)] = data[i];
    return from_array(std::move(shape), std::move(a));
  }

  static Tensor scalar(Scalar v) {
    ArrayX<Scalar> a(1);
    a[0] = v;
    return from_array({1}, std::move(a));
  }

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  int dim(int i) const { return node_->shape[static_cast<std::size_t>(i)]; }
  int numel() const { return node_->numel(); }

  ArrayX<Scalar>& value() { return node_->value; }
  const ArrayX<Scalar>& value() const { return node_->value; }

  Scalar item() const {
    if (numel() != 1) throw std::invalid_argument("item() requires a scalar tensor, shape is " + shape_str(shape()));
    return node_->value[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool b) {
    node_->requires_grad = b;
    return *this;
  }

  // Persistent accumulated gradient; zero-filled if backward never reached
  // this node.
  const ArrayX<Scalar>& grad() const {
    if (node_->grad.size() == 0) node_->grad = ArrayX<Scalar>::Zero(node_->value.size());
    return node_->grad;
  }
  void zero_grad() { node_->grad = ArrayX<Scalar>::Zero(node_->value.size()); }

  std::shared_ptr<TensorNode<Scalar>> node() const { return node_; }

  // Reverse-mode pass from a scalar loss. Gradients of this pass are
  // ACCUMULATED into .grad of every grad-requiring node (so running the
  // same graph's backward twice doubles each gradient), or, when `sink`
  // is given, into the sink's tracked parameter slots only.
  void backward(GradTable<Scalar>* sink = nullptr) const {
    if (numel() != 1) throw std::invalid_argument("backward() requires a scalar loss, shape is " + shape_str(shape()));
    // Topological order via iterative DFS; bookkeeping is call-local so
    // concurrent graphs may share parameter nodes.
    std::vector<TensorNode<Scalar>*> topo;
    std::unordered_map<const TensorNode<Scalar>*, int> index;
    {
      std::vector<std::pair<TensorNode<Scalar>*, std::size_t>> stack;
      stack.emplace_back(node_.get(), 0);
      std::unordered_map<const TensorNode<Scalar>*, bool> done;
      while (!stack.empty()) {
        auto& [n, child] = stack.back();
        if (!n->requires_grad) {  // constants contribute no gradient paths
          stack.pop_back();
          continue;
        }
        if (done.count(n)) {
          stack.pop_back();
          continue;
        }
        if (child < n->parents.size()) {
          TensorNode<Scalar>* p = n->parents[child].get();
          ++child;
          if (p->requires_grad && !done.count(p)) stack.emplace_back(p, 0);
        } else {
          done[n] = true;
          index[n] = static_cast<int>(topo.size());
          topo.push_back(n);
        }
      }
    }
    if (topo.empty()) return;  // loss does not require grad anywhere

    std::vector<ArrayX<Scalar>> pass(topo.size());
    for (std::size_t i = 0; i < topo.size(); ++i) pass[i] = ArrayX<Scalar>::Zero(topo[i]->value.size());
    pass.back()[0] = Scalar(1);

    for (int i = static_cast<int>(topo.size()) - 1; i >= 0; --i) {
      TensorNode<Scalar>* n = topo[static_cast<std::size_t>(i)];
      if (!n->backward_fn) continue;
      std::vector<ArrayX<Scalar>*> parent_slots(n->parents.size(), nullptr);
      for (std::size_t p = 0; p < n->parents.size(); ++p) {
        auto it = index.find(n->parents[p].get());
        if (it != index.end()) parent_slots[p] = &pass[static_cast<std::size_t>(it->second)];
      }
      n->backward_fn(pass[static_cast<std::size_t>(i)], parent_slots);
    }

    if (sink) {
      for (std::size_t i = 0; i < topo.size(); ++i) {
        auto it = sink->slots.find(topo[i]);
        if (it != sink->slots.end()) it->second += pass[i];
      }
    } else {
      for (std::size_t i = 0; i < topo.size(); ++i) {
        TensorNode<Scalar>* n = topo[i];
        if (n->grad.size() == 0) n->grad = ArrayX<Scalar>::Zero(n->value.size());
        n->grad += pass[i];
      }
    }
  }

 private:
  std::shared_ptr<TensorNode<Scalar>> node_;
};

template <typename Scalar>
void GradTable<Scalar>::track(const Tensor<Scalar>& t) {
  slots[t.node().get()] = ArrayX<Scalar>::Zero(t.numel());
}

// Graph construction helper shared by every op.
template <typename Scalar>
Tensor<Scalar> make_op(std::vector<int> shape, ArrayX<Scalar> value,
                       std::vector<Tensor<Scalar>> parents,
                       std::function<void(const ArrayX<Scalar>&, std::vector<ArrayX<Scalar>*>&)> backward_fn) {
  auto n = std::make_shared<TensorNode<Scalar>>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  bool rg = false;
  n->parents.reserve(parents.size());
  for (const auto& p : parents) {
    n->parents.push_back(p.node());
    rg = rg || p.requires_grad();
  }
  n->requires_grad = rg;
  if (rg) n->backward_fn = std::move(backward_fn);
  return Tensor<Scalar>(n);
}

// Named parameter collection, ordered by registration. The order defines
// the checkpoint layout.
template <typename Scalar>
class ParamRegistry {
 public:
  Tensor<Scalar> add(const std::string& name, Tensor<Scalar> t) {
    t.set_requires_grad(true);
    names_.push_back(name);
    params_.push_back(t);
    return t;
  }
  std::size_t size() const { return params_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  Tensor<Scalar>& param(std::size_t i) { return params_[i]; }
  const Tensor<Scalar>& param(std::size_t i) const { return params_[i]; }
  void zero_grads() {
    for (auto& p : params_) p.zero_grad();
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor<Scalar>> params_;
};

}  // namespace mvil
