#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "amt/tensor.hpp"

namespace amt::nn {

/// A trainable tensor with a persistent gradient accumulator.
template <typename S>
struct Parameter {
  std::string name;
  Tensor<S> value;
  Tensor<S> grad;

  Parameter(std::string n, Tensor<S> v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad.zero(); }
};

/// Ordered collection of Parameters. Creation order is the checkpoint order.
template <typename S>
class ParamStore {
 public:
  Parameter<S>& create(const std::string& name, Tensor<S> init) {
    if (by_name_.count(name)) throw NumericError("duplicate parameter name: " + name);
    params_.push_back(std::make_unique<Parameter<S>>(name, std::move(init)));
    by_name_[name] = params_.back().get();
    return *params_.back();
  }

  Parameter<S>* find(const std::string& name) const {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : it->second;
  }

  Parameter<S>& at(const std::string& name) const {
    Parameter<S>* p = find(name);
    if (!p) throw NumericError("unknown parameter: " + name);
    return *p;
  }

  const std::vector<std::unique_ptr<Parameter<S>>>& all() const { return params_; }
  size_t count() const { return params_.size(); }

  int64_t total_size() const {
    int64_t n = 0;
    for (const auto& p : params_) n += p->value.size();
    return n;
  }

  void zero_grads() {
    for (auto& p : params_) p->zero_grad();
  }

 private:
  std::vector<std::unique_ptr<Parameter<S>>> params_;
  std::unordered_map<std::string, Parameter<S>*> by_name_;
};

template <typename S>
class Graph;

/// Handle to a node in a Graph. Cheap to copy.
template <typename S>
struct Var {
  Graph<S>* graph = nullptr;
  int id = -1;

  bool defined() const { return graph != nullptr; }
  const Tensor<S>& value() const { return graph->value(id); }
  const Shape& shape() const { return graph->value(id).shape(); }
  int64_t dim(int i) const { return graph->value(id).dim(i); }
  int rank() const { return graph->value(id).rank(); }
};

/// Eager reverse-mode tape. Nodes are appended in topological order; backward
/// walks them in reverse and finally flushes leaf gradients into Parameters
/// in leaf-creation order, so accumulation is deterministic.
template <typename S>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, int)>;

  struct Node {
    Tensor<S> value;
    Tensor<S> grad;
    BackwardFn backward;
    Parameter<S>* param = nullptr;
    bool needs_grad = false;
    bool grad_live = false;
  };

  Var<S> constant(Tensor<S> value) { return push(std::move(value), false, {}, nullptr); }

  /// Inference switch: with gradients disabled, parameters enter as plain
  /// constants and no backward closures are recorded.
  void set_grad_enabled(bool enabled) { grad_enabled_ = enabled; }
  bool grad_enabled() const { return grad_enabled_; }

  /// Leaf bound to a Parameter; one node per Parameter per graph, so repeated
  /// uses accumulate into a single gradient buffer.
  Var<S> param(Parameter<S>& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return Var<S>{this, it->second};
    Var<S> v = push(p.value, grad_enabled_, {}, grad_enabled_ ? &p : nullptr);
    param_nodes_[&p] = v.id;
    if (grad_enabled_) param_leaves_.push_back(v.id);
    return v;
  }

  Var<S> make(Tensor<S> value, bool needs_grad, BackwardFn bw) {
    return push(std::move(value), needs_grad, std::move(bw), nullptr);
  }

  Tensor<S>& value(int id) { return nodes_[static_cast<size_t>(id)].value; }
  const Tensor<S>& value(int id) const { return nodes_[static_cast<size_t>(id)].value; }

  bool needs_grad(int id) const { return nodes_[static_cast<size_t>(id)].needs_grad; }
  bool grad_live(int id) const { return nodes_[static_cast<size_t>(id)].grad_live; }

  /// Gradient buffer for a node, allocated (zeroed) on first touch.
  Tensor<S>& grad(int id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.grad_live) {
      n.grad = Tensor<S>(n.value.shape());
      n.grad_live = true;
    }
    return n.grad;
  }

  void accum(int id, const Tensor<S>& g) {
    if (!needs_grad(id)) return;
    Tensor<S>& dst = grad(id);
    const S* src = g.data();
    S* d = dst.data();
    for (int64_t i = 0; i < dst.size(); ++i) d[i] += src[i];
  }

  /// Reverse-mode accumulation from a scalar root into every reachable
  /// Parameter's grad.
  void backward(Var<S> root) {
    backward_collect(root);
    flush_param_grads();
  }

  /// Backward pass that leaves gradients on the leaf nodes; callers running
  /// several graphs in parallel flush them in a deterministic order.
  void backward_collect(Var<S> root) {
    if (root.graph != this) throw NumericError("backward: root from a different graph");
    if (value(root.id).size() != 1) throw NumericError("backward: root must be a scalar");
    if (!needs_grad(root.id)) return;
    grad(root.id)[0] = S(1);
    for (int id = root.id; id >= 0; --id) {
      Node& n = nodes_[static_cast<size_t>(id)];
      if (n.grad_live && n.backward) n.backward(*this, id);
    }
  }

  void flush_param_grads() {
    for (int id : param_leaves_) {
      Node& n = nodes_[static_cast<size_t>(id)];
      if (!n.grad_live) continue;
      S* dst = n.param->grad.data();
      const S* src = n.grad.data();
      for (int64_t i = 0; i < n.grad.size(); ++i) dst[i] += src[i];
    }
  }

  size_t num_nodes() const { return nodes_.size(); }

  void clear() {
    nodes_.clear();
    param_nodes_.clear();
    param_leaves_.clear();
  }

 private:
  Var<S> push(Tensor<S> value, bool needs_grad, BackwardFn bw, Parameter<S>* p) {
    Node n;
    n.value = std::move(value);
    n.backward = std::move(bw);
    n.param = p;
    n.needs_grad = needs_grad;
    nodes_.push_back(std::move(n));
    return Var<S>{this, static_cast<int>(nodes_.size() - 1)};
  }

  std::vector<Node> nodes_;
  std::unordered_map<Parameter<S>*, int> param_nodes_;
  std::vector<int> param_leaves_;
  bool grad_enabled_ = true;
};

}  // namespace amt::nn
