#include "tss/ad/tensor.hpp"

#include <malloc.h>

#include <algorithm>
#include <functional>
#include <numeric>
#include <unordered_set>

#include "tss/errors.hpp"

namespace tss::ad {

namespace {

// Feature maps are large and short-lived; serving them from the heap instead
// of fresh mmap regions avoids a page-fault storm on every forward pass.
const bool kHeapTuned = [] {
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
  return true;
}();

}  // namespace

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

namespace {
std::shared_ptr<detail::Node> make_leaf(Shape shape, std::vector<double> values, bool requires_grad) {
  if (numel(shape) != values.size())
    throw DomainError("Tensor: shape " + shape_string(shape) + " does not match " +
                      std::to_string(values.size()) + " values");
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return node;
}
}  // namespace

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
  return from_node(make_leaf(std::move(shape), std::move(values), false));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  return from_node(make_leaf(std::move(shape), std::move(values), true));
}

Tensor Tensor::zeros(Shape shape) {
  const std::size_t n = ad::numel(shape);
  return constant(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::scalar(double value) { return constant({}, {value}); }

Tensor Tensor::from_node(std::shared_ptr<detail::Node> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= node_->shape.size())
    throw DomainError("Tensor::dim: axis out of range for shape " + shape_string(node_->shape));
  return node_->shape[axis];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }

std::span<const double> Tensor::values() const { return node_->value; }

std::span<double> Tensor::mutable_values() {
  if (!node_->is_leaf) throw StateError("Tensor::mutable_values: not a leaf tensor");
  return node_->value;
}

std::span<const double> Tensor::grad() const { return node_->grad; }

std::span<double> Tensor::mutable_grad() { return node_->ensure_grad(); }

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

double Tensor::item() const {
  if (node_->value.size() != 1)
    throw DomainError("Tensor::item: tensor has " + std::to_string(node_->value.size()) + " elements");
  return node_->value[0];
}

Tensor Tensor::detach() const { return constant(node_->shape, node_->value); }

void Tensor::backward() const {
  if (node_->value.size() != 1)
    throw DomainError("backward: loss must be a scalar, got shape " + shape_string(node_->shape));
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->inputs.size()) {
      detail::Node* child = n->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.push_back({child, 0});
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->is_leaf || !n->backward) continue;
    n->ensure_grad();
    n->backward(*n);
  }
  // Release the tape; leaves keep their accumulated gradients.
  for (detail::Node* n : order) {
    if (n->is_leaf) continue;
    n->backward = nullptr;
    n->inputs.clear();
  }
}

namespace detail {

Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                   std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->is_leaf = false;
  const bool needs = g_grad_enabled && std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) {
                       return t.requires_grad();
                     });
  if (needs) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (auto& t : inputs) node->inputs.push_back(t.node());
    node->backward = std::move(backward);
  }
  return Tensor::from_node(std::move(node));
}

}  // namespace detail

}  // namespace tss::ad
