#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace pip {

struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ContractError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

// Reverse-mode tape node. values are row-major doubles; grad is allocated
// lazily and accumulates across backward calls until zero_grad().
struct TensorNode {
    std::vector<int> shape;
    std::vector<double> values;
    std::vector<double> grad;
    bool requires_grad = false;
    std::vector<NodePtr> parents;
    std::function<void(TensorNode&)> backward_fn;

    std::size_t size() const { return values.size(); }
    void ensure_grad() {
        if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
    }
};

// Value-semantics handle to a shared tape node.
class Tensor {
   public:
    Tensor() = default;
    explicit Tensor(NodePtr node) : node_(std::move(node)) {}

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor from(std::vector<int> shape, std::vector<double> values,
                       bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    const std::vector<int>& shape() const { return node_->shape; }
    int rows() const { return node_->shape.at(0); }
    int cols() const { return node_->shape.at(1); }
    std::size_t size() const { return node_->size(); }

    std::vector<double>& values() { return node_->values; }
    const std::vector<double>& values() const { return node_->values; }
    std::vector<double>& grad();
    bool has_grad() const { return !node_->grad.empty(); }
    bool requires_grad() const { return node_->requires_grad; }
    void zero_grad() { node_->grad.assign(node_->values.size(), 0.0); }

    double item() const;
    bool defined() const { return node_ != nullptr; }
    NodePtr node() const { return node_; }

   private:
    NodePtr node_;
};

// All binary ops require exact shape match except add/mul, which also accept
// a [1 x C] right operand broadcast over rows of a [R x C] left operand.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor gelu(const Tensor& a);
Tensor softmax_rows(const Tensor& a);
Tensor causal_masked_softmax(const Tensor& scores);  // [T x T], entries j > i masked out
Tensor layernorm_rows(const Tensor& a, double eps = 1e-5);
Tensor transpose(const Tensor& a);
Tensor slice_cols(const Tensor& a, int begin, int end);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor embed(const Tensor& table, const std::vector<int>& ids);
Tensor sum(const Tensor& a);
Tensor cross_entropy_next_token(const Tensor& logits, const std::vector<int>& targets);

// Seeds grad(loss) = 1 and replays the tape in reverse topological order.
// Gradients accumulate; callers reset between samples via zero_grad().
void backward(Tensor& loss);

}  // namespace pip
