#include "pip/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace pip {

namespace {

std::size_t shape_product(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw ValidationError("tensor dimensions must be positive");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

void check_2d(const Tensor& t, const char* who) {
    if (t.shape().size() != 2)
        throw DimensionError(std::string(who) + ": expected a 2-d tensor");
}

NodePtr make_node(std::vector<int> shape, std::vector<double> values,
                  std::vector<NodePtr> parents,
                  std::function<void(TensorNode&)> backward_fn) {
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->values = std::move(values);
    n->parents = std::move(parents);
    n->backward_fn = std::move(backward_fn);
    for (const auto& p : n->parents)
        if (p->requires_grad || !p->parents.empty()) {
            n->requires_grad = true;
            break;
        }
    return n;
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    auto n = std::make_shared<TensorNode>();
    n->values.assign(shape_product(shape), 0.0);
    n->shape = std::move(shape);
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values,
                    bool requires_grad) {
    if (shape_product(shape) != values.size())
        throw DimensionError("value count does not match shape");
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->values = std::move(values);
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return from({1}, {v}, requires_grad);
}

std::vector<double>& Tensor::grad() {
    node_->ensure_grad();
    return node_->grad;
}

double Tensor::item() const {
    if (node_->size() != 1) throw ContractError("item() on non-scalar tensor");
    return node_->values[0];
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_2d(a, "matmul");
    check_2d(b, "matmul");
    const int m = a.rows(), k = a.cols(), k2 = b.rows(), n = b.cols();
    if (k != k2) throw DimensionError("matmul: inner dimensions disagree");
    std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
    const auto& av = a.values();
    const auto& bv = b.values();
    for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            for (int j = 0; j < n; ++j) out[i * n + j] += aip * bv[p * n + j];
        }
    auto an = a.node(), bn = b.node();
    return Tensor(make_node(
        {m, n}, std::move(out), {an, bn}, [an, bn, m, k, n](TensorNode& self) {
            // grad_a = g . b^T ; grad_b = a^T . g
            if (an->requires_grad || !an->parents.empty()) {
                an->ensure_grad();
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < n; ++j) {
                        const double g = self.grad[i * n + j];
                        for (int p = 0; p < k; ++p)
                            an->grad[i * k + p] += g * bn->values[p * n + j];
                    }
            }
            if (bn->requires_grad || !bn->parents.empty()) {
                bn->ensure_grad();
                for (int i = 0; i < m; ++i)
                    for (int p = 0; p < k; ++p) {
                        const double av_ip = an->values[i * k + p];
                        for (int j = 0; j < n; ++j)
                            bn->grad[p * n + j] += av_ip * self.grad[i * n + j];
                    }
            }
        }));
}

namespace {

enum class BinKind { Add, Sub, Mul };

Tensor binary_op(const Tensor& a, const Tensor& b, BinKind kind) {
    const bool same = a.shape() == b.shape();
    const bool row_bcast = !same && a.shape().size() == 2 &&
                           b.shape().size() == 2 && b.rows() == 1 &&
                           b.cols() == a.cols();
    if (!same && !row_bcast)
        throw DimensionError("binary op: incompatible shapes");
    const std::size_t n = a.size();
    const std::size_t bc = b.size();
    std::vector<double> out(n);
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < n; ++i) {
        const double x = av[i], y = bv[i % bc];
        out[i] = kind == BinKind::Add ? x + y
               : kind == BinKind::Sub ? x - y
                                      : x * y;
    }
    auto an = a.node(), bn = b.node();
    return Tensor(make_node(
        a.shape(), std::move(out), {an, bn}, [an, bn, kind, n, bc](TensorNode& self) {
            if (an->requires_grad || !an->parents.empty()) {
                an->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) {
                    const double g = self.grad[i];
                    an->grad[i] += kind == BinKind::Mul ? g * bn->values[i % bc] : g;
                }
            }
            if (bn->requires_grad || !bn->parents.empty()) {
                bn->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) {
                    const double g = self.grad[i];
                    double d = kind == BinKind::Add ? g
                             : kind == BinKind::Sub ? -g
                                                    : g * an->values[i];
                    bn->grad[i % bc] += d;
                }
            }
        }));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Add); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Sub); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Mul); }

Tensor scale(const Tensor& a, double c) {
    std::vector<double> out(a.size());
    const auto& av = a.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * c;
    auto an = a.node();
    return Tensor(make_node(a.shape(), std::move(out), {an}, [an, c](TensorNode& self) {
        an->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            an->grad[i] += c * self.grad[i];
    }));
}

Tensor gelu(const Tensor& a) {
    // exact erf form; derivative = Phi(x) + x*phi(x)
    std::vector<double> out(a.size());
    const auto& av = a.values();
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = 0.5 * av[i] * (1.0 + std::erf(av[i] * kInvSqrt2));
    auto an = a.node();
    return Tensor(make_node(a.shape(), std::move(out), {an}, [an](TensorNode& self) {
        an->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const double x = an->values[i];
            const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
            const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
            an->grad[i] += self.grad[i] * (cdf + x * pdf);
        }
    }));
}

namespace {

void softmax_row(const double* in, double* out, int n) {
    double mx = in[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, in[j]);
    double z = 0.0;
    for (int j = 0; j < n; ++j) {
        out[j] = std::exp(in[j] - mx);
        z += out[j];
    }
    for (int j = 0; j < n; ++j) out[j] /= z;
}

// dx = p * (g - <g, p>) per row
void softmax_row_backward(const double* p, const double* g, double* dx, int n) {
    double dot = 0.0;
    for (int j = 0; j < n; ++j) dot += g[j] * p[j];
    for (int j = 0; j < n; ++j) dx[j] += p[j] * (g[j] - dot);
}

}  // namespace

Tensor softmax_rows(const Tensor& a) {
    check_2d(a, "softmax_rows");
    const int r = a.rows(), c = a.cols();
    std::vector<double> out(a.size());
    for (int i = 0; i < r; ++i)
        softmax_row(a.values().data() + i * c, out.data() + i * c, c);
    auto an = a.node();
    return Tensor(make_node(a.shape(), std::move(out), {an}, [an, r, c](TensorNode& self) {
        an->ensure_grad();
        for (int i = 0; i < r; ++i) {
            std::vector<double> dx(c, 0.0);
            softmax_row_backward(self.values.data() + i * c,
                                 self.grad.data() + i * c, dx.data(), c);
            for (int j = 0; j < c; ++j) an->grad[i * c + j] += dx[j];
        }
    }));
}

Tensor causal_masked_softmax(const Tensor& scores) {
    check_2d(scores, "causal_masked_softmax");
    if (scores.rows() != scores.cols())
        throw DimensionError("causal_masked_softmax: square matrix required");
    const int t = scores.rows();
    std::vector<double> out(scores.size(), 0.0);
    const auto& sv = scores.values();
    for (int i = 0; i < t; ++i) {
        // row i attends to columns 0..i only
        softmax_row(sv.data() + i * t, out.data() + i * t, i + 1);
    }
    auto sn = scores.node();
    return Tensor(make_node(scores.shape(), std::move(out), {sn}, [sn, t](TensorNode& self) {
        sn->ensure_grad();
        for (int i = 0; i < t; ++i) {
            std::vector<double> dx(i + 1, 0.0);
            softmax_row_backward(self.values.data() + i * t,
                                 self.grad.data() + i * t, dx.data(), i + 1);
            for (int j = 0; j <= i; ++j) sn->grad[i * t + j] += dx[j];
        }
    }));
}

Tensor layernorm_rows(const Tensor& a, double eps) {
    check_2d(a, "layernorm_rows");
    const int r = a.rows(), c = a.cols();
    std::vector<double> out(a.size());
    std::vector<double> inv_std(r);
    const auto& av = a.values();
    for (int i = 0; i < r; ++i) {
        double mean = 0.0;
        for (int j = 0; j < c; ++j) mean += av[i * c + j];
        mean /= c;
        double var = 0.0;
        for (int j = 0; j < c; ++j) {
            const double d = av[i * c + j] - mean;
            var += d * d;
        }
        var /= c;
        inv_std[i] = 1.0 / std::sqrt(var + eps);
        for (int j = 0; j < c; ++j)
            out[i * c + j] = (av[i * c + j] - mean) * inv_std[i];
    }
    auto an = a.node();
    return Tensor(make_node(
        a.shape(), std::move(out), {an},
        [an, r, c, inv_std = std::move(inv_std)](TensorNode& self) {
            an->ensure_grad();
            for (int i = 0; i < r; ++i) {
                const double* y = self.values.data() + i * c;
                const double* g = self.grad.data() + i * c;
                double gsum = 0.0, gysum = 0.0;
                for (int j = 0; j < c; ++j) {
                    gsum += g[j];
                    gysum += g[j] * y[j];
                }
                for (int j = 0; j < c; ++j)
                    an->grad[i * c + j] +=
                        inv_std[i] * (g[j] - gsum / c - y[j] * gysum / c);
            }
        }));
}

Tensor transpose(const Tensor& a) {
    check_2d(a, "transpose");
    const int r = a.rows(), c = a.cols();
    std::vector<double> out(a.size());
    const auto& av = a.values();
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
    auto an = a.node();
    return Tensor(make_node({c, r}, std::move(out), {an}, [an, r, c](TensorNode& self) {
        an->ensure_grad();
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j)
                an->grad[i * c + j] += self.grad[j * r + i];
    }));
}

Tensor slice_cols(const Tensor& a, int begin, int end) {
    check_2d(a, "slice_cols");
    const int r = a.rows(), c = a.cols();
    if (begin < 0 || end > c || begin >= end)
        throw DimensionError("slice_cols: range out of bounds");
    const int w = end - begin;
    std::vector<double> out(static_cast<std::size_t>(r) * w);
    const auto& av = a.values();
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < w; ++j) out[i * w + j] = av[i * c + begin + j];
    auto an = a.node();
    return Tensor(make_node({r, w}, std::move(out), {an},
                            [an, r, c, w, begin](TensorNode& self) {
                                an->ensure_grad();
                                for (int i = 0; i < r; ++i)
                                    for (int j = 0; j < w; ++j)
                                        an->grad[i * c + begin + j] +=
                                            self.grad[i * w + j];
                            }));
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ContractError("concat_cols: no parts");
    const int r = parts[0].rows();
    int total = 0;
    for (const auto& p : parts) {
        check_2d(p, "concat_cols");
        if (p.rows() != r) throw DimensionError("concat_cols: row mismatch");
        total += p.cols();
    }
    std::vector<double> out(static_cast<std::size_t>(r) * total);
    std::vector<NodePtr> nodes;
    std::vector<int> widths;
    int off = 0;
    for (const auto& p : parts) {
        const int w = p.cols();
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < w; ++j)
                out[i * total + off + j] = p.values()[i * w + j];
        nodes.push_back(p.node());
        widths.push_back(w);
        off += w;
    }
    return Tensor(make_node(
        {r, total}, std::move(out), nodes,
        [nodes, widths, r, total](TensorNode& self) {
            int o = 0;
            for (std::size_t k = 0; k < nodes.size(); ++k) {
                const int w = widths[k];
                nodes[k]->ensure_grad();
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < w; ++j)
                        nodes[k]->grad[i * w + j] += self.grad[i * total + o + j];
                o += w;
            }
        }));
}

Tensor embed(const Tensor& table, const std::vector<int>& ids) {
    check_2d(table, "embed");
    const int v = table.rows(), d = table.cols();
    const int t = static_cast<int>(ids.size());
    if (t == 0) throw ValidationError("embed: empty id sequence");
    std::vector<double> out(static_cast<std::size_t>(t) * d);
    for (int i = 0; i < t; ++i) {
        if (ids[i] < 0 || ids[i] >= v)
            throw ValidationError("embed: id out of vocabulary range");
        std::copy_n(table.values().data() + ids[i] * d, d, out.data() + i * d);
    }
    auto tn = table.node();
    return Tensor(make_node({t, d}, std::move(out), {tn}, [tn, ids, d, t](TensorNode& self) {
        tn->ensure_grad();
        for (int i = 0; i < t; ++i)
            for (int j = 0; j < d; ++j)
                tn->grad[ids[i] * d + j] += self.grad[i * d + j];
    }));
}

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.values()) s += v;
    auto an = a.node();
    return Tensor(make_node({1}, {s}, {an}, [an](TensorNode& self) {
        an->ensure_grad();
        for (double& g : an->grad) g += self.grad[0];
    }));
}

Tensor cross_entropy_next_token(const Tensor& logits, const std::vector<int>& targets) {
    check_2d(logits, "cross_entropy_next_token");
    const int t = logits.rows(), v = logits.cols();
    if (static_cast<int>(targets.size()) != t)
        throw DimensionError("cross_entropy: target count must equal logit rows");
    if (t < 1) throw ValidationError("cross_entropy: need at least one position");
    for (int id : targets)
        if (id < 0 || id >= v)
            throw ValidationError("cross_entropy: target id out of range");
    // mean over positions of logsumexp(row) - logit[target]
    double loss = 0.0;
    std::vector<double> probs(logits.size());
    const auto& lv = logits.values();
    for (int i = 0; i < t; ++i) {
        softmax_row(lv.data() + i * v, probs.data() + i * v, v);
        double mx = lv[i * v];
        for (int j = 1; j < v; ++j) mx = std::max(mx, lv[i * v + j]);
        double z = 0.0;
        for (int j = 0; j < v; ++j) z += std::exp(lv[i * v + j] - mx);
        loss += mx + std::log(z) - lv[i * v + targets[i]];
    }
    loss /= t;
    auto ln = logits.node();
    return Tensor(make_node(
        {1}, {loss}, {ln},
        [ln, targets, probs = std::move(probs), t, v](TensorNode& self) {
            // d loss / d logits = (softmax - onehot) / T
            ln->ensure_grad();
            const double g = self.grad[0] / t;
            for (int i = 0; i < t; ++i) {
                for (int j = 0; j < v; ++j)
                    ln->grad[i * v + j] += g * probs[i * v + j];
                ln->grad[i * v + targets[i]] -= g;
            }
        }));
}

void backward(Tensor& loss) {
    if (loss.size() != 1)
        throw ContractError("backward: loss must be scalar");
    // iterative post-order topo sort
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> visited;
    std::vector<std::pair<NodePtr, std::size_t>> stack;
    stack.emplace_back(loss.node(), 0);
    visited.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            NodePtr next = node->parents[idx++];
            if (visited.insert(next.get()).second && !next->parents.empty())
                stack.emplace_back(next, 0);
        } else {
            order.push_back(node.get());
            stack.pop_back();
        }
    }
    loss.node()->ensure_grad();
    loss.node()->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode* n = *it;
        if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
    }
}

}  // namespace pip
