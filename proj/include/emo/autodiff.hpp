#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "emo/errors.hpp"
#include "emo/tensor.hpp"

namespace emo {

class Node;
using NodePtr = std::shared_ptr<Node>;

/// One node of the reverse-mode graph: a value, its gradient accumulator and
/// the local backward rules pushing upstream gradient into each parent.
class Node {
public:
    struct Parent {
        NodePtr node;
        // Receives d(loss)/d(this node) and accumulates into parent->grad.
        std::function<void(const Tensor& upstream)> push;
    };

    Tensor value;
    Tensor grad;
    std::vector<Parent> parents;
    bool requires_grad = false;

    explicit Node(Tensor v, bool needs_grad = false)
        : value(std::move(v)), grad(Tensor::zeros_like(value)), requires_grad(needs_grad) {}
};

/// Value-semantic handle to a graph node. Copies share the node.
class Var {
public:
    Var() = default;
    explicit Var(NodePtr n) : node_(std::move(n)) {}

    /// Leaf with no gradient (inputs, masks, targets).
    static Var constant(Tensor v) { return Var(std::make_shared<Node>(std::move(v), false)); }

    /// Leaf that accumulates gradient (trainable parameter).
    static Var param(Tensor v) { return Var(std::make_shared<Node>(std::move(v), true)); }

    const Tensor& value() const { return node_->value; }
    Tensor& value_mut() { return node_->value; }
    const Tensor& grad() const { return node_->grad; }
    Tensor& grad_mut() { return node_->grad; }
    const NodePtr& node() const { return node_; }
    bool defined() const { return static_cast<bool>(node_); }

    void zero_grad() { std::fill(node_->grad.flat().begin(), node_->grad.flat().end(), 0.0); }

private:
    NodePtr node_;
};

namespace detail {

inline void acc(Tensor& dst, const Tensor& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

inline NodePtr make_op(Tensor value, std::vector<Node::Parent> parents) {
    check_finite(value, "op output");
    auto n = std::make_shared<Node>(std::move(value));
    for (const auto& p : parents)
        if (p.node->requires_grad) n->requires_grad = true;
    n->parents = std::move(parents);
    return n;
}

}  // namespace detail

// ---- matrix / vector products ----------------------------------------------

/// [m x k] . [k x n] -> [m x n]
inline Var matmul(const Var& a, const Var& b) {
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    if (A.rank() != 2 || B.rank() != 2 || A.cols() != B.rows())
        throw dimension_error("matmul: incompatible shapes " + A.shape_str() + " . " + B.shape_str());
    std::size_t m = A.rows(), k = A.cols(), n = B.cols();
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            double av = A.at(i, p);
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) out.at(i, j) += av * B.at(p, j);
        }
    auto an = a.node(), bn = b.node();
    return Var(detail::make_op(std::move(out), {
        {an, [an, bn, m, k, n](const Tensor& g) {
             // a.grad += g . b^T
             for (std::size_t i = 0; i < m; ++i)
                 for (std::size_t p = 0; p < k; ++p) {
                     double s = 0.0;
                     for (std::size_t j = 0; j < n; ++j)
                         s += g.at(i, j) * bn->value.at(p, j);
                     an->grad.at(i, p) += s;
                 }
         }},
        {bn, [an, bn, m, k, n](const Tensor& g) {
             // b.grad += a^T . g
             for (std::size_t p = 0; p < k; ++p)
                 for (std::size_t i = 0; i < m; ++i) {
                     double av = an->value.at(i, p);
                     if (av == 0.0) continue;
                     for (std::size_t j = 0; j < n; ++j)
                         bn->grad.at(p, j) += av * g.at(i, j);
                 }
         }},
    }));
}

/// [m x k] . [k] -> [m]
inline Var matvec(const Var& w, const Var& x) {
    const Tensor& W = w.value();
    const Tensor& X = x.value();
    if (W.rank() != 2 || X.rank() != 1 || W.cols() != X.size())
        throw dimension_error("matvec: incompatible shapes " + W.shape_str() + " . " + X.shape_str());
    std::size_t m = W.rows(), k = W.cols();
    Tensor out({m});
    for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t p = 0; p < k; ++p) s += W.at(i, p) * X[p];
        out[i] = s;
    }
    auto wn = w.node(), xn = x.node();
    return Var(detail::make_op(std::move(out), {
        {wn, [wn, xn, m, k](const Tensor& g) {
             for (std::size_t i = 0; i < m; ++i)
                 for (std::size_t p = 0; p < k; ++p)
                     wn->grad.at(i, p) += g[i] * xn->value[p];
         }},
        {xn, [wn, xn, m, k](const Tensor& g) {
             for (std::size_t p = 0; p < k; ++p) {
                 double s = 0.0;
                 for (std::size_t i = 0; i < m; ++i) s += wn->value.at(i, p) * g[i];
                 xn->grad[p] += s;
             }
         }},
    }));
}

// ---- elementwise ------------------------------------------------------------

inline Var add(const Var& a, const Var& b) {
    if (!a.value().same_shape(b.value()))
        throw dimension_error("add: shape mismatch " + a.value().shape_str() + " vs " + b.value().shape_str());
    Tensor out = a.value();
    detail::acc(out, b.value());
    auto an = a.node(), bn = b.node();
    return Var(detail::make_op(std::move(out), {
        {an, [an](const Tensor& g) { detail::acc(an->grad, g); }},
        {bn, [bn](const Tensor& g) { detail::acc(bn->grad, g); }},
    }));
}

inline Var mul(const Var& a, const Var& b) {
    if (!a.value().same_shape(b.value()))
        throw dimension_error("mul: shape mismatch " + a.value().shape_str() + " vs " + b.value().shape_str());
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
    auto an = a.node(), bn = b.node();
    return Var(detail::make_op(std::move(out), {
        {an, [an, bn](const Tensor& g) {
             for (std::size_t i = 0; i < g.size(); ++i) an->grad[i] += g[i] * bn->value[i];
         }},
        {bn, [an, bn](const Tensor& g) {
             for (std::size_t i = 0; i < g.size(); ++i) bn->grad[i] += g[i] * an->value[i];
         }},
    }));
}

inline Var scale(const Var& a, double c) {
    Tensor out = a.value();
    for (double& v : out.flat()) v *= c;
    auto an = a.node();
    return Var(detail::make_op(std::move(out), {
        {an, [an, c](const Tensor& g) {
             for (std::size_t i = 0; i < g.size(); ++i) an->grad[i] += c * g[i];
         }},
    }));
}

/// Elementwise product with a fixed tensor (dropout masks).
inline Var mul_mask(const Var& a, Tensor mask) {
    if (!a.value().same_shape(mask))
        throw dimension_error("mul_mask: shape mismatch");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
    auto an = a.node();
    auto m = std::make_shared<Tensor>(std::move(mask));
    return Var(detail::make_op(std::move(out), {
        {an, [an, m](const Tensor& g) {
             for (std::size_t i = 0; i < g.size(); ++i) an->grad[i] += g[i] * (*m)[i];
         }},
    }));
}

inline Var sigmoid(const Var& a) {
    Tensor out = a.value();
    for (double& v : out.flat()) v = 1.0 / (1.0 + std::exp(-v));
    auto an = a.node();
    auto saved = std::make_shared<Tensor>(out);
    return Var(detail::make_op(std::move(out), {
        {an, [an, saved](const Tensor& g) {
             for (std::size_t i = 0; i < g.size(); ++i) {
                 double s = (*saved)[i];
                 an->grad[i] += g[i] * s * (1.0 - s);
             }
         }},
    }));
}

inline Var tanh_fn(const Var& a) {
    Tensor out = a.value();
    for (double& v : out.flat()) v = std::tanh(v);
    auto an = a.node();
    auto saved = std::make_shared<Tensor>(out);
    return Var(detail::make_op(std::move(out), {
        {an, [an, saved](const Tensor& g) {
             for (std::size_t i = 0; i < g.size(); ++i) {
                 double t = (*saved)[i];
                 an->grad[i] += g[i] * (1.0 - t * t);
             }
         }},
    }));
}

inline Var relu(const Var& a) {
    Tensor out = a.value();
    for (double& v : out.flat()) v = v > 0.0 ? v : 0.0;
    auto an = a.node();
    return Var(detail::make_op(std::move(out), {
        {an, [an](const Tensor& g) {
             for (std::size_t i = 0; i < g.size(); ++i)
                 if (an->value[i] > 0.0) an->grad[i] += g[i];
         }},
    }));
}

// ---- structural ops ---------------------------------------------------------

/// Broadcast a bias vector across the rows of a matrix.
inline Var add_row_bias(const Var& m, const Var& b) {
    const Tensor& M = m.value();
    const Tensor& B = b.value();
    if (M.rank() != 2 || B.rank() != 1 || M.cols() != B.size())
        throw dimension_error("add_row_bias: shape mismatch");
    Tensor out = M;
    for (std::size_t r = 0; r < M.rows(); ++r)
        for (std::size_t c = 0; c < M.cols(); ++c) out.at(r, c) += B[c];
    auto mn = m.node(), bn = b.node();
    return Var(detail::make_op(std::move(out), {
        {mn, [mn](const Tensor& g) { detail::acc(mn->grad, g); }},
        {bn, [bn](const Tensor& g) {
             for (std::size_t r = 0; r < g.rows(); ++r)
                 for (std::size_t c = 0; c < g.cols(); ++c) bn->grad[c] += g.at(r, c);
         }},
    }));
}

/// Embedding lookup: rows of `table` selected by `ids`.
inline Var gather_rows(const Var& table, const std::vector<std::size_t>& ids) {
    const Tensor& T = table.value();
    if (T.rank() != 2) throw dimension_error("gather_rows: table must be a matrix");
    std::size_t d = T.cols();
    Tensor out({ids.size(), d});
    for (std::size_t r = 0; r < ids.size(); ++r) {
        if (ids[r] >= T.rows()) throw contract_error("gather_rows: id out of range");
        for (std::size_t c = 0; c < d; ++c) out.at(r, c) = T.at(ids[r], c);
    }
    auto tn = table.node();
    auto idx = std::make_shared<std::vector<std::size_t>>(ids);
    return Var(detail::make_op(std::move(out), {
        {tn, [tn, idx, d](const Tensor& g) {
             for (std::size_t r = 0; r < idx->size(); ++r)
                 for (std::size_t c = 0; c < d; ++c)
                     tn->grad.at((*idx)[r], c) += g.at(r, c);
         }},
    }));
}

/// Single row of a matrix as a vector.
inline Var row(const Var& m, std::size_t r) {
    const Tensor& M = m.value();
    if (M.rank() != 2 || r >= M.rows()) throw dimension_error("row: out of range");
    std::size_t d = M.cols();
    Tensor out({d});
    for (std::size_t c = 0; c < d; ++c) out[c] = M.at(r, c);
    auto mn = m.node();
    return Var(detail::make_op(std::move(out), {
        {mn, [mn, r, d](const Tensor& g) {
             for (std::size_t c = 0; c < d; ++c) mn->grad.at(r, c) += g[c];
         }},
    }));
}

/// Stack equal-length vectors into a [T x d] matrix.
inline Var stack_rows(const std::vector<Var>& rows_in) {
    if (rows_in.empty()) throw contract_error("stack_rows: empty");
    std::size_t d = rows_in[0].value().size();
    Tensor out({rows_in.size(), d});
    std::vector<Node::Parent> parents;
    parents.reserve(rows_in.size());
    for (std::size_t r = 0; r < rows_in.size(); ++r) {
        const Tensor& v = rows_in[r].value();
        if (v.rank() != 1 || v.size() != d) throw dimension_error("stack_rows: ragged rows");
        for (std::size_t c = 0; c < d; ++c) out.at(r, c) = v[c];
        auto n = rows_in[r].node();
        parents.push_back({n, [n, r, d](const Tensor& g) {
                               for (std::size_t c = 0; c < d; ++c) n->grad[c] += g.at(r, c);
                           }});
    }
    return Var(detail::make_op(std::move(out), std::move(parents)));
}

/// Sliding windows of `k` consecutive rows, zero-padded at the end, flattened
/// per position: [T x d] -> [T x k*d].
inline Var window_rows(const Var& m, std::size_t k) {
    const Tensor& M = m.value();
    if (M.rank() != 2) throw dimension_error("window_rows: matrix required");
    std::size_t t_len = M.rows(), d = M.cols();
    Tensor out({t_len, k * d});
    for (std::size_t t = 0; t < t_len; ++t)
        for (std::size_t j = 0; j < k; ++j) {
            if (t + j >= t_len) break;  // zero padding rows stay zero
            for (std::size_t c = 0; c < d; ++c)
                out.at(t, j * d + c) = M.at(t + j, c);
        }
    auto mn = m.node();
    return Var(detail::make_op(std::move(out), {
        {mn, [mn, t_len, d, k](const Tensor& g) {
             for (std::size_t t = 0; t < t_len; ++t)
                 for (std::size_t j = 0; j < k && t + j < t_len; ++j)
                     for (std::size_t c = 0; c < d; ++c)
                         mn->grad.at(t + j, c) += g.at(t, j * d + c);
         }},
    }));
}

/// Per-column max over rows. Gradient routes to the earliest argmax row.
inline Var max_rows(const Var& m) {
    const Tensor& M = m.value();
    if (M.rank() != 2 || M.rows() == 0) throw contract_error("max_rows: empty matrix");
    std::size_t t_len = M.rows(), f = M.cols();
    Tensor out({f});
    auto argmax = std::make_shared<std::vector<std::size_t>>(f, 0);
    for (std::size_t c = 0; c < f; ++c) {
        double best = M.at(0, c);
        std::size_t best_r = 0;
        for (std::size_t r = 1; r < t_len; ++r)
            if (M.at(r, c) > best) {
                best = M.at(r, c);
                best_r = r;
            }
        out[c] = best;
        (*argmax)[c] = best_r;
    }
    auto mn = m.node();
    return Var(detail::make_op(std::move(out), {
        {mn, [mn, argmax, f](const Tensor& g) {
             for (std::size_t c = 0; c < f; ++c)
                 mn->grad.at((*argmax)[c], c) += g[c];
         }},
    }));
}

inline Var concat(const Var& a, const Var& b) {
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    if (A.rank() != 1 || B.rank() != 1) throw dimension_error("concat: vectors required");
    Tensor out({A.size() + B.size()});
    for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i];
    for (std::size_t i = 0; i < B.size(); ++i) out[A.size() + i] = B[i];
    auto an = a.node(), bn = b.node();
    std::size_t na = A.size();
    return Var(detail::make_op(std::move(out), {
        {an, [an, na](const Tensor& g) {
             for (std::size_t i = 0; i < na; ++i) an->grad[i] += g[i];
         }},
        {bn, [bn, na](const Tensor& g) {
             for (std::size_t i = 0; i < g.size() - na; ++i) bn->grad[i] += g[na + i];
         }},
    }));
}

inline Var sum(const Var& a) {
    double s = 0.0;
    for (double v : a.value().flat()) s += v;
    auto an = a.node();
    return Var(detail::make_op(Tensor::scalar(s), {
        {an, [an](const Tensor& g) {
             for (double& v : an->grad.flat()) v += g[0];
         }},
    }));
}

inline Var mean(const Var& a) {
    return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

// ---- backward ---------------------------------------------------------------

/// Reverse-mode sweep from a scalar loss. Visits each reachable node once in
/// reverse topological order; gradients accumulate across shared consumers.
inline void backward(const Var& loss) {
    if (loss.value().size() != 1)
        throw contract_error("backward: loss must be scalar-shaped");

    // Iterative post-order DFS to get a topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].node.get();
            if (seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    loss.node()->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        for (auto& parent : n->parents)
            if (parent.node->requires_grad || !parent.node->parents.empty())
                parent.push(n->grad);
    }
}

}  // namespace emo
