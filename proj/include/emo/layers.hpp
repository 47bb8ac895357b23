#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "emo/autodiff.hpp"
#include "emo/rng.hpp"

namespace emo {

/// Uniform(-s, s) with s = sqrt(6 / (fan_in + fan_out)).
inline Tensor glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
    double s = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Tensor t({rows, cols});
    for (double& v : t.flat()) v = rng.uniform(-s, s);
    return t;
}

// ---- LSTM -------------------------------------------------------------------

/// Gate parameters of a single LSTM cell:
///   f_t = sig(W_f x_t + U_f h_{t-1} + b_f)      (i_t, o_t alike)
///   c_t = f_t*c_{t-1} + i_t*tanh(W_c x_t + U_c h_{t-1} + b_c)
///   h_t = o_t*tanh(c_t)
struct LSTMParams {
    std::size_t units = 0;
    std::size_t input_dim = 0;
    Var W_f, W_i, W_o, W_c;  // [units x input_dim]
    Var U_f, U_i, U_o, U_c;  // [units x units]
    Var b_f, b_i, b_o, b_c;  // [units]

    static LSTMParams zeros(std::size_t units, std::size_t input_dim) {
        LSTMParams p;
        p.units = units;
        p.input_dim = input_dim;
        for (Var* w : {&p.W_f, &p.W_i, &p.W_o, &p.W_c})
            *w = Var::param(Tensor({units, input_dim}));
        for (Var* u : {&p.U_f, &p.U_i, &p.U_o, &p.U_c})
            *u = Var::param(Tensor({units, units}));
        for (Var* b : {&p.b_f, &p.b_i, &p.b_o, &p.b_c})
            *b = Var::param(Tensor({units}));
        return p;
    }

    static LSTMParams init(std::size_t units, std::size_t input_dim, Rng& rng) {
        LSTMParams p = zeros(units, input_dim);
        for (Var* w : {&p.W_f, &p.W_i, &p.W_o, &p.W_c})
            w->value_mut() = glorot_uniform(units, input_dim, rng);
        for (Var* u : {&p.U_f, &p.U_i, &p.U_o, &p.U_c})
            u->value_mut() = glorot_uniform(units, units, rng);
        // Forget-gate bias 1.0 keeps early cell state alive.
        for (double& v : p.b_f.value_mut().flat()) v = 1.0;
        return p;
    }

    std::vector<Var*> params() {
        return {&W_f, &W_i, &W_o, &W_c, &U_f, &U_i, &U_o, &U_c, &b_f, &b_i, &b_o, &b_c};
    }
};

inline std::pair<Var, Var> lstm_step(const LSTMParams& p, const Var& x_t,
                                     const Var& h_prev, const Var& c_prev) {
    if (x_t.value().size() != p.input_dim || h_prev.value().size() != p.units ||
        c_prev.value().size() != p.units)
        throw dimension_error("lstm_step: input dims inconsistent with parameters");
    Var f = sigmoid(add(add(matvec(p.W_f, x_t), matvec(p.U_f, h_prev)), p.b_f));
    Var i = sigmoid(add(add(matvec(p.W_i, x_t), matvec(p.U_i, h_prev)), p.b_i));
    Var o = sigmoid(add(add(matvec(p.W_o, x_t), matvec(p.U_o, h_prev)), p.b_o));
    Var c_hat = tanh_fn(add(add(matvec(p.W_c, x_t), matvec(p.U_c, h_prev)), p.b_c));
    Var c_t = add(mul(f, c_prev), mul(i, c_hat));
    Var h_t = mul(o, tanh_fn(c_t));
    return {h_t, c_t};
}

/// Inverted-dropout mask: entries are 0 with probability `rate`, else 1/(1-rate).
inline Tensor dropout_mask(const std::vector<std::size_t>& shape, double rate, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) throw contract_error("dropout rate must be in [0,1)");
    Tensor mask(shape);
    double keep_scale = 1.0 / (1.0 - rate);
    for (double& v : mask.flat()) v = rng.uniform() < rate ? 0.0 : keep_scale;
    return mask;
}

inline Var apply_dropout(const Var& x, double rate, bool training, Rng& rng) {
    if (!training || rate == 0.0) return x;
    return mul_mask(x, dropout_mask(x.value().shape(), rate, rng));
}

/// Run the cell over a [T x input_dim] sequence from zero initial state.
/// Row t of the result is h_t; dropout (when training) is applied per step
/// to the emitted h_t, not to the recurrent path.
inline Var lstm_sequence(const LSTMParams& p, const Var& xs, double dropout_rate,
                         bool training, Rng& rng) {
    const Tensor& X = xs.value();
    if (X.rank() != 2 || X.rows() == 0) throw contract_error("lstm_sequence: empty sequence");
    Var h = Var::constant(Tensor({p.units}));
    Var c = Var::constant(Tensor({p.units}));
    std::vector<Var> outputs;
    outputs.reserve(X.rows());
    for (std::size_t t = 0; t < X.rows(); ++t) {
        auto [h_t, c_t] = lstm_step(p, row(xs, t), h, c);
        h = h_t;
        c = c_t;
        outputs.push_back(apply_dropout(h_t, dropout_rate, training, rng));
    }
    return stack_rows(outputs);
}

// ---- Conv1D -----------------------------------------------------------------

/// 1-D convolution bank. Weights are stored as [kernel_size*input_dim x filters]
/// so the whole layer is a single matrix product over stacked windows;
/// weight_at(f, j, c) addresses filter f, kernel offset j, input channel c.
struct ConvParams {
    std::size_t filters = 0;
    std::size_t kernel_size = 0;
    std::size_t input_dim = 0;
    Var weights;  // [kernel_size*input_dim x filters]
    Var bias;     // [filters]

    static ConvParams zeros(std::size_t filters, std::size_t kernel_size, std::size_t input_dim) {
        if (kernel_size < 1) throw contract_error("kernel_size must be >= 1");
        ConvParams p;
        p.filters = filters;
        p.kernel_size = kernel_size;
        p.input_dim = input_dim;
        p.weights = Var::param(Tensor({kernel_size * input_dim, filters}));
        p.bias = Var::param(Tensor({filters}));
        return p;
    }

    static ConvParams init(std::size_t filters, std::size_t kernel_size, std::size_t input_dim,
                           Rng& rng) {
        ConvParams p = zeros(filters, kernel_size, input_dim);
        p.weights.value_mut() = glorot_uniform(kernel_size * input_dim, filters, rng);
        return p;
    }

    double& weight_at(std::size_t f, std::size_t j, std::size_t c) {
        return weights.value_mut().at(j * input_dim + c, f);
    }

    std::vector<Var*> params() { return {&weights, &bias}; }
};

/// "Same"-padded convolution + ReLU: the window at position t covers rows
/// [t, t+kernel-1], with zero rows appended past the end, so output length
/// equals input length and position t stays aligned with token t.
inline Var conv1d_same(const ConvParams& p, const Var& seq) {
    const Tensor& S = seq.value();
    if (S.rank() != 2 || S.cols() != p.input_dim)
        throw dimension_error("conv1d_same: input dim mismatch");
    if (S.rows() == 0) throw contract_error("conv1d_same: empty sequence");
    return relu(add_row_bias(matmul(window_rows(seq, p.kernel_size), p.weights), p.bias));
}

// ---- pooling / dense --------------------------------------------------------

/// Per-channel max over time. Gradient goes to the earliest argmax row.
inline Var max_pool_over_time(const Var& seq) { return max_rows(seq); }

inline Var dense_sigmoid(const Var& W, const Var& b, const Var& x) {
    return sigmoid(add(matvec(W, x), b));
}

// ---- Embedding --------------------------------------------------------------

/// Token-id -> dense vector table. Row 0 is the padding token and stays all-zero.
struct EmbeddingTable {
    std::size_t vocab_size = 0;
    std::size_t dim = 0;
    bool trainable = false;
    Var matrix;  // [vocab_size x dim]

    static EmbeddingTable zeros(std::size_t vocab_size, std::size_t dim, bool trainable = false) {
        EmbeddingTable e;
        e.vocab_size = vocab_size;
        e.dim = dim;
        e.trainable = trainable;
        e.matrix = trainable ? Var::param(Tensor({vocab_size, dim}))
                             : Var::constant(Tensor({vocab_size, dim}));
        return e;
    }

    void zero_pad_row() {
        for (std::size_t c = 0; c < dim; ++c) matrix.value_mut().at(0, c) = 0.0;
    }

    Var lookup(const std::vector<std::size_t>& ids) const { return gather_rows(matrix, ids); }
};

}  // namespace emo
