#include <gtest/gtest.h>

#include <cmath>

#include "emo/layers.hpp"

using namespace emo;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.flat()) v = rng.uniform(lo, hi);
    return t;
}

void randomize(LSTMParams& p, Rng& rng) {
    for (Var* v : p.params())
        for (double& x : v->value_mut().flat()) x = rng.uniform(-1.0, 1.0);
}

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Direct gate-by-gate transcription of the LSTM cell recurrence, written
// against plain arrays with no shared code with the layer implementation.
void lstm_cell_reference(const LSTMParams& p, const std::vector<double>& x,
                         const std::vector<double>& h_prev, const std::vector<double>& c_prev,
                         std::vector<double>& h_out, std::vector<double>& c_out) {
    std::size_t u = p.units, d = p.input_dim;
    auto affine = [&](const Var& W, const Var& U, const Var& b, std::size_t r) {
        double s = b.value()[r];
        for (std::size_t k = 0; k < d; ++k) s += W.value().at(r, k) * x[k];
        for (std::size_t k = 0; k < u; ++k) s += U.value().at(r, k) * h_prev[k];
        return s;
    };
    h_out.resize(u);
    c_out.resize(u);
    for (std::size_t r = 0; r < u; ++r) {
        double f = sig(affine(p.W_f, p.U_f, p.b_f, r));
        double i = sig(affine(p.W_i, p.U_i, p.b_i, r));
        double o = sig(affine(p.W_o, p.U_o, p.b_o, r));
        double c = f * c_prev[r] + i * std::tanh(affine(p.W_c, p.U_c, p.b_c, r));
        c_out[r] = c;
        h_out[r] = o * std::tanh(c);
    }
}

}  // namespace

TEST(LstmStep, AllZeroParamsGiveZeroState) {
    LSTMParams p = LSTMParams::zeros(3, 2);
    Var x = Var::constant(Tensor({2}, {0.7, -1.3}));
    Var h0 = Var::constant(Tensor({3}));
    Var c0 = Var::constant(Tensor({3}));
    auto [h, c] = lstm_step(p, x, h0, c0);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_DOUBLE_EQ(h.value()[i], 0.0);
        EXPECT_DOUBLE_EQ(c.value()[i], 0.0);
    }
}

TEST(LstmStep, ZeroParamsCarryHalfOfCellState) {
    // gates are 0.5, so c_t = 0.5 * c_prev and h_t = 0.5 * tanh(c_t)
    LSTMParams p = LSTMParams::zeros(1, 1);
    Var x = Var::constant(Tensor({1}, {3.0}));
    Var h0 = Var::constant(Tensor({1}));
    Var c0 = Var::constant(Tensor({1}, {2.0}));
    auto [h, c] = lstm_step(p, x, h0, c0);
    EXPECT_DOUBLE_EQ(c.value()[0], 1.0);
    EXPECT_NEAR(h.value()[0], 0.5 * std::tanh(1.0), 1e-15);
    EXPECT_NEAR(h.value()[0], 0.380797, 1e-6);
}

TEST(LstmStep, MatchesIndependentTranscription) {
    Rng rng(2024);
    LSTMParams p = LSTMParams::zeros(2, 3);
    randomize(p, rng);
    std::vector<double> x = {0.3, -0.8, 1.1}, h_prev = {0.2, -0.4}, c_prev = {1.0, -0.5};
    Var xv = Var::constant(Tensor::vector_of(x));
    Var hv = Var::constant(Tensor::vector_of(h_prev));
    Var cv = Var::constant(Tensor::vector_of(c_prev));
    auto [h, c] = lstm_step(p, xv, hv, cv);
    std::vector<double> h_ref, c_ref;
    lstm_cell_reference(p, x, h_prev, c_prev, h_ref, c_ref);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_NEAR(h.value()[i], h_ref[i], 1e-12);
        EXPECT_NEAR(c.value()[i], c_ref[i], 1e-12);
    }
}

TEST(LstmStep, DimMismatchThrows) {
    LSTMParams p = LSTMParams::zeros(2, 3);
    Var x = Var::constant(Tensor({4}));
    Var h0 = Var::constant(Tensor({2}));
    EXPECT_THROW(lstm_step(p, x, h0, h0), dimension_error);
}

TEST(LstmStep, HiddenStateBoundedByOne) {
    for (int trial = 0; trial < 50; ++trial) {
        Rng rng(static_cast<std::uint64_t>(trial));
        LSTMParams p = LSTMParams::zeros(4, 3);
        randomize(p, rng);
        Var x = Var::constant(random_tensor({3}, rng, -5.0, 5.0));
        Var h0 = Var::constant(random_tensor({4}, rng, -1.0, 1.0));
        Var c0 = Var::constant(random_tensor({4}, rng, -3.0, 3.0));
        auto [h, c] = lstm_step(p, x, h0, c0);
        for (std::size_t i = 0; i < 4; ++i) EXPECT_LE(std::abs(h.value()[i]), 1.0);
    }
}

TEST(LstmSequence, SingleStepReduction) {
    Rng rng(5);
    LSTMParams p = LSTMParams::zeros(3, 2);
    randomize(p, rng);
    Tensor x = random_tensor({1, 2}, rng);
    Var xs = Var::constant(x);
    Rng drop(0);
    Tensor seq_out = lstm_sequence(p, xs, 0.0, false, drop).value();
    Var xv = Var::constant(Tensor::vector_of({x.at(0, 0), x.at(0, 1)}));
    Var zero = Var::constant(Tensor({3}));
    auto [h, c] = lstm_step(p, xv, zero, zero);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(seq_out.at(0, i), h.value()[i]);
}

TEST(LstmSequence, ZeroDropoutIdenticalTrainEval) {
    Rng rng(6);
    LSTMParams p = LSTMParams::zeros(3, 2);
    randomize(p, rng);
    Var xs = Var::constant(random_tensor({4, 2}, rng));
    Rng d1(1), d2(2);
    Tensor train_out = lstm_sequence(p, xs, 0.0, true, d1).value();
    Tensor eval_out = lstm_sequence(p, xs, 0.0, false, d2).value();
    for (std::size_t i = 0; i < train_out.size(); ++i)
        EXPECT_EQ(train_out[i], eval_out[i]);
}

TEST(LstmSequence, EqualsChainedSteps) {
    Rng rng(7);
    LSTMParams p = LSTMParams::zeros(2, 3);
    randomize(p, rng);
    Tensor x = random_tensor({3, 3}, rng);
    Rng drop(0);
    Tensor seq_out = lstm_sequence(p, Var::constant(x), 0.0, false, drop).value();
    Var h = Var::constant(Tensor({2}));
    Var c = Var::constant(Tensor({2}));
    for (std::size_t t = 0; t < 3; ++t) {
        Var xv = Var::constant(Tensor::vector_of({x.at(t, 0), x.at(t, 1), x.at(t, 2)}));
        auto [h_t, c_t] = lstm_step(p, xv, h, c);
        h = h_t;
        c = c_t;
        for (std::size_t i = 0; i < 2; ++i) EXPECT_DOUBLE_EQ(seq_out.at(t, i), h.value()[i]);
    }
}

TEST(LstmSequence, EmptySequenceThrows) {
    LSTMParams p = LSTMParams::zeros(2, 2);
    Rng drop(0);
    Var xs = Var::constant(Tensor({0, 2}));
    EXPECT_THROW(lstm_sequence(p, xs, 0.0, false, drop), contract_error);
}

TEST(Conv1dSame, SummingFilterOnRamp) {
    ConvParams p = ConvParams::zeros(1, 2, 1);
    p.weight_at(0, 0, 0) = 1.0;
    p.weight_at(0, 1, 0) = 1.0;
    Var seq = Var::constant(Tensor({3, 1}, {1, 2, 3}));
    Tensor out = conv1d_same(p, seq).value();
    EXPECT_DOUBLE_EQ(out.at(0, 0), 3.0);
    EXPECT_DOUBLE_EQ(out.at(1, 0), 5.0);
    EXPECT_DOUBLE_EQ(out.at(2, 0), 3.0);  // zero row padding at the end
}

TEST(Conv1dSame, NegativePreActivationsClampToZero) {
    ConvParams p = ConvParams::zeros(2, 2, 1);
    p.weight_at(0, 0, 0) = -1.0;
    p.weight_at(1, 0, 0) = -2.0;
    Var seq = Var::constant(Tensor({3, 1}, {1, 2, 3}));
    Tensor out = conv1d_same(p, seq).value();
    for (double v : out.flat()) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(Conv1dSame, MatchesSlidingWindowOracle) {
    Rng rng(11);
    std::size_t filters = 3, k = 2, d = 4, t_len = 5;
    ConvParams p = ConvParams::zeros(filters, k, d);
    for (double& v : p.weights.value_mut().flat()) v = rng.uniform(-1.0, 1.0);
    for (double& v : p.bias.value_mut().flat()) v = rng.uniform(-0.5, 0.5);
    Tensor seq = random_tensor({t_len, d}, rng);
    Tensor out = conv1d_same(p, Var::constant(seq)).value();
    for (std::size_t t = 0; t < t_len; ++t)
        for (std::size_t f = 0; f < filters; ++f) {
            double s = p.bias.value()[f];
            for (std::size_t j = 0; j < k; ++j) {
                if (t + j >= t_len) continue;  // zero pad
                for (std::size_t c = 0; c < d; ++c)
                    s += p.weight_at(f, j, c) * seq.at(t + j, c);
            }
            EXPECT_NEAR(out.at(t, f), std::max(0.0, s), 1e-12);
        }
}

TEST(Conv1dSame, OutputLengthEqualsInputLength) {
    Rng rng(12);
    ConvParams p = ConvParams::init(2, 2, 3, rng);
    for (std::size_t t_len = 1; t_len <= 7; ++t_len) {
        Tensor seq = random_tensor({t_len, 3}, rng);
        EXPECT_EQ(conv1d_same(p, Var::constant(seq)).value().rows(), t_len);
    }
}

TEST(MaxPool, SingleRowIsIdentity) {
    Var seq = Var::constant(Tensor({1, 3}, {1, -2, 3}));
    Tensor out = max_pool_over_time(seq).value();
    EXPECT_DOUBLE_EQ(out[0], 1.0);
    EXPECT_DOUBLE_EQ(out[1], -2.0);
    EXPECT_DOUBLE_EQ(out[2], 3.0);
}

TEST(MaxPool, PerChannelMaximum) {
    Var seq = Var::constant(Tensor({2, 2}, {1, 5, 3, 2}));
    Tensor out = max_pool_over_time(seq).value();
    EXPECT_DOUBLE_EQ(out[0], 3.0);
    EXPECT_DOUBLE_EQ(out[1], 5.0);
}

TEST(MaxPool, TieRoutesGradientToEarliestIndexOnly) {
    Var seq = Var::param(Tensor({3, 1}, {2.0, 2.0, 1.0}));
    Var loss = sum(max_pool_over_time(seq));
    backward(loss);
    EXPECT_DOUBLE_EQ(seq.grad().at(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(seq.grad().at(1, 0), 0.0);
    EXPECT_DOUBLE_EQ(seq.grad().at(2, 0), 0.0);
}

TEST(MaxPool, GradientConservation) {
    Rng rng(13);
    Var seq = Var::param(random_tensor({4, 3}, rng));
    Var loss = sum(max_pool_over_time(seq));
    backward(loss);
    double in_sum = 0.0;
    for (double g : seq.grad().flat()) in_sum += g;
    EXPECT_DOUBLE_EQ(in_sum, 3.0);  // upstream gradient was 1 per channel
}

TEST(DenseSigmoid, ZeroParamsGiveHalf) {
    Var W = Var::constant(Tensor({4, 3}));
    Var b = Var::constant(Tensor({4}));
    Var x = Var::constant(Tensor({3}, {1, -2, 3}));
    Tensor out = dense_sigmoid(W, b, x).value();
    for (double v : out.flat()) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(DenseSigmoid, MatchesDirectFormula) {
    Rng rng(14);
    Tensor W = random_tensor({2, 3}, rng);
    Tensor b = random_tensor({2}, rng);
    Tensor x = random_tensor({3}, rng);
    Tensor out = dense_sigmoid(Var::constant(W), Var::constant(b), Var::constant(x)).value();
    for (std::size_t r = 0; r < 2; ++r) {
        double s = b[r];
        for (std::size_t c = 0; c < 3; ++c) s += W.at(r, c) * x[c];
        EXPECT_NEAR(out[r], 1.0 / (1.0 + std::exp(-s)), 1e-12);
    }
}

TEST(Dropout, InvertedScalingPreservesExpectation) {
    // Monte Carlo mean of the dropped activation within 3 sigma of the
    // undropped value.
    double rate = 0.4, value = 2.0;
    std::size_t n = 20000;
    Rng rng(15);
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        Tensor mask = dropout_mask({1}, rate, rng);
        double dropped = value * mask[0];
        sum += dropped;
        sum_sq += dropped * dropped;
    }
    double mc_mean = sum / static_cast<double>(n);
    double mc_var = sum_sq / static_cast<double>(n) - mc_mean * mc_mean;
    double sigma = std::sqrt(mc_var / static_cast<double>(n));
    EXPECT_NEAR(mc_mean, value, 3.0 * sigma);
}

TEST(Dropout, RateOutOfRangeThrows) {
    Rng rng(0);
    EXPECT_THROW(dropout_mask({2}, 1.0, rng), contract_error);
    EXPECT_THROW(dropout_mask({2}, -0.1, rng), contract_error);
}

TEST(Embedding, PadRowStaysZero) {
    EmbeddingTable e = EmbeddingTable::zeros(4, 3);
    for (double& v : e.matrix.value_mut().flat()) v = 1.0;
    e.zero_pad_row();
    for (std::size_t c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(e.matrix.value().at(0, c), 0.0);
    EXPECT_DOUBLE_EQ(e.matrix.value().at(1, 0), 1.0);
}
