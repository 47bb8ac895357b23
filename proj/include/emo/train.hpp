#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "emo/model.hpp"

namespace emo {

// ---- losses -----------------------------------------------------------------

inline constexpr double kProbClamp = 1e-12;

/// Per-label binary cross-entropy averaged over labels. Predictions are
/// clamped to [1e-12, 1-1e-12] before the logs.
inline Var multilabel_xent(const Var& pred, const std::vector<double>& target) {
    const Tensor& P = pred.value();
    if (P.rank() != 1 || P.size() != target.size())
        throw contract_error("multilabel_xent: prediction/target length mismatch");
    std::size_t k = P.size();
    auto clamp = [](double p) { return std::min(1.0 - kProbClamp, std::max(kProbClamp, p)); };
    double loss = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        double p = clamp(P[i]);
        loss -= target[i] * std::log(p) + (1.0 - target[i]) * std::log(1.0 - p);
    }
    loss /= static_cast<double>(k);
    auto pn = pred.node();
    auto y = std::make_shared<std::vector<double>>(target);
    return Var(detail::make_op(Tensor::scalar(loss), {
        {pn, [pn, y, k, clamp](const Tensor& g) {
             for (std::size_t i = 0; i < k; ++i) {
                 double p = clamp(pn->value[i]);
                 pn->grad[i] += g[0] * (-(*y)[i] / p + (1.0 - (*y)[i]) / (1.0 - p)) /
                                static_cast<double>(k);
             }
         }},
    }));
}

/// Mean squared error against a fixed target vector (scalar target = length 1).
inline Var mse_loss(const Var& pred, const std::vector<double>& target) {
    const Tensor& P = pred.value();
    if (P.size() != target.size())
        throw contract_error("mse_loss: prediction/target length mismatch");
    std::size_t n = P.size();
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = P[i] - target[i];
        loss += d * d;
    }
    loss /= static_cast<double>(n);
    auto pn = pred.node();
    auto y = std::make_shared<std::vector<double>>(target);
    return Var(detail::make_op(Tensor::scalar(loss), {
        {pn, [pn, y, n](const Tensor& g) {
             for (std::size_t i = 0; i < n; ++i)
                 pn->grad[i] += g[0] * 2.0 * (pn->value[i] - (*y)[i]) / static_cast<double>(n);
         }},
    }));
}

/// Plain batch MSE over (pred, gold) pairs, no graph involved.
inline double batch_mse(const std::vector<double>& pred, const std::vector<double>& gold) {
    if (pred.size() != gold.size() || pred.empty())
        throw contract_error("batch_mse: length mismatch or empty");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        double d = pred[i] - gold[i];
        s += d * d;
    }
    return s / static_cast<double>(pred.size());
}

// ---- Adam -------------------------------------------------------------------

/// Bias-corrected Adam over a fixed parameter list. Moment slots are created
/// lazily on the first step and keyed by position.
struct AdamState {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t step_count = 0;
    std::vector<Tensor> m;  // first moments
    std::vector<Tensor> v;  // second moments

    void step(std::vector<Var*>& params) {
        if (m.empty()) {
            for (Var* p : params) {
                m.push_back(Tensor::zeros_like(p->value()));
                v.push_back(Tensor::zeros_like(p->value()));
            }
        }
        if (m.size() != params.size())
            throw contract_error("adam: parameter list changed between steps");
        ++step_count;
        double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
        double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
        for (std::size_t i = 0; i < params.size(); ++i) {
            Tensor& value = params[i]->value_mut();
            const Tensor& grad = params[i]->grad();
            if (!value.same_shape(grad) || !value.same_shape(m[i]))
                throw contract_error("adam: parameter/gradient shape mismatch");
            for (std::size_t j = 0; j < value.size(); ++j) {
                m[i][j] = beta1 * m[i][j] + (1.0 - beta1) * grad[j];
                v[i][j] = beta2 * v[i][j] + (1.0 - beta2) * grad[j] * grad[j];
                double mhat = m[i][j] / bc1;
                double vhat = v[i][j] / bc2;
                value[j] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
        }
    }
};

// ---- training loop ----------------------------------------------------------

enum class LossKind { multilabel_xent, mse };

struct TrainPlan {
    std::size_t epochs = 10;
    std::size_t batch_size = 8;
    LossKind loss = LossKind::multilabel_xent;
    std::uint64_t seed = 0;
    bool shuffle = true;

    void validate() const {
        if (epochs < 1 || batch_size < 1)
            throw contract_error("TrainPlan: epochs and batch_size must be >= 1");
    }
};

struct TrainExample {
    std::vector<std::size_t> token_ids;
    std::vector<double> target;  // 11 binary labels or a single intensity
};

/// Trains the bundle in place; returns the per-epoch mean training loss.
/// Bit-reproducible for a fixed plan seed. Frozen embeddings are untouched;
/// a trainable embedding keeps its PAD row zeroed.
inline std::vector<double> train(ModelBundle& model, const std::vector<TrainExample>& data,
                                 const TrainPlan& plan, AdamState* adam_io = nullptr) {
    plan.validate();
    if (data.empty()) throw contract_error("train: empty dataset");
    for (const auto& ex : data)
        if (ex.target.size() != model.config.output_dim)
            throw contract_error("train: target length does not match model output_dim");

    AdamState local_adam;
    AdamState& adam = adam_io ? *adam_io : local_adam;
    std::vector<Var*> params = model.trainable_params();
    Rng dropout_rng(plan.seed * 0x9e3779b97f4a7c15ULL + 1);

    std::vector<double> epoch_losses;
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < plan.epochs; ++epoch) {
        if (plan.shuffle) {
            Rng shuffle_rng(plan.seed + epoch);
            shuffle_rng.shuffle(order);
        }
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += plan.batch_size) {
            std::size_t end = std::min(order.size(), start + plan.batch_size);
            Var batch_loss;
            for (std::size_t i = start; i < end; ++i) {
                const TrainExample& ex = data[order[i]];
                ForwardResult out = model.forward(ex.token_ids, true, dropout_rng);
                Var loss = plan.loss == LossKind::multilabel_xent
                               ? multilabel_xent(out.ve, ex.target)
                               : mse_loss(out.ve, ex.target);
                batch_loss = batch_loss.defined() ? add(batch_loss, loss) : loss;
            }
            batch_loss = scale(batch_loss, 1.0 / static_cast<double>(end - start));
            for (Var* p : params) p->zero_grad();
            backward(batch_loss);
            adam.step(params);
            if (model.config.trainable_embeddings) model.embedding.zero_pad_row();
            epoch_loss += batch_loss.value().item() * static_cast<double>(end - start);
        }
        epoch_losses.push_back(epoch_loss / static_cast<double>(order.size()));
    }
    return epoch_losses;
}

inline void write_loss_log(const std::vector<double>& losses, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw format_error("cannot open loss log for writing: " + path);
    os << "epoch,loss\n";
    os.precision(17);
    for (std::size_t i = 0; i < losses.size(); ++i) os << (i + 1) << ',' << losses[i] << '\n';
}

}  // namespace emo
