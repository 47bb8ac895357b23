#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "emo/errors.hpp"

namespace emo {

/// Sample Pearson correlation coefficient.
inline double pearson(const std::vector<double>& pred, const std::vector<double>& gold) {
    if (pred.size() != gold.size() || pred.size() < 2)
        throw contract_error("pearson: need equal lengths >= 2");
    std::size_t n = pred.size();
    double mp = 0.0, mg = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mp += pred[i];
        mg += gold[i];
    }
    mp /= static_cast<double>(n);
    mg /= static_cast<double>(n);
    double cov = 0.0, vp = 0.0, vg = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double dp = pred[i] - mp, dg = gold[i] - mg;
        cov += dp * dg;
        vp += dp * dp;
        vg += dg * dg;
    }
    if (vp == 0.0 || vg == 0.0)
        throw contract_error("pearson: undefined for zero-variance input");
    return cov / std::sqrt(vp * vg);
}

struct MultilabelScores {
    double jaccard = 0.0;
    double micro_f1 = 0.0;
    double macro_f1 = 0.0;
};

/// Jaccard accuracy (both-empty counts as 1), micro F1 over pooled label
/// decisions and macro F1 averaging per-label F1 (undefined per-label F1 -> 0).
inline MultilabelScores multilabel_metrics(const std::vector<std::vector<int>>& pred,
                                           const std::vector<std::vector<int>>& gold) {
    if (pred.size() != gold.size() || pred.empty())
        throw contract_error("multilabel_metrics: example count mismatch or empty");
    std::size_t labels = gold[0].size();
    MultilabelScores out;

    double jaccard_sum = 0.0;
    std::vector<double> tp(labels, 0.0), fp(labels, 0.0), fn(labels, 0.0);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i].size() != labels || gold[i].size() != labels)
            throw contract_error("multilabel_metrics: label width mismatch");
        std::size_t inter = 0, uni = 0;
        for (std::size_t k = 0; k < labels; ++k) {
            int p = pred[i][k] ? 1 : 0, g = gold[i][k] ? 1 : 0;
            inter += static_cast<std::size_t>(p & g);
            uni += static_cast<std::size_t>(p | g);
            tp[k] += p & g;
            fp[k] += p & ~g & 1;
            fn[k] += ~p & g & 1;
        }
        jaccard_sum += uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
    }
    out.jaccard = jaccard_sum / static_cast<double>(pred.size());

    double tp_all = 0.0, fp_all = 0.0, fn_all = 0.0, macro_sum = 0.0;
    for (std::size_t k = 0; k < labels; ++k) {
        tp_all += tp[k];
        fp_all += fp[k];
        fn_all += fn[k];
        double denom = 2.0 * tp[k] + fp[k] + fn[k];
        macro_sum += denom == 0.0 ? 0.0 : 2.0 * tp[k] / denom;
    }
    double micro_denom = 2.0 * tp_all + fp_all + fn_all;
    out.micro_f1 = micro_denom == 0.0 ? 0.0 : 2.0 * tp_all / micro_denom;
    out.macro_f1 = macro_sum / static_cast<double>(labels);
    return out;
}

}  // namespace emo
