#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "emo/errors.hpp"
#include "emo/layers.hpp"
#include "emo/preprocess.hpp"

namespace emo {

// ---- ridge regression -------------------------------------------------------

namespace detail {

/// Solves the SPD system A x = b in place via Cholesky.
inline std::vector<double> cholesky_solve(std::vector<std::vector<double>> a,
                                          std::vector<double> b) {
    std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a[i][j];
            for (std::size_t k = 0; k < j; ++k) s -= a[i][k] * a[j][k];
            if (i == j) {
                if (s <= 0.0) throw contract_error("ridge: matrix not positive definite");
                a[i][i] = std::sqrt(s);
            } else {
                a[i][j] = s / a[j][j];
            }
        }
    }
    // forward then back substitution
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= a[i][k] * b[k];
        b[i] = s / a[i][i];
    }
    for (std::size_t ii = n; ii > 0; --ii) {
        std::size_t i = ii - 1;
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= a[k][i] * b[k];
        b[i] = s / a[i][i];
    }
    return b;
}

}  // namespace detail

/// L2-regularized least squares. Uses the dual formulation when the feature
/// dimension exceeds the sample count, so sparse-vocabulary BoW stays cheap.
struct RidgeRegressor {
    double lambda = 1.0;
    std::vector<double> weights;  // last entry is the intercept

    void fit(const std::vector<std::vector<double>>& X, const std::vector<double>& y) {
        if (X.size() != y.size() || X.empty()) throw contract_error("ridge: bad training data");
        std::size_t n = X.size(), d = X[0].size() + 1;  // +1 intercept

        auto aug = [&](std::size_t i, std::size_t j) -> double {
            return j + 1 == d ? 1.0 : X[i][j];
        };

        if (d <= n) {
            std::vector<std::vector<double>> a(d, std::vector<double>(d, 0.0));
            std::vector<double> b(d, 0.0);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t p = 0; p < d; ++p) {
                    double xp = aug(i, p);
                    if (xp == 0.0) continue;
                    b[p] += xp * y[i];
                    for (std::size_t q = 0; q <= p; ++q) a[p][q] += xp * aug(i, q);
                }
            for (std::size_t p = 0; p < d; ++p) {
                for (std::size_t q = p + 1; q < d; ++q) a[p][q] = a[q][p];
                a[p][p] += lambda;
            }
            weights = detail::cholesky_solve(std::move(a), std::move(b));
        } else {
            // alpha = (K + lambda I)^-1 y, w = X^T alpha
            std::vector<std::vector<double>> k(n, std::vector<double>(n, 0.0));
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j <= i; ++j) {
                    double s = 0.0;
                    for (std::size_t p = 0; p < d; ++p) s += aug(i, p) * aug(j, p);
                    k[i][j] = k[j][i] = s;
                }
            for (std::size_t i = 0; i < n; ++i) k[i][i] += lambda;
            std::vector<double> alpha = detail::cholesky_solve(std::move(k), y);
            weights.assign(d, 0.0);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t p = 0; p < d; ++p) weights[p] += alpha[i] * aug(i, p);
        }
    }

    double predict(const std::vector<double>& x) const {
        double s = weights.back();
        for (std::size_t i = 0; i < x.size(); ++i) s += weights[i] * x[i];
        return s;
    }
};

// ---- feature builders -------------------------------------------------------

/// Unigram TF-IDF featurizer fitted on the training split only.
class TfIdfFeaturizer {
public:
    void fit(const std::vector<TokenSequence>& train) {
        if (train.empty()) throw contract_error("tfidf: empty training corpus");
        std::map<std::string, std::size_t> df;
        for (const auto& seq : train) {
            std::map<std::string, int> seen;
            for (const auto& tok : seq.tokens) seen[tok] = 1;
            for (const auto& [tok, _] : seen) df[tok]++;
        }
        if (df.empty()) throw contract_error("tfidf: empty vocabulary");
        n_docs_ = train.size();
        for (const auto& [tok, count] : df) {
            index_[tok] = idf_.size();
            idf_.push_back(std::log((1.0 + static_cast<double>(n_docs_)) /
                                    (1.0 + static_cast<double>(count))) + 1.0);
        }
    }

    std::size_t dim() const { return idf_.size(); }

    std::vector<double> transform(const TokenSequence& seq) const {
        std::vector<double> v(idf_.size(), 0.0);
        for (const auto& tok : seq.tokens) {
            auto it = index_.find(tok);
            if (it != index_.end()) v[it->second] += 1.0;  // unseen tokens contribute nothing
        }
        double norm = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] *= idf_[i];
            norm += v[i] * v[i];
        }
        if (norm > 0.0) {
            norm = std::sqrt(norm);
            for (double& x : v) x /= norm;
        }
        return v;
    }

private:
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<double> idf_;
    std::size_t n_docs_ = 0;
};

/// Neural BoW: mean of the word embeddings of a tweet's tokens.
inline std::vector<double> nbow_features(const TokenSequence& seq, const EmbeddingTable& table,
                                         const Vocabulary& vocab) {
    std::vector<double> v(table.dim, 0.0);
    std::size_t count = 0;
    for (const auto& tok : seq.tokens) {
        std::size_t id = vocab.id_of(tok);
        if (id == Vocabulary::kPadId) continue;
        for (std::size_t c = 0; c < table.dim; ++c) v[c] += table.matrix.value().at(id, c);
        ++count;
    }
    if (count > 0)
        for (double& x : v) x /= static_cast<double>(count);
    return v;
}

enum class BaselineKind { bow_tfidf, nbow };

/// BoW/NBoW intensity baseline: features into a ridge learner (lambda 1.0),
/// predictions clamped to [0, 1].
struct BaselineModel {
    BaselineKind kind = BaselineKind::bow_tfidf;
    TfIdfFeaturizer tfidf;
    RidgeRegressor ridge;
    const EmbeddingTable* embeddings = nullptr;  // NBoW only
    const Vocabulary* vocab = nullptr;

    void fit(const std::vector<TokenSequence>& train, const std::vector<double>& y) {
        std::vector<std::vector<double>> X;
        X.reserve(train.size());
        if (kind == BaselineKind::bow_tfidf) {
            tfidf.fit(train);
            for (const auto& seq : train) X.push_back(tfidf.transform(seq));
        } else {
            if (!embeddings || !vocab) throw contract_error("nbow baseline needs embeddings+vocab");
            for (const auto& seq : train) X.push_back(nbow_features(seq, *embeddings, *vocab));
        }
        ridge.fit(X, y);
    }

    double predict(const TokenSequence& seq) const {
        std::vector<double> x = kind == BaselineKind::bow_tfidf
                                    ? tfidf.transform(seq)
                                    : nbow_features(seq, *embeddings, *vocab);
        return std::min(1.0, std::max(0.0, ridge.predict(x)));
    }
};

}  // namespace emo
