#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "emo/model.hpp"
#include "emo/rng.hpp"

namespace emo {

/// Word-importance result for one tweet: raw Shapley values S and their
/// per-tweet max-abs normalization I (I_i = S_i / max|S|, all-zero S -> all-zero I).
struct Attribution {
    std::string id;
    std::vector<std::string> tokens;
    std::vector<double> shapley;     // S
    std::vector<double> importance;  // I, in [-1, 1]
    double predicted = 0.0;
    double baseline = 0.0;
    double gold = std::nan("");  // optional
};

inline constexpr std::size_t kExactShapleyLimit = 12;

namespace detail {

/// Coalition value: prediction with tokens outside the mask replaced by PAD.
class CoalitionValue {
public:
    CoalitionValue(const ModelBundle& model, const std::vector<std::size_t>& tokens)
        : model_(model), tokens_(tokens) {}

    double operator()(std::uint64_t mask) {
        auto it = cache_.find(mask);
        if (it != cache_.end()) return it->second;
        std::vector<std::size_t> masked(tokens_.size(), 0);
        for (std::size_t i = 0; i < tokens_.size(); ++i)
            if (mask & (1ULL << i)) masked[i] = tokens_[i];
        double v = model_.predict_keep_pads(masked)[0];
        cache_.emplace(mask, v);
        return v;
    }

private:
    const ModelBundle& model_;
    const std::vector<std::size_t>& tokens_;
    std::unordered_map<std::uint64_t, double> cache_;
};

}  // namespace detail

/// Exact Shapley values by full coalition enumeration (n <= 12).
inline std::vector<double> shapley_exact(const ModelBundle& model,
                                         const std::vector<std::size_t>& tokens) {
    std::size_t n = tokens.size();
    if (n == 0 || n > kMaxSeqLen) throw contract_error("shapley: token count out of range");
    if (n > kExactShapleyLimit)
        throw contract_error("shapley: exact mode limited to " +
                             std::to_string(kExactShapleyLimit) +
                             " tokens; use sampled mode");
    detail::CoalitionValue value(model, tokens);

    // w(|C|) = |C|! (n-1-|C|)! / n!
    std::vector<double> weight(n);
    double n_fact = 1.0;
    for (std::size_t k = 2; k <= n; ++k) n_fact *= static_cast<double>(k);
    for (std::size_t c = 0; c < n; ++c) {
        double cf = 1.0, rf = 1.0;
        for (std::size_t k = 2; k <= c; ++k) cf *= static_cast<double>(k);
        for (std::size_t k = 2; k <= n - 1 - c; ++k) rf *= static_cast<double>(k);
        weight[c] = cf * rf / n_fact;
    }

    std::vector<double> s(n, 0.0);
    std::uint64_t full = (n == 64) ? ~0ULL : ((1ULL << n) - 1);
    for (std::uint64_t mask = 0; mask <= full; ++mask) {
        std::size_t size = static_cast<std::size_t>(__builtin_popcountll(mask));
        for (std::size_t i = 0; i < n; ++i) {
            if (mask & (1ULL << i)) continue;
            s[i] += weight[size] * (value(mask | (1ULL << i)) - value(mask));
        }
    }
    return s;
}

/// Sampled Shapley: average marginal contribution over k seeded permutations.
/// Coalition evaluations are memoized, so repeated prefixes cost nothing.
inline std::vector<double> shapley_sampled(const ModelBundle& model,
                                           const std::vector<std::size_t>& tokens,
                                           std::size_t permutations, std::uint64_t seed) {
    std::size_t n = tokens.size();
    if (n == 0 || n > kMaxSeqLen) throw contract_error("shapley: token count out of range");
    if (permutations == 0) throw contract_error("shapley: permutation count must be >= 1");
    detail::CoalitionValue value(model, tokens);
    Rng rng(seed);

    std::vector<double> s(n, 0.0);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t p = 0; p < permutations; ++p) {
        rng.shuffle(perm);
        std::uint64_t mask = 0;
        double prev = value(0);
        for (std::size_t i : perm) {
            mask |= 1ULL << i;
            double next = value(mask);
            s[i] += next - prev;
            prev = next;
        }
    }
    for (double& v : s) v /= static_cast<double>(permutations);
    return s;
}

/// I_i = S_i / max|S|; all-zero S maps to all-zero I.
inline std::vector<double> normalize_importance(const std::vector<double>& s) {
    double max_abs = 0.0;
    for (double v : s) max_abs = std::max(max_abs, std::abs(v));
    std::vector<double> out(s.size(), 0.0);
    if (max_abs == 0.0) return out;
    for (std::size_t i = 0; i < s.size(); ++i) out[i] = s[i] / max_abs;
    return out;
}

/// Full attribution for one tweet. Exact enumeration for short inputs,
/// permutation sampling otherwise.
inline Attribution attribute(const ModelBundle& model, const std::string& id,
                             const std::vector<std::string>& tokens,
                             const std::vector<std::size_t>& token_ids, bool exact,
                             std::size_t permutations = 2000, std::uint64_t seed = 0) {
    Attribution a;
    a.id = id;
    a.tokens = tokens;
    a.shapley = exact ? shapley_exact(model, token_ids)
                      : shapley_sampled(model, token_ids, permutations, seed);
    a.importance = normalize_importance(a.shapley);
    a.predicted = model.predict_keep_pads(token_ids)[0];
    a.baseline = model.predict_keep_pads(std::vector<std::size_t>(token_ids.size(), 0))[0];
    return a;
}

// ---- rendering --------------------------------------------------------------

inline std::string html_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

/// One table row per tweet: tokens on blue (positive impact) or red (negative)
/// backgrounds, opacity proportional to |I|, plus gold/predicted intensity
/// columns.
inline std::string render_heatmap(const std::vector<Attribution>& attributions) {
    if (attributions.empty()) throw contract_error("render_heatmap: empty attribution list");
    std::ostringstream os;
    os.precision(6);
    os << "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\"/>\n"
       << "<title>Word importance heatmap</title>\n"
       << "<style>\n"
       << "body { font-family: sans-serif; }\n"
       << "table { border-collapse: collapse; }\n"
       << "td, th { border: 1px solid #ccc; padding: 6px 10px; }\n"
       << ".tok { padding: 2px 4px; border-radius: 3px; margin-right: 2px; display: inline-block; }\n"
       << "</style>\n</head>\n<body>\n"
       << "<table>\n<tr><th>id</th><th>tweet</th><th>gold</th><th>predicted</th></tr>\n";
    for (const auto& a : attributions) {
        os << "<tr><td>" << html_escape(a.id) << "</td><td>";
        for (std::size_t i = 0; i < a.tokens.size(); ++i) {
            double imp = i < a.importance.size() ? a.importance[i] : 0.0;
            os << "<span class=\"tok\"";
            if (imp > 0.0)
                os << " style=\"background-color: rgba(49,130,189," << imp << ")\"";
            else if (imp < 0.0)
                os << " style=\"background-color: rgba(222,45,38," << -imp << ")\"";
            os << ">" << html_escape(a.tokens[i]) << "</span>";
        }
        os << "</td><td>";
        if (std::isnan(a.gold))
            os << "-";
        else
            os << a.gold;
        os << "</td><td>" << a.predicted << "</td></tr>\n";
    }
    os << "</table>\n</body>\n</html>\n";
    return os.str();
}

inline void write_attribution_csv(const std::vector<Attribution>& attributions,
                                  const std::string& path) {
    std::ofstream os(path);
    if (!os) throw format_error("cannot open attribution CSV for writing: " + path);
    os.precision(17);
    os << "id,token,S,I\n";
    for (const auto& a : attributions)
        for (std::size_t i = 0; i < a.tokens.size(); ++i) {
            std::string tok = a.tokens[i];
            bool quote = tok.find(',') != std::string::npos || tok.find('"') != std::string::npos;
            if (quote) {
                std::string q = "\"";
                for (char c : tok) {
                    if (c == '"') q += '"';
                    q += c;
                }
                q += '"';
                tok = q;
            }
            os << a.id << ',' << tok << ',' << a.shapley[i] << ',' << a.importance[i] << '\n';
        }
}

}  // namespace emo
