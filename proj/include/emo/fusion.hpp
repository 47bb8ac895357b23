#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "emo/errors.hpp"

namespace emo {

// ---- feature vectors --------------------------------------------------------

/// Per-tweet feature vectors from one source (a neural tap or an external
/// file). Row order is insertion order and is preserved through fusion.
struct FeatureSource {
    std::string name;
    std::size_t width = 0;
    std::vector<std::string> ids;
    std::unordered_map<std::string, std::vector<double>> values;

    void add(const std::string& id, std::vector<double> v) {
        if (width == 0) width = v.size();
        if (v.size() != width)
            throw format_error("feature source '" + name + "': inconsistent width for id " + id);
        for (double x : v)
            if (!std::isfinite(x))
                throw format_error("feature source '" + name + "': non-finite value for id " + id);
        if (!values.emplace(id, std::move(v)).second)
            throw format_error("feature source '" + name + "': duplicate id " + id);
        ids.push_back(id);
    }
};

/// Parses "id,f0,f1,..." CSV into a feature source.
inline FeatureSource ingest_external_features(const std::string& path, const std::string& name) {
    std::ifstream is(path);
    if (!is) throw format_error("cannot open feature CSV: " + path);
    FeatureSource src;
    src.name = name;
    std::string line;
    if (!std::getline(is, line)) throw format_error("feature CSV is empty: " + path);
    std::size_t header_cols = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
    if (header_cols < 2 || line.substr(0, 2) != "id")
        throw format_error("feature CSV header must be 'id,f0,...': " + path);
    std::size_t row_no = 1;
    while (std::getline(is, line)) {
        ++row_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        if (!std::getline(ls, cell, ',')) continue;
        std::string id = cell;
        std::vector<double> v;
        while (std::getline(ls, cell, ',')) {
            try {
                std::size_t pos = 0;
                double x = std::stod(cell, &pos);
                if (pos != cell.size()) throw std::invalid_argument(cell);
                if (!std::isfinite(x)) throw std::invalid_argument(cell);
                v.push_back(x);
            } catch (const std::exception&) {
                throw format_error("feature CSV row " + std::to_string(row_no) +
                                   ": non-numeric or non-finite cell '" + cell + "'");
            }
        }
        if (v.size() != header_cols - 1)
            throw format_error("feature CSV row " + std::to_string(row_no) + ": expected " +
                               std::to_string(header_cols - 1) + " values, got " +
                               std::to_string(v.size()));
        try {
            src.add(id, std::move(v));
        } catch (const format_error& e) {
            throw format_error(std::string(e.what()) + " (row " + std::to_string(row_no) + ")");
        }
    }
    return src;
}

inline void write_feature_csv(const FeatureSource& src, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw format_error("cannot open feature CSV for writing: " + path);
    os.precision(17);
    os << "id";
    for (std::size_t i = 0; i < src.width; ++i) os << ",f" << i;
    os << "\n";
    for (const auto& id : src.ids) {
        os << id;
        for (double v : src.values.at(id)) os << ',' << v;
        os << "\n";
    }
}

/// Fused design matrix: one row per tweet, column groups per source in the
/// configured order. The manifest records column provenance.
struct FusedMatrix {
    std::vector<std::string> ids;
    std::vector<std::vector<double>> rows;
    std::string manifest;  // "source,start,width" per line
    std::size_t width = 0;
};

inline FusedMatrix fuse(const std::vector<const FeatureSource*>& sources) {
    if (sources.empty()) throw contract_error("fuse: no sources");
    FusedMatrix out;
    out.ids = sources.front()->ids;
    std::ostringstream manifest;
    std::size_t start = 0;
    for (const FeatureSource* s : sources) {
        manifest << s->name << ',' << start << ',' << s->width << '\n';
        start += s->width;
    }
    out.width = start;
    out.manifest = manifest.str();
    out.rows.reserve(out.ids.size());
    for (const auto& id : out.ids) {
        std::vector<double> row;
        row.reserve(out.width);
        for (const FeatureSource* s : sources) {
            auto it = s->values.find(id);
            if (it == s->values.end())
                throw contract_error("fuse: id '" + id + "' missing from source '" + s->name + "'");
            row.insert(row.end(), it->second.begin(), it->second.end());
        }
        out.rows.push_back(std::move(row));
    }
    // Symmetric check: ids present in later sources but not the first.
    for (const FeatureSource* s : sources)
        if (s->values.size() != out.ids.size())
            throw contract_error("fuse: source '" + s->name + "' has extra or missing ids");
    return out;
}

// ---- gradient-boosted regression trees --------------------------------------

struct GBTParams {
    std::size_t max_depth = 2;
    double learning_rate = 0.01;
    std::size_t n_estimators = 400;
    double lambda = 1.0;
    std::size_t min_leaf = 2;

    /// Fusion presets: C1 (anger/joy/sadness), C2 (fear).
    static GBTParams c1() { return {2, 0.01, 400, 1.0, 2}; }
    static GBTParams c2() { return {5, 0.01, 300, 1.0, 2}; }
};

struct TreeNode {
    int feature = -1;  // -1: leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double weight = 0.0;
};

struct RegressionTree {
    std::vector<TreeNode> nodes;

    double predict(const std::vector<double>& x) const {
        int i = 0;
        while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
            const TreeNode& n = nodes[static_cast<std::size_t>(i)];
            i = x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right;
        }
        return nodes[static_cast<std::size_t>(i)].weight;
    }

    std::size_t depth_from(std::size_t i = 0) const {
        const TreeNode& n = nodes[i];
        if (n.feature < 0) return 0;
        return 1 + std::max(depth_from(static_cast<std::size_t>(n.left)),
                            depth_from(static_cast<std::size_t>(n.right)));
    }

    bool is_stump_leaf() const { return nodes.size() == 1; }
};

struct GBTModel {
    GBTParams params;
    double base_score = 0.0;
    std::size_t n_features = 0;
    std::vector<RegressionTree> trees;
    std::vector<std::string> warnings;

    /// base + lr * sum of tree outputs, clamped to the intensity domain.
    double predict(const std::vector<double>& x) const {
        if (x.size() != n_features)
            throw contract_error("gbt_predict: feature width mismatch (expected " +
                                 std::to_string(n_features) + ", got " + std::to_string(x.size()) + ")");
        double y = raw_predict(x);
        return std::min(1.0, std::max(0.0, y));
    }

    double raw_predict(const std::vector<double>& x) const {
        double y = base_score;
        for (const auto& t : trees) y += params.learning_rate * t.predict(x);
        return y;
    }
};

namespace detail {

struct SplitChoice {
    bool found = false;
    std::size_t feature = 0;
    double threshold = 0.0;
    double gain = 0.0;
};

inline double leaf_gain(double g_sum, double n, double lambda) {
    return g_sum * g_sum / (n + lambda);
}

/// Exact greedy squared-error split search over midpoints of sorted unique
/// values. Ties break to the lower feature index, then lower threshold.
inline SplitChoice best_split(const std::vector<std::vector<double>>& X,
                              const std::vector<double>& residual,
                              const std::vector<std::size_t>& items, const GBTParams& p) {
    SplitChoice best;
    std::size_t n = items.size();
    double g_total = 0.0;
    for (std::size_t i : items) g_total += residual[i];
    double parent = leaf_gain(g_total, static_cast<double>(n), p.lambda);

    std::vector<std::pair<double, double>> col(n);  // (feature value, residual)
    for (std::size_t f = 0; f < X[items[0]].size(); ++f) {
        for (std::size_t k = 0; k < n; ++k)
            col[k] = {X[items[k]][f], residual[items[k]]};
        std::sort(col.begin(), col.end());
        double g_left = 0.0;
        for (std::size_t k = 0; k + 1 < n; ++k) {
            g_left += col[k].second;
            if (col[k].first == col[k + 1].first) continue;
            std::size_t n_left = k + 1, n_right = n - n_left;
            if (n_left < p.min_leaf || n_right < p.min_leaf) continue;
            double gain = leaf_gain(g_left, static_cast<double>(n_left), p.lambda) +
                          leaf_gain(g_total - g_left, static_cast<double>(n_right), p.lambda) -
                          parent;
            if (gain > best.gain && gain > 0.0) {
                best.found = true;
                best.feature = f;
                best.threshold = 0.5 * (col[k].first + col[k + 1].first);
                best.gain = gain;
            }
        }
    }
    return best;
}

inline int grow(RegressionTree& tree, const std::vector<std::vector<double>>& X,
                const std::vector<double>& residual, std::vector<std::size_t> items,
                std::size_t depth, const GBTParams& p) {
    double g_sum = 0.0;
    for (std::size_t i : items) g_sum += residual[i];
    int idx = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();

    SplitChoice split;
    if (depth < p.max_depth && items.size() >= 2 * p.min_leaf)
        split = best_split(X, residual, items, p);

    if (!split.found) {
        tree.nodes[static_cast<std::size_t>(idx)].weight =
            g_sum / (static_cast<double>(items.size()) + p.lambda);
        return idx;
    }

    std::vector<std::size_t> left, right;
    for (std::size_t i : items)
        (X[i][split.feature] < split.threshold ? left : right).push_back(i);
    tree.nodes[static_cast<std::size_t>(idx)].feature = static_cast<int>(split.feature);
    tree.nodes[static_cast<std::size_t>(idx)].threshold = split.threshold;
    int l = grow(tree, X, residual, std::move(left), depth + 1, p);
    int r = grow(tree, X, residual, std::move(right), depth + 1, p);
    tree.nodes[static_cast<std::size_t>(idx)].left = l;
    tree.nodes[static_cast<std::size_t>(idx)].right = r;
    return idx;
}

}  // namespace detail

/// Boosted squared-error ensemble: each round fits a depth-limited tree to the
/// current residuals; leaf weight is sum(residual)/(count+lambda); predictions
/// accumulate learning_rate * tree(x) from base score = mean(y).
inline GBTModel gbt_train(const std::vector<std::vector<double>>& X, const std::vector<double>& y,
                          const GBTParams& params) {
    if (X.size() != y.size() || X.size() < 2)
        throw contract_error("gbt_train: need matching X/y with n >= 2");
    GBTModel model;
    model.params = params;
    model.n_features = X[0].size();
    for (const auto& row : X)
        if (row.size() != model.n_features)
            throw contract_error("gbt_train: ragged feature matrix");

    double mean_y = 0.0;
    for (double v : y) mean_y += v;
    model.base_score = mean_y / static_cast<double>(y.size());

    std::vector<double> pred(y.size(), model.base_score);
    std::vector<double> residual(y.size());
    std::vector<std::size_t> all(y.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

    bool any_split = false;
    for (std::size_t round = 0; round < params.n_estimators; ++round) {
        for (std::size_t i = 0; i < y.size(); ++i) residual[i] = y[i] - pred[i];
        RegressionTree tree;
        detail::grow(tree, X, residual, all, 0, params);
        if (!tree.is_stump_leaf()) any_split = true;
        for (std::size_t i = 0; i < y.size(); ++i)
            pred[i] += params.learning_rate * tree.predict(X[i]);
        model.trees.push_back(std::move(tree));
    }
    double var_y = 0.0;
    for (double v : y) var_y += (v - model.base_score) * (v - model.base_score);
    if (!any_split && var_y > 0.0)
        model.warnings.push_back("no usable split found; model predicts the base score");
    return model;
}

// ---- text persistence -------------------------------------------------------

inline void save_gbt(const GBTModel& m, std::ostream& os) {
    os.precision(17);
    os << "EMOGBT1\n";
    os << "base " << m.base_score << "\n";
    os << "learning_rate " << m.params.learning_rate << "\n";
    os << "lambda " << m.params.lambda << "\n";
    os << "max_depth " << m.params.max_depth << "\n";
    os << "n_features " << m.n_features << "\n";
    os << "n_trees " << m.trees.size() << "\n";
    for (std::size_t t = 0; t < m.trees.size(); ++t) {
        const auto& tree = m.trees[t];
        os << "tree " << t << ' ' << tree.nodes.size() << "\n";
        for (const auto& n : tree.nodes) {
            if (n.feature < 0)
                os << "leaf " << n.weight << "\n";
            else
                os << "split " << n.feature << ' ' << n.threshold << ' ' << n.left << ' '
                   << n.right << "\n";
        }
    }
}

inline GBTModel load_gbt(std::istream& is) {
    std::string tag;
    is >> tag;
    if (tag != "EMOGBT1") throw format_error("gbt model: bad header");
    GBTModel m;
    std::size_t n_trees = 0;
    auto expect = [&](const char* key) {
        is >> tag;
        if (tag != key) throw format_error(std::string("gbt model: expected '") + key + "'");
    };
    expect("base");
    is >> m.base_score;
    expect("learning_rate");
    is >> m.params.learning_rate;
    expect("lambda");
    is >> m.params.lambda;
    expect("max_depth");
    is >> m.params.max_depth;
    expect("n_features");
    is >> m.n_features;
    expect("n_trees");
    is >> n_trees;
    m.params.n_estimators = n_trees;
    for (std::size_t t = 0; t < n_trees; ++t) {
        expect("tree");
        std::size_t idx = 0, n_nodes = 0;
        is >> idx >> n_nodes;
        RegressionTree tree;
        for (std::size_t k = 0; k < n_nodes; ++k) {
            is >> tag;
            TreeNode node;
            if (tag == "leaf") {
                is >> node.weight;
            } else if (tag == "split") {
                is >> node.feature >> node.threshold >> node.left >> node.right;
            } else {
                throw format_error("gbt model: unexpected node tag '" + tag + "'");
            }
            tree.nodes.push_back(node);
        }
        if (!is) throw format_error("gbt model: truncated");
        m.trees.push_back(std::move(tree));
    }
    return m;
}

inline void save_gbt_file(const GBTModel& m, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw format_error("cannot open gbt model file for writing: " + path);
    save_gbt(m, os);
}

inline GBTModel load_gbt_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw format_error("cannot open gbt model file: " + path);
    return load_gbt(is);
}

}  // namespace emo
