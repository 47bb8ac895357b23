#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "emo/errors.hpp"
#include "emo/hash.hpp"
#include "emo/metrics.hpp"
#include "emo/model.hpp"
#include "emo/preprocess.hpp"

namespace emo {

inline constexpr std::size_t kNumEmotions = 11;

/// One dataset row, either multi-label (E-c) or single-emotion intensity (EI-reg).
struct TweetRecord {
    std::string id;
    std::string raw_text;
    TokenSequence tokens;
    std::optional<std::vector<int>> labels;  // 11-dim binary
    std::optional<double> intensity;         // [0, 1]
    std::string emotion;                     // EI-reg emotion tag
};

namespace detail {

inline std::vector<std::string> split_tsv(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, '\t')) cells.push_back(cell);
    return cells;
}

}  // namespace detail

/// E-c TSV: header, then id, tweet, 11 binary label columns in the fixed
/// emotion order.
inline std::vector<TweetRecord> load_ec(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw format_error("cannot open E-c dataset: " + path);
    std::string line;
    if (!std::getline(is, line)) throw format_error("E-c dataset is empty: " + path);
    std::vector<TweetRecord> out;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto cells = detail::split_tsv(line);
        if (cells.size() != 2 + kNumEmotions)
            throw format_error("E-c line " + std::to_string(line_no) + ": expected " +
                               std::to_string(2 + kNumEmotions) + " columns, got " +
                               std::to_string(cells.size()));
        TweetRecord rec;
        rec.id = cells[0];
        rec.raw_text = cells[1];
        std::vector<int> labels;
        for (std::size_t k = 0; k < kNumEmotions; ++k) {
            const std::string& c = cells[2 + k];
            if (c != "0" && c != "1")
                throw format_error("E-c line " + std::to_string(line_no) +
                                   ": non-binary label cell '" + c + "'");
            labels.push_back(c == "1" ? 1 : 0);
        }
        rec.labels = std::move(labels);
        out.push_back(std::move(rec));
    }
    return out;
}

/// EI-reg TSV: header, then id, tweet, affect dimension, intensity. Rows for
/// other emotions are skipped; the count comes back via `skipped`.
inline std::vector<TweetRecord> load_eireg(const std::string& path, const std::string& emotion,
                                           std::size_t* skipped = nullptr) {
    std::ifstream is(path);
    if (!is) throw format_error("cannot open EI-reg dataset: " + path);
    std::string line;
    if (!std::getline(is, line)) throw format_error("EI-reg dataset is empty: " + path);
    std::vector<TweetRecord> out;
    std::size_t line_no = 1, skip_count = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto cells = detail::split_tsv(line);
        if (cells.size() != 4)
            throw format_error("EI-reg line " + std::to_string(line_no) +
                               ": expected 4 columns, got " + std::to_string(cells.size()));
        if (cells[2] != emotion) {
            ++skip_count;
            continue;
        }
        double intensity;
        try {
            intensity = std::stod(cells[3]);
        } catch (const std::exception&) {
            throw format_error("EI-reg line " + std::to_string(line_no) +
                               ": bad intensity '" + cells[3] + "'");
        }
        if (intensity < 0.0 || intensity > 1.0 || !std::isfinite(intensity))
            throw format_error("EI-reg line " + std::to_string(line_no) +
                               ": intensity outside [0,1]");
        TweetRecord rec;
        rec.id = cells[0];
        rec.raw_text = cells[1];
        rec.emotion = emotion;
        rec.intensity = intensity;
        out.push_back(std::move(rec));
    }
    if (skipped) *skipped = skip_count;
    return out;
}

// ---- prediction files -------------------------------------------------------

inline void write_reg_predictions(const std::vector<std::string>& ids,
                                  const std::vector<double>& values, const std::string& path) {
    if (ids.size() != values.size()) throw contract_error("write_reg_predictions: length mismatch");
    std::ofstream os(path);
    if (!os) throw format_error("cannot open predictions file for writing: " + path);
    os.precision(17);
    os << "id,value\n";
    for (std::size_t i = 0; i < ids.size(); ++i) os << ids[i] << ',' << values[i] << '\n';
}

inline std::pair<std::vector<std::string>, std::vector<double>> read_reg_predictions(
    const std::string& path) {
    std::ifstream is(path);
    if (!is) throw format_error("cannot open predictions file: " + path);
    std::string line;
    if (!std::getline(is, line) || line.rfind("id,", 0) != 0)
        throw format_error("predictions file: bad header: " + path);
    std::vector<std::string> ids;
    std::vector<double> values;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::size_t comma = line.find(',');
        if (comma == std::string::npos)
            throw format_error("predictions line " + std::to_string(line_no) + ": no comma");
        ids.push_back(line.substr(0, comma));
        try {
            values.push_back(std::stod(line.substr(comma + 1)));
        } catch (const std::exception&) {
            throw format_error("predictions line " + std::to_string(line_no) + ": bad value");
        }
    }
    return {std::move(ids), std::move(values)};
}

inline void write_clf_predictions(const std::vector<std::string>& ids,
                                  const std::vector<std::vector<int>>& labels,
                                  const std::string& path) {
    if (ids.size() != labels.size()) throw contract_error("write_clf_predictions: length mismatch");
    std::ofstream os(path);
    if (!os) throw format_error("cannot open predictions file for writing: " + path);
    os << "id";
    for (const auto& l : emotion_labels()) os << ',' << l;
    os << '\n';
    for (std::size_t i = 0; i < ids.size(); ++i) {
        os << ids[i];
        for (int v : labels[i]) os << ',' << (v ? 1 : 0);
        os << '\n';
    }
}

inline std::pair<std::vector<std::string>, std::vector<std::vector<int>>> read_clf_predictions(
    const std::string& path) {
    std::ifstream is(path);
    if (!is) throw format_error("cannot open predictions file: " + path);
    std::string line;
    if (!std::getline(is, line) || line.rfind("id,", 0) != 0)
        throw format_error("predictions file: bad header: " + path);
    std::vector<std::string> ids;
    std::vector<std::vector<int>> labels;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::getline(ls, cell, ',');
        ids.push_back(cell);
        std::vector<int> row;
        while (std::getline(ls, cell, ',')) {
            if (cell != "0" && cell != "1")
                throw format_error("predictions line " + std::to_string(line_no) +
                                   ": non-binary cell '" + cell + "'");
            row.push_back(cell == "1" ? 1 : 0);
        }
        if (row.size() != kNumEmotions)
            throw format_error("predictions line " + std::to_string(line_no) +
                               ": expected " + std::to_string(kNumEmotions) + " labels");
        labels.push_back(std::move(row));
    }
    return {std::move(ids), std::move(labels)};
}

// ---- config -----------------------------------------------------------------

/// Versioned key-value text config ("EMOCFG1" header, "key value" lines).
class Config {
public:
    static Config load(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw format_error("cannot open config file: " + path);
        std::string header;
        std::getline(is, header);
        if (header != "EMOCFG1") throw format_error("config file: bad header");
        Config cfg;
        std::string line;
        while (std::getline(is, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::size_t sp = line.find(' ');
            if (sp == std::string::npos) throw format_error("config file: bad line '" + line + "'");
            cfg.values_[line.substr(0, sp)] = line.substr(sp + 1);
        }
        return cfg;
    }

    void save(const std::string& path) const {
        std::ofstream os(path);
        if (!os) throw format_error("cannot open config file for writing: " + path);
        os << "EMOCFG1\n";
        for (const auto& [k, v] : values_) os << k << ' ' << v << '\n';
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get(const std::string& key, const std::string& fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : std::stod(it->second);
    }

    std::size_t get_size(const std::string& key, std::size_t fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : static_cast<std::size_t>(std::stoull(it->second));
    }

    std::uint64_t fingerprint(std::uint64_t vocab_hash, std::uint64_t seed) const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (const auto& [k, v] : values_) {
            h = fnv1a(k, h);
            h = fnv1a("=", h);
            h = fnv1a(v, h);
            h = fnv1a(";", h);
        }
        h ^= vocab_hash;
        h = fnv1a(std::to_string(seed), h);
        return h;
    }

private:
    std::map<std::string, std::string> values_;  // sorted, so fingerprints are stable
};

// ---- evaluation reports -----------------------------------------------------

struct EvalReport {
    std::string task;  // "reg" or "clf"
    std::map<std::string, double> metrics;
    std::map<std::string, double> per_emotion;
    std::string fingerprint;
    std::vector<std::string> notes;

    std::string to_text() const {
        std::ostringstream os;
        os.precision(6);
        os << "task: " << task << "\n";
        os << "config_fingerprint: " << fingerprint << "\n";
        for (const auto& n : notes) os << "note: " << n << "\n";
        for (const auto& [k, v] : metrics) os << k << ": " << v << "\n";
        for (const auto& [k, v] : per_emotion) os << k << ": " << v << "\n";
        return os.str();
    }

    std::string to_csv() const {
        std::ostringstream os;
        os.precision(17);
        os << "metric,value\n";
        for (const auto& [k, v] : metrics) os << k << ',' << v << '\n';
        for (const auto& [k, v] : per_emotion) os << k << ',' << v << '\n';
        return os.str();
    }
};

}  // namespace emo
