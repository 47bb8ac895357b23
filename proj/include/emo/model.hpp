#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "emo/layers.hpp"

namespace emo {

inline constexpr std::size_t kMaxSeqLen = 64;

/// E-c label order fixed for the 11 output neurons of the classifier.
inline const std::array<std::string, 11>& emotion_labels() {
    static const std::array<std::string, 11> labels = {
        "anger",     "anticipation", "disgust", "fear",    "joy",  "love",
        "optimism",  "pessimism",    "sadness", "surprise", "trust"};
    return labels;
}

struct ModelConfig {
    std::size_t lstm_units = 0;
    double lstm_dropout = 0.0;
    std::size_t conv_filters = 0;
    std::size_t kernel_size = 2;
    double post_pool_dropout = 0.0;
    std::size_t output_dim = 0;
    std::size_t embedding_dim = 0;
    bool trainable_embeddings = false;

    /// Classifier preset: 128 units/filters, dropout 0.5, 11 outputs.
    static ModelConfig eccu(std::size_t embedding_dim) {
        return {128, 0.5, 128, 2, 0.5, 11, embedding_dim, false};
    }

    /// Intensity-regressor preset: 64 units/filters, dropout 0.8, 1 output.
    static ModelConfig eipu(std::size_t embedding_dim) {
        return {64, 0.8, 64, 2, 0.8, 1, embedding_dim, false};
    }

    void validate() const {
        if (!lstm_units || !conv_filters || !kernel_size || !output_dim || !embedding_dim)
            throw contract_error("ModelConfig: all counts must be positive");
    }
};

struct ForwardResult {
    Var v0;  // max-pool tap, [conv_filters]
    Var ve;  // sigmoid output, [output_dim]
};

/// A complete network: embedding -> LSTM -> Conv1D -> max-pool -> dense sigmoid.
struct ModelBundle {
    ModelConfig config;
    EmbeddingTable embedding;
    LSTMParams lstm;
    ConvParams conv;
    Var dense_W;  // [output_dim x conv_filters]
    Var dense_b;  // [output_dim]
    std::uint64_t vocab_hash = 0;

    static ModelBundle create(const ModelConfig& cfg, std::size_t vocab_size, Rng& rng,
                              std::uint64_t vocab_hash = 0) {
        cfg.validate();
        ModelBundle m;
        m.config = cfg;
        m.embedding = EmbeddingTable::zeros(vocab_size, cfg.embedding_dim, cfg.trainable_embeddings);
        m.lstm = LSTMParams::init(cfg.lstm_units, cfg.embedding_dim, rng);
        // Conv consumes LSTM outputs, so its input dim is lstm_units.
        m.conv = ConvParams::init(cfg.conv_filters, cfg.kernel_size, cfg.lstm_units, rng);
        m.dense_W = Var::param(glorot_uniform(cfg.output_dim, cfg.conv_filters, rng));
        m.dense_b = Var::param(Tensor({cfg.output_dim}));
        m.vocab_hash = vocab_hash;
        return m;
    }

    /// All-zero parameters (tests); embeddings frozen.
    static ModelBundle zeros(const ModelConfig& cfg, std::size_t vocab_size) {
        cfg.validate();
        ModelBundle m;
        m.config = cfg;
        m.embedding = EmbeddingTable::zeros(vocab_size, cfg.embedding_dim, cfg.trainable_embeddings);
        m.lstm = LSTMParams::zeros(cfg.lstm_units, cfg.embedding_dim);
        m.conv = ConvParams::zeros(cfg.conv_filters, cfg.kernel_size, cfg.lstm_units);
        m.dense_W = Var::param(Tensor({cfg.output_dim, cfg.conv_filters}));
        m.dense_b = Var::param(Tensor({cfg.output_dim}));
        return m;
    }

    std::vector<Var*> trainable_params() {
        std::vector<Var*> out;
        if (config.trainable_embeddings) out.push_back(&embedding.matrix);
        for (Var* p : lstm.params()) out.push_back(p);
        for (Var* p : conv.params()) out.push_back(p);
        out.push_back(&dense_W);
        out.push_back(&dense_b);
        return out;
    }

    /// Drop leading/trailing PAD ids, truncate to kMaxSeqLen, validate range.
    std::vector<std::size_t> prepare_ids(const std::vector<std::size_t>& tokens) const {
        std::vector<std::size_t> ids;
        for (std::size_t id : tokens) {
            if (id >= embedding.vocab_size)
                throw contract_error("forward: token id " + std::to_string(id) + " out of vocab");
            if (id != 0) ids.push_back(id);
        }
        if (ids.empty()) throw contract_error("forward: empty token sequence");
        if (ids.size() > kMaxSeqLen) ids.resize(kMaxSeqLen);
        return ids;
    }

    ForwardResult forward(const std::vector<std::size_t>& tokens, bool training, Rng& rng) const {
        std::vector<std::size_t> ids = prepare_ids(tokens);
        Var embedded = embedding.lookup(ids);
        Var hidden = lstm_sequence(lstm, embedded, config.lstm_dropout, training, rng);
        Var conv_out = conv1d_same(conv, hidden);
        Var v0 = max_pool_over_time(conv_out);
        Var pooled = apply_dropout(v0, config.post_pool_dropout, training, rng);
        Var ve = dense_sigmoid(dense_W, dense_b, pooled);
        return {v0, ve};
    }

    /// Inference forward that keeps PAD ids in place (masked-token evaluation:
    /// PAD rows embed to zero, so a masked position contributes "no input"
    /// while the sequence geometry stays fixed). Returns ve.
    Tensor predict_keep_pads(const std::vector<std::size_t>& tokens) const {
        if (tokens.empty()) throw contract_error("predict_keep_pads: empty sequence");
        for (std::size_t id : tokens)
            if (id >= embedding.vocab_size)
                throw contract_error("predict_keep_pads: token id out of vocab");
        Rng rng(0);
        Var embedded = embedding.lookup(tokens);
        Var hidden = lstm_sequence(lstm, embedded, 0.0, false, rng);
        Var conv_out = conv1d_same(conv, hidden);
        Var v0 = max_pool_over_time(conv_out);
        Var ve = dense_sigmoid(dense_W, dense_b, v0);
        return ve.value();
    }

    /// Inference-only forward; returns (v0, ve) values.
    std::pair<Tensor, Tensor> predict(const std::vector<std::size_t>& tokens) const {
        Rng rng(0);  // unused: no dropout at inference
        ForwardResult r = forward(tokens, false, rng);
        return {r.v0.value(), r.ve.value()};
    }

    /// Transfer-feature tap: [v0 || ve].
    std::vector<double> extract_features(const std::vector<std::size_t>& tokens) const {
        auto [v0, ve] = predict(tokens);
        std::vector<double> out;
        out.reserve(v0.size() + ve.size());
        out.insert(out.end(), v0.flat().begin(), v0.flat().end());
        out.insert(out.end(), ve.flat().begin(), ve.flat().end());
        return out;
    }

    std::size_t feature_dim() const { return config.conv_filters + config.output_dim; }
};

// ---- binary container -------------------------------------------------------
// Layout: magic "EMOB", u32 version, config, label order, vocab hash, then
// parameter blobs in declared order. Round-trips bit-exactly.

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
    write_u32(os, static_cast<std::uint32_t>(v));
    write_u32(os, static_cast<std::uint32_t>(v >> 32));
}

inline std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw format_error("model file: truncated");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint64_t read_u64(std::istream& is) {
    std::uint64_t lo = read_u32(is);
    std::uint64_t hi = read_u32(is);
    return lo | (hi << 32);
}

inline void write_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    write_u64(os, bits);
}

inline double read_f64(std::istream& is) {
    std::uint64_t bits = read_u64(is);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

inline void write_string(std::ostream& os, const std::string& s) {
    write_u32(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is) {
    std::uint32_t n = read_u32(is);
    std::string s(n, '\0');
    is.read(s.data(), n);
    if (!is) throw format_error("model file: truncated string");
    return s;
}

inline void write_tensor(std::ostream& os, const Tensor& t) {
    write_u32(os, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) write_u64(os, d);
    for (double v : t.flat()) write_f64(os, v);
}

inline Tensor read_tensor(std::istream& is) {
    std::uint32_t rank = read_u32(is);
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(read_u64(is));
    Tensor t(shape);
    for (double& v : t.flat()) v = read_f64(is);
    return t;
}

}  // namespace detail

inline constexpr char kModelMagic[4] = {'E', 'M', 'O', 'B'};
inline constexpr std::uint32_t kModelVersion = 1;

inline void save_model(const ModelBundle& m, std::ostream& os) {
    os.write(kModelMagic, 4);
    detail::write_u32(os, kModelVersion);
    detail::write_u64(os, m.config.lstm_units);
    detail::write_f64(os, m.config.lstm_dropout);
    detail::write_u64(os, m.config.conv_filters);
    detail::write_u64(os, m.config.kernel_size);
    detail::write_f64(os, m.config.post_pool_dropout);
    detail::write_u64(os, m.config.output_dim);
    detail::write_u64(os, m.config.embedding_dim);
    detail::write_u32(os, m.config.trainable_embeddings ? 1 : 0);
    std::string labels;
    for (const auto& l : emotion_labels()) labels += (labels.empty() ? "" : ",") + l;
    detail::write_string(os, labels);
    detail::write_u64(os, m.vocab_hash);
    detail::write_tensor(os, m.embedding.matrix.value());
    const LSTMParams& p = m.lstm;
    for (const Var* v : {&p.W_f, &p.W_i, &p.W_o, &p.W_c, &p.U_f, &p.U_i, &p.U_o, &p.U_c,
                         &p.b_f, &p.b_i, &p.b_o, &p.b_c})
        detail::write_tensor(os, v->value());
    detail::write_tensor(os, m.conv.weights.value());
    detail::write_tensor(os, m.conv.bias.value());
    detail::write_tensor(os, m.dense_W.value());
    detail::write_tensor(os, m.dense_b.value());
}

inline ModelBundle load_model(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kModelMagic, 4) != 0)
        throw format_error("model file: bad magic");
    std::uint32_t version = detail::read_u32(is);
    if (version != kModelVersion)
        throw format_error("model file: unsupported version " + std::to_string(version));
    ModelConfig cfg;
    cfg.lstm_units = static_cast<std::size_t>(detail::read_u64(is));
    cfg.lstm_dropout = detail::read_f64(is);
    cfg.conv_filters = static_cast<std::size_t>(detail::read_u64(is));
    cfg.kernel_size = static_cast<std::size_t>(detail::read_u64(is));
    cfg.post_pool_dropout = detail::read_f64(is);
    cfg.output_dim = static_cast<std::size_t>(detail::read_u64(is));
    cfg.embedding_dim = static_cast<std::size_t>(detail::read_u64(is));
    cfg.trainable_embeddings = detail::read_u32(is) != 0;
    (void)detail::read_string(is);  // label order, informational
    std::uint64_t vocab_hash = detail::read_u64(is);

    Tensor emb = detail::read_tensor(is);
    ModelBundle m = ModelBundle::zeros(cfg, emb.rows());
    m.vocab_hash = vocab_hash;
    m.embedding.matrix.value_mut() = std::move(emb);
    LSTMParams& p = m.lstm;
    for (Var* v : {&p.W_f, &p.W_i, &p.W_o, &p.W_c, &p.U_f, &p.U_i, &p.U_o, &p.U_c,
                   &p.b_f, &p.b_i, &p.b_o, &p.b_c})
        v->value_mut() = detail::read_tensor(is);
    m.conv.weights.value_mut() = detail::read_tensor(is);
    m.conv.bias.value_mut() = detail::read_tensor(is);
    m.dense_W.value_mut() = detail::read_tensor(is);
    m.dense_b.value_mut() = detail::read_tensor(is);
    return m;
}

inline void save_model_file(const ModelBundle& m, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw format_error("cannot open model file for writing: " + path);
    save_model(m, os);
}

inline ModelBundle load_model_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw format_error("cannot open model file: " + path);
    return load_model(is);
}

}  // namespace emo
