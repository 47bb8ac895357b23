#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "emo/errors.hpp"
#include "emo/hash.hpp"
#include "emo/layers.hpp"
#include "emo/rng.hpp"

namespace emo {

inline const std::string kPadToken = "<pad>";
inline const std::string kUnkToken = "<unk>";
inline const std::string kUrlTag = "<url>";
inline const std::string kUserTag = "<user>";
inline const std::string kNumberTag = "<number>";
inline const std::string kHashtagTag = "<hashtag>";

// ---- frequency lexicon ------------------------------------------------------

/// Unigram frequency list for hashtag segmentation ("word count" per line).
class Lexicon {
public:
    void add(const std::string& word, double count) {
        counts_[word] += count;
        total_ += count;
    }

    bool contains(const std::string& word) const { return counts_.count(word) != 0; }

    /// log P(word) under the unigram model; -inf when absent.
    double log_prob(const std::string& word) const {
        auto it = counts_.find(word);
        if (it == counts_.end() || total_ <= 0.0)
            return -std::numeric_limits<double>::infinity();
        return std::log(it->second / total_);
    }

    bool empty() const { return counts_.empty(); }

    static Lexicon load(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw format_error("cannot open lexicon file: " + path);
        Lexicon lex;
        std::string word;
        double count;
        while (is >> word >> count) lex.add(word, count);
        return lex;
    }

private:
    std::unordered_map<std::string, double> counts_;
    double total_ = 0.0;
};

// ---- hashtag segmentation ---------------------------------------------------

/// Maximum-probability split of a hashtag body under the unigram model.
/// Bodies with no full in-lexicon segmentation come back verbatim. Ties prefer
/// fewer words.
inline std::vector<std::string> segment_hashtag(const std::string& body, const Lexicon& lexicon) {
    if (body.empty()) return {};
    const double neg_inf = -std::numeric_limits<double>::infinity();
    std::size_t n = body.size();
    // best[i]: best (score, word count) covering body[0..i)
    std::vector<double> best(n + 1, neg_inf);
    std::vector<std::size_t> words(n + 1, 0);
    std::vector<std::size_t> prev(n + 1, 0);
    best[0] = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            if (best[j] == neg_inf) continue;
            double lp = lexicon.log_prob(body.substr(j, i - j));
            if (lp == neg_inf) continue;
            double score = best[j] + lp;
            bool better = score > best[i] ||
                          (score == best[i] && words[j] + 1 < words[i]);
            if (better) {
                best[i] = score;
                words[i] = words[j] + 1;
                prev[i] = j;
            }
        }
    }
    if (best[n] == neg_inf) return {body};
    std::vector<std::string> out;
    for (std::size_t i = n; i > 0; i = prev[i])
        out.push_back(body.substr(prev[i], i - prev[i]));
    std::reverse(out.begin(), out.end());
    return out;
}

// ---- tokenizer --------------------------------------------------------------

namespace detail {

inline bool is_ascii_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
inline bool is_ascii_digit(char c) { return c >= '0' && c <= '9'; }

inline std::string lower(std::string s) {
    for (char& c : s)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return s;
}

inline bool is_annotation_tag(const std::string& tok) {
    return tok == kUrlTag || tok == kUserTag || tok == kNumberTag || tok == kHashtagTag;
}

inline bool looks_like_url(const std::string& chunk) {
    std::string low = lower(chunk);
    return low.rfind("http://", 0) == 0 || low.rfind("https://", 0) == 0 ||
           low.rfind("www.", 0) == 0;
}

inline std::size_t utf8_len(unsigned char lead) {
    if (lead < 0x80) return 1;
    if ((lead >> 5) == 0x6) return 2;
    if ((lead >> 4) == 0xe) return 3;
    if ((lead >> 3) == 0x1e) return 4;
    return 1;  // invalid lead byte, consume one
}

/// Splits a plain chunk (no URL/mention/hashtag) into word, <number>,
/// punctuation and single-codepoint (emoji) tokens.
inline void split_plain(const std::string& chunk, std::vector<std::string>& out) {
    std::size_t i = 0;
    while (i < chunk.size()) {
        unsigned char c = static_cast<unsigned char>(chunk[i]);
        if (c >= 0x80) {
            std::size_t len = std::min(utf8_len(c), chunk.size() - i);
            out.push_back(chunk.substr(i, len));
            i += len;
        } else if (is_ascii_alpha(chunk[i])) {
            std::size_t j = i;
            while (j < chunk.size() && is_ascii_alpha(chunk[j])) ++j;
            out.push_back(lower(chunk.substr(i, j - i)));
            i = j;
        } else if (is_ascii_digit(chunk[i])) {
            std::size_t j = i;
            while (j < chunk.size()) {
                if (is_ascii_digit(chunk[j])) {
                    ++j;
                } else if ((chunk[j] == '.' || chunk[j] == ',' || chunk[j] == ':') &&
                           j + 1 < chunk.size() && is_ascii_digit(chunk[j + 1])) {
                    j += 2;
                } else {
                    break;
                }
            }
            out.push_back(kNumberTag);
            i = j;
        } else if (std::isspace(c)) {
            ++i;
        } else {
            out.push_back(std::string(1, chunk[i]));
            ++i;
        }
    }
}

}  // namespace detail

/// Tokens plus (optionally) their vocabulary ids.
struct TokenSequence {
    std::vector<std::string> tokens;
    std::vector<std::size_t> ids;

    std::string surface() const {
        std::string out;
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            if (i) out += ' ';
            out += tokens[i];
        }
        return out;
    }
};

/// Lowercase, annotate (<url>, <user>, <number>), segment hashtags, split
/// punctuation, keep emoji as single tokens. Idempotent on its own surface
/// rendering: the annotation tags are treated as atomic on re-entry.
inline TokenSequence normalize_and_tokenize(const std::string& raw, const Lexicon& lexicon) {
    TokenSequence seq;
    std::istringstream chunks(raw);
    std::string chunk;
    while (chunks >> chunk) {
        if (detail::is_annotation_tag(chunk)) {
            seq.tokens.push_back(chunk);
        } else if (detail::looks_like_url(chunk)) {
            seq.tokens.push_back(kUrlTag);
        } else if (chunk.size() > 1 && chunk[0] == '@') {
            seq.tokens.push_back(kUserTag);
        } else if (chunk.size() > 1 && chunk[0] == '#') {
            // Trailing punctuation splits off before the body is segmented.
            std::string body = chunk.substr(1);
            std::string tail;
            while (!body.empty() &&
                   !(detail::is_ascii_alpha(body.back()) || detail::is_ascii_digit(body.back()) ||
                     body.back() == '_')) {
                tail.insert(tail.begin(), body.back());
                body.pop_back();
            }
            if (body.empty()) {
                detail::split_plain(chunk, seq.tokens);
            } else {
                seq.tokens.push_back(kHashtagTag);
                std::string low = detail::lower(body);
                std::size_t start = 0;
                // Underscores are explicit word boundaries.
                for (std::size_t i = 0; i <= low.size(); ++i) {
                    if (i == low.size() || low[i] == '_') {
                        if (i > start)
                            for (const auto& w : segment_hashtag(low.substr(start, i - start), lexicon))
                                seq.tokens.push_back(w);
                        start = i + 1;
                    }
                }
            }
            if (!tail.empty()) detail::split_plain(tail, seq.tokens);
        } else {
            detail::split_plain(chunk, seq.tokens);
        }
    }
    if (seq.tokens.empty())
        throw contract_error("normalize_and_tokenize: empty or whitespace-only text");
    return seq;
}

// ---- vocabulary -------------------------------------------------------------

class Vocabulary {
public:
    static constexpr std::size_t kPadId = 0;
    static constexpr std::size_t kUnkId = 1;

    Vocabulary() {
        for (const std::string& t : {kPadToken, kUnkToken, kUrlTag, kUserTag, kNumberTag, kHashtagTag})
            push(t);
    }

    /// Builds from training-split token counts only; tokens sorted by count
    /// (desc) then spelling for a deterministic id assignment.
    static Vocabulary build(const std::vector<TokenSequence>& corpus, std::size_t min_count = 1) {
        std::map<std::string, std::size_t> counts;
        for (const auto& seq : corpus)
            for (const auto& tok : seq.tokens) counts[tok]++;
        std::vector<std::pair<std::string, std::size_t>> sorted(counts.begin(), counts.end());
        std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
            return a.second != b.second ? a.second > b.second : a.first < b.first;
        });
        Vocabulary v;
        for (const auto& [tok, count] : sorted) {
            if (count < min_count) continue;
            if (v.token_to_id_.count(tok)) continue;  // reserved tokens
            v.push(tok);
        }
        return v;
    }

    std::size_t size() const { return id_to_token_.size(); }

    std::size_t id_of(const std::string& token) const {
        auto it = token_to_id_.find(token);
        return it == token_to_id_.end() ? kUnkId : it->second;
    }

    bool contains(const std::string& token) const { return token_to_id_.count(token) != 0; }

    const std::string& token_of(std::size_t id) const {
        if (id >= id_to_token_.size()) throw contract_error("vocabulary: id out of range");
        return id_to_token_[id];
    }

    const std::vector<std::string>& tokens() const { return id_to_token_; }

    void encode(TokenSequence& seq) const {
        seq.ids.clear();
        seq.ids.reserve(seq.tokens.size());
        for (const auto& tok : seq.tokens) seq.ids.push_back(id_of(tok));
    }

    std::uint64_t content_hash() const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (const auto& tok : id_to_token_) {
            h = fnv1a(tok, h);
            h = fnv1a("\x1f", h);
        }
        return h;
    }

    void save(const std::string& path) const {
        std::ofstream os(path);
        if (!os) throw format_error("cannot open vocabulary file for writing: " + path);
        os << "EMOV1 " << size() << "\n";
        for (const auto& tok : id_to_token_) os << tok << "\n";
    }

    static Vocabulary load(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw format_error("cannot open vocabulary file: " + path);
        std::string magic;
        std::size_t n = 0;
        is >> magic >> n;
        if (magic != "EMOV1") throw format_error("vocabulary file: bad header");
        std::string line;
        std::getline(is, line);
        Vocabulary v;
        v.id_to_token_.clear();
        v.token_to_id_.clear();
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::getline(is, line)) throw format_error("vocabulary file: truncated");
            v.push(line);
        }
        return v;
    }

private:
    void push(const std::string& tok) {
        token_to_id_[tok] = id_to_token_.size();
        id_to_token_.push_back(tok);
    }

    std::unordered_map<std::string, std::size_t> token_to_id_;
    std::vector<std::string> id_to_token_;
};

// ---- pretrained embeddings --------------------------------------------------

struct EmbeddingLoadStats {
    std::size_t covered = 0;
    std::size_t missing = 0;
    double coverage() const {
        std::size_t total = covered + missing;
        return total ? static_cast<double>(covered) / static_cast<double>(total) : 0.0;
    }
};

/// Reads a word2vec-style text file (optional "count dim" header line). Vocab
/// tokens absent from the file get seeded uniform(-0.05, 0.05) rows; the PAD
/// row stays zero.
inline EmbeddingTable load_embeddings(const std::string& path, const Vocabulary& vocab,
                                      std::uint64_t seed = 0, EmbeddingLoadStats* stats = nullptr,
                                      bool trainable = false) {
    std::ifstream is(path);
    if (!is) throw format_error("cannot open embedding file: " + path);

    std::unordered_map<std::string, std::vector<double>> rows;
    std::size_t dim = 0;
    std::string line;
    std::size_t line_no = 0;
    bool first = true;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string token;
        ls >> token;
        std::vector<double> values;
        double v;
        while (ls >> v) values.push_back(v);
        if (first) {
            first = false;
            // Optional header: two integers, token itself numeric.
            if (values.size() == 1 && !token.empty() &&
                token.find_first_not_of("0123456789") == std::string::npos)
                continue;
        }
        if (values.empty())
            throw format_error("embedding file line " + std::to_string(line_no) + ": no values");
        if (dim == 0) dim = values.size();
        if (values.size() != dim)
            throw format_error("embedding file line " + std::to_string(line_no) +
                               ": expected " + std::to_string(dim) + " floats, got " +
                               std::to_string(values.size()));
        rows[token] = std::move(values);
    }
    if (dim == 0) throw format_error("embedding file is empty: " + path);

    EmbeddingTable table = EmbeddingTable::zeros(vocab.size(), dim, trainable);
    EmbeddingLoadStats local;
    for (std::size_t id = 1; id < vocab.size(); ++id) {
        const std::string& tok = vocab.token_of(id);
        auto it = rows.find(tok);
        if (it != rows.end()) {
            for (std::size_t c = 0; c < dim; ++c) table.matrix.value_mut().at(id, c) = it->second[c];
            ++local.covered;
        } else {
            // Per-token seeding keeps rows stable under vocab reordering.
            Rng rng(seed ^ fnv1a(tok));
            for (std::size_t c = 0; c < dim; ++c)
                table.matrix.value_mut().at(id, c) = rng.uniform(-0.05, 0.05);
            ++local.missing;
        }
    }
    table.zero_pad_row();
    if (stats) *stats = local;
    return table;
}

}  // namespace emo
