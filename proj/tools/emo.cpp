// Command-line front end for the emotion analysis toolkit: preprocessing,
// network training, feature transfer, boosted-tree fusion, explanation, and
// evaluation, all driven by plain text artifacts.
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "emo/emo.hpp"

namespace {

using namespace emo;

Lexicon load_lexicon_checked(const std::string& path) { return Lexicon::load(path); }

/// Tokenizes every record in place; tokenizer failures are reported with the
/// offending tweet id.
void tokenize_records(std::vector<TweetRecord>& records, const Lexicon& lexicon) {
    for (auto& rec : records) {
        try {
            rec.tokens = normalize_and_tokenize(rec.raw_text, lexicon);
        } catch (const contract_error& e) {
            throw format_error("tweet " + rec.id + ": " + e.what());
        }
    }
}

std::vector<TweetRecord> load_dataset(const std::string& path, const std::string& task,
                                      const std::string& emotion) {
    if (task == "clf") return load_ec(path);
    std::size_t skipped = 0;
    auto records = load_eireg(path, emotion, &skipped);
    if (skipped > 0)
        std::cerr << "note: skipped " << skipped << " rows for other emotions\n";
    if (records.empty()) throw format_error("no rows found for emotion '" + emotion + "'");
    return records;
}

std::vector<std::size_t> encode_ids(const TokenSequence& seq, const Vocabulary& vocab) {
    std::vector<std::size_t> ids;
    ids.reserve(seq.tokens.size());
    for (const auto& tok : seq.tokens) ids.push_back(vocab.id_of(tok));
    return ids;
}

Vocabulary load_vocab_for_model(const std::string& vocab_path, const ModelBundle& model) {
    Vocabulary vocab = Vocabulary::load(vocab_path);
    if (model.vocab_hash != 0 && vocab.content_hash() != model.vocab_hash)
        throw contract_error("vocabulary file does not match the one the model was trained with");
    return vocab;
}

/// Applies config-file overrides shared by both training commands.
void apply_train_config(const Config& cfg, TrainPlan& plan, AdamState& adam) {
    plan.epochs = cfg.get_size("epochs", plan.epochs);
    plan.batch_size = cfg.get_size("batch_size", plan.batch_size);
    adam.lr = cfg.get_double("learning_rate", adam.lr);
}

struct TrainArgs {
    std::string input, lexicon, vocab, embeddings, out, config, loss_log, emotion;
    std::uint64_t seed = 0;
    std::size_t epochs = 0;  // 0: use preset
};

void add_common_train_flags(CLI::App* cmd, TrainArgs& a) {
    cmd->add_option("--input", a.input, "training dataset TSV")->required();
    cmd->add_option("--lexicon", a.lexicon, "word frequency list for tokenization")->required();
    cmd->add_option("--vocab", a.vocab, "vocabulary file from `preprocess`")->required();
    cmd->add_option("--embeddings", a.embeddings, "word2vec text embeddings")->required();
    cmd->add_option("--out", a.out, "output model file")->required();
    cmd->add_option("--config", a.config, "config file with overrides");
    cmd->add_option("--seed", a.seed, "training seed");
    cmd->add_option("--epochs", a.epochs, "override the preset epoch count");
    cmd->add_option("--loss-log", a.loss_log, "per-epoch loss CSV");
}

int run_train(const TrainArgs& a, bool classifier) {
    Lexicon lexicon = load_lexicon_checked(a.lexicon);
    auto records = load_dataset(a.input, classifier ? "clf" : "reg", a.emotion);
    tokenize_records(records, lexicon);
    Vocabulary vocab = Vocabulary::load(a.vocab);

    EmbeddingLoadStats stats;
    EmbeddingTable table = load_embeddings(a.embeddings, vocab, a.seed, &stats);
    std::cerr << "embedding coverage: " << stats.coverage() * 100.0 << "%\n";

    ModelConfig mc = classifier ? ModelConfig::eccu(table.dim) : ModelConfig::eipu(table.dim);
    Rng init(a.seed);
    ModelBundle model = ModelBundle::create(mc, vocab.size(), init, vocab.content_hash());
    model.embedding = std::move(table);

    TrainPlan plan;
    plan.seed = a.seed;
    plan.loss = classifier ? LossKind::multilabel_xent : LossKind::mse;
    plan.epochs = classifier ? 10 : (a.emotion == "anger" ? 40 : 15);
    AdamState adam;
    if (!a.config.empty()) apply_train_config(Config::load(a.config), plan, adam);
    if (a.epochs > 0) plan.epochs = a.epochs;

    std::vector<TrainExample> data;
    data.reserve(records.size());
    for (const auto& rec : records) {
        TrainExample ex;
        ex.token_ids = encode_ids(rec.tokens, vocab);
        if (classifier)
            for (int l : *rec.labels) ex.target.push_back(l);
        else
            ex.target.push_back(*rec.intensity);
        data.push_back(std::move(ex));
    }

    std::vector<double> losses = train(model, data, plan, &adam);
    save_model_file(model, a.out);
    if (!a.loss_log.empty()) write_loss_log(losses, a.loss_log);
    std::cerr << "final training loss: " << losses.back() << "\n";
    return 0;
}

std::string hex_fingerprint(const Config& cfg, std::uint64_t vocab_hash, std::uint64_t seed) {
    return hex64(cfg.fingerprint(vocab_hash, seed));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"emotion classification, intensity regression, fusion, and explanation"};
    app.require_subcommand(1);

    // ---- preprocess ----
    auto* preprocess = app.add_subcommand("preprocess", "tokenize a dataset and build a vocabulary");
    struct {
        std::string task = "clf", input, lexicon, emotion, out, tokens_out;
    } pp;
    preprocess->add_option("--task", pp.task, "clf or reg")->check(CLI::IsMember({"clf", "reg"}));
    preprocess->add_option("--input", pp.input, "dataset TSV")->required();
    preprocess->add_option("--lexicon", pp.lexicon, "word frequency list")->required();
    preprocess->add_option("--emotion", pp.emotion, "emotion filter (reg)");
    preprocess->add_option("--out", pp.out, "output vocabulary file")->required();
    preprocess->add_option("--tokens-out", pp.tokens_out, "tokenized corpus TSV");

    // ---- train-clf / train-reg ----
    TrainArgs clf_args, reg_args;
    auto* train_clf = app.add_subcommand("train-clf", "train the multi-label emotion classifier");
    add_common_train_flags(train_clf, clf_args);
    auto* train_reg = app.add_subcommand("train-reg", "train a per-emotion intensity regressor");
    add_common_train_flags(train_reg, reg_args);
    train_reg->add_option("--emotion", reg_args.emotion, "anger, fear, joy, or sadness")
        ->required()
        ->check(CLI::IsMember({"anger", "fear", "joy", "sadness"}));

    // ---- extract-features ----
    auto* extract = app.add_subcommand("extract-features", "dump transfer features from a model");
    struct {
        std::string model, input, lexicon, vocab, task = "reg", emotion, out;
    } xf;
    extract->add_option("--model", xf.model, "trained model file")->required();
    extract->add_option("--input", xf.input, "dataset TSV")->required();
    extract->add_option("--lexicon", xf.lexicon, "word frequency list")->required();
    extract->add_option("--vocab", xf.vocab, "vocabulary file")->required();
    extract->add_option("--task", xf.task, "clf or reg")->check(CLI::IsMember({"clf", "reg"}));
    extract->add_option("--emotion", xf.emotion, "emotion filter (reg)");
    extract->add_option("--out", xf.out, "output feature CSV")->required();

    // ---- ingest-features ----
    auto* ingest = app.add_subcommand("ingest-features", "validate an external feature CSV");
    struct {
        std::string input, name = "external", out;
    } ig;
    ingest->add_option("--input", ig.input, "feature CSV (id,f0,...)")->required();
    ingest->add_option("--name", ig.name, "source name for the manifest");
    ingest->add_option("--out", ig.out, "canonicalized output CSV")->required();

    // ---- train-fusion ----
    auto* fusion = app.add_subcommand("train-fusion", "train the boosted-tree fusion regressor");
    struct {
        std::vector<std::string> features;
        std::string input, emotion, preset = "c1", out, manifest_out;
    } fu;
    fusion->add_option("--features", fu.features, "feature CSVs, fused in order")
        ->required()
        ->expected(-1);
    fusion->add_option("--input", fu.input, "EI-reg TSV with gold intensities")->required();
    fusion->add_option("--emotion", fu.emotion, "target emotion")->required();
    fusion->add_option("--preset", fu.preset, "c1 (depth 2, 400 trees) or c2 (depth 5, 300)")
        ->check(CLI::IsMember({"c1", "c2"}));
    fusion->add_option("--out", fu.out, "output model file")->required();
    fusion->add_option("--manifest-out", fu.manifest_out, "column provenance file");

    // ---- predict ----
    auto* predict = app.add_subcommand("predict", "run a trained model over a dataset");
    struct {
        std::string model, gbt, input, lexicon, vocab, task = "reg", emotion, out;
        std::vector<std::string> features;
        double threshold = 0.5;
    } pr;
    predict->add_option("--model", pr.model, "neural model file");
    predict->add_option("--gbt", pr.gbt, "fusion model file (use with --features)");
    predict->add_option("--features", pr.features, "feature CSVs for the fusion model")
        ->expected(-1);
    predict->add_option("--input", pr.input, "dataset TSV (neural path)");
    predict->add_option("--lexicon", pr.lexicon, "word frequency list");
    predict->add_option("--vocab", pr.vocab, "vocabulary file");
    predict->add_option("--task", pr.task, "clf or reg")->check(CLI::IsMember({"clf", "reg"}));
    predict->add_option("--emotion", pr.emotion, "emotion filter (reg)");
    predict->add_option("--threshold", pr.threshold, "multi-label decision threshold");
    predict->add_option("--out", pr.out, "predictions CSV")->required();

    // ---- explain ----
    auto* explain = app.add_subcommand("explain", "word-importance heatmap for a regressor");
    struct {
        std::string model, input, lexicon, vocab, emotion, out, csv_out;
        std::size_t permutations = 2000, limit = 0;
        std::uint64_t seed = 0;
        bool force_sampled = false;
    } ex;
    explain->add_option("--model", ex.model, "trained intensity model")->required();
    explain->add_option("--input", ex.input, "EI-reg TSV")->required();
    explain->add_option("--lexicon", ex.lexicon, "word frequency list")->required();
    explain->add_option("--vocab", ex.vocab, "vocabulary file")->required();
    explain->add_option("--emotion", ex.emotion, "emotion filter")->required();
    explain->add_option("--out", ex.out, "output HTML heatmap")->required();
    explain->add_option("--csv-out", ex.csv_out, "per-token attribution CSV");
    explain->add_option("--permutations", ex.permutations, "samples for long tweets");
    explain->add_option("--seed", ex.seed, "sampling seed");
    explain->add_option("--limit", ex.limit, "explain only the first N tweets");
    explain->add_flag("--sampled", ex.force_sampled, "use sampling even for short tweets");

    // ---- evaluate ----
    auto* evaluate = app.add_subcommand("evaluate", "score predictions against gold labels");
    struct {
        std::string task = "reg", pred, gold, emotion, out, csv_out, config, vocab;
        std::uint64_t seed = 0;
    } ev;
    evaluate->add_option("--task", ev.task, "clf or reg")->check(CLI::IsMember({"clf", "reg"}));
    evaluate->add_option("--pred", ev.pred, "predictions CSV")->required();
    evaluate->add_option("--gold", ev.gold, "gold dataset TSV")->required();
    evaluate->add_option("--emotion", ev.emotion, "emotion filter (reg)");
    evaluate->add_option("--out", ev.out, "report text file")->required();
    evaluate->add_option("--csv-out", ev.csv_out, "report CSV");
    evaluate->add_option("--config", ev.config, "config used for the run (fingerprinted)");
    evaluate->add_option("--vocab", ev.vocab, "vocabulary used for the run (fingerprinted)");
    evaluate->add_option("--seed", ev.seed, "seed used for the run (fingerprinted)");

    // ---- baseline ----
    auto* baseline = app.add_subcommand("baseline", "BoW / NBoW intensity baselines");
    struct {
        std::string kind = "bow", train_path, test_path, lexicon, emotion, embeddings, out, report;
        std::uint64_t seed = 0;
    } bl;
    baseline->add_option("--kind", bl.kind, "bow (TF-IDF) or nbow (mean embedding)")
        ->check(CLI::IsMember({"bow", "nbow"}));
    baseline->add_option("--train", bl.train_path, "EI-reg training TSV")->required();
    baseline->add_option("--test", bl.test_path, "EI-reg evaluation TSV")->required();
    baseline->add_option("--lexicon", bl.lexicon, "word frequency list")->required();
    baseline->add_option("--emotion", bl.emotion, "target emotion")->required();
    baseline->add_option("--embeddings", bl.embeddings, "word2vec text file (nbow)");
    baseline->add_option("--seed", bl.seed, "seed for missing embedding rows (nbow)");
    baseline->add_option("--out", bl.out, "predictions CSV")->required();
    baseline->add_option("--report", bl.report, "baseline description text file");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*preprocess) {
            Lexicon lexicon = load_lexicon_checked(pp.lexicon);
            auto records = load_dataset(pp.input, pp.task, pp.emotion);
            tokenize_records(records, lexicon);
            std::vector<TokenSequence> seqs;
            seqs.reserve(records.size());
            for (const auto& rec : records) seqs.push_back(rec.tokens);
            Vocabulary vocab = Vocabulary::build(seqs);
            vocab.save(pp.out);
            std::cerr << "vocabulary: " << vocab.size() << " entries, hash "
                      << hex64(vocab.content_hash()) << "\n";
            if (!pp.tokens_out.empty()) {
                std::ofstream os(pp.tokens_out);
                if (!os) throw format_error("cannot open tokens file: " + pp.tokens_out);
                for (const auto& rec : records) {
                    os << rec.id << '\t';
                    for (std::size_t i = 0; i < rec.tokens.tokens.size(); ++i)
                        os << (i ? " " : "") << rec.tokens.tokens[i];
                    os << '\n';
                }
            }
        } else if (*train_clf) {
            return run_train(clf_args, true);
        } else if (*train_reg) {
            return run_train(reg_args, false);
        } else if (*extract) {
            ModelBundle model = load_model_file(xf.model);
            Vocabulary vocab = load_vocab_for_model(xf.vocab, model);
            Lexicon lexicon = load_lexicon_checked(xf.lexicon);
            auto records = load_dataset(xf.input, xf.task, xf.emotion);
            tokenize_records(records, lexicon);
            FeatureSource src;
            src.name = xf.model;
            for (const auto& rec : records)
                src.add(rec.id, model.extract_features(encode_ids(rec.tokens, vocab)));
            write_feature_csv(src, xf.out);
        } else if (*ingest) {
            FeatureSource src = ingest_external_features(ig.input, ig.name);
            write_feature_csv(src, ig.out);
            std::cerr << "ingested " << src.ids.size() << " rows x " << src.width
                      << " features\n";
        } else if (*fusion) {
            std::vector<FeatureSource> sources;
            sources.reserve(fu.features.size());
            for (const auto& path : fu.features)
                sources.push_back(ingest_external_features(path, path));
            std::vector<const FeatureSource*> ptrs;
            for (const auto& s : sources) ptrs.push_back(&s);
            FusedMatrix fused = fuse(ptrs);

            auto records = load_dataset(fu.input, "reg", fu.emotion);
            std::unordered_map<std::string, double> gold;
            for (const auto& rec : records) gold[rec.id] = *rec.intensity;
            std::vector<double> y;
            y.reserve(fused.ids.size());
            for (const auto& id : fused.ids) {
                auto it = gold.find(id);
                if (it == gold.end())
                    throw contract_error("no gold intensity for feature id '" + id + "'");
                y.push_back(it->second);
            }

            GBTParams params = fu.preset == "c1" ? GBTParams::c1() : GBTParams::c2();
            GBTModel model = gbt_train(fused.rows, y, params);
            for (const auto& w : model.warnings) std::cerr << "warning: " << w << "\n";
            save_gbt_file(model, fu.out);
            if (!fu.manifest_out.empty()) {
                std::ofstream os(fu.manifest_out);
                if (!os) throw format_error("cannot open manifest file: " + fu.manifest_out);
                os << fused.manifest;
            }
        } else if (*predict) {
            if (!pr.gbt.empty()) {
                if (pr.features.empty())
                    throw contract_error("predict --gbt requires --features");
                GBTModel model = load_gbt_file(pr.gbt);
                std::vector<FeatureSource> sources;
                for (const auto& path : pr.features)
                    sources.push_back(ingest_external_features(path, path));
                std::vector<const FeatureSource*> ptrs;
                for (const auto& s : sources) ptrs.push_back(&s);
                FusedMatrix fused = fuse(ptrs);
                std::vector<double> values;
                values.reserve(fused.rows.size());
                for (const auto& row : fused.rows) values.push_back(model.predict(row));
                write_reg_predictions(fused.ids, values, pr.out);
            } else {
                if (pr.model.empty() || pr.input.empty() || pr.lexicon.empty() ||
                    pr.vocab.empty())
                    throw contract_error(
                        "predict needs --model/--input/--lexicon/--vocab (or --gbt/--features)");
                ModelBundle model = load_model_file(pr.model);
                Vocabulary vocab = load_vocab_for_model(pr.vocab, model);
                Lexicon lexicon = load_lexicon_checked(pr.lexicon);
                auto records = load_dataset(pr.input, pr.task, pr.emotion);
                tokenize_records(records, lexicon);
                std::vector<std::string> ids;
                if (pr.task == "clf") {
                    std::vector<std::vector<int>> labels;
                    for (const auto& rec : records) {
                        auto [v0, ve] = model.predict(encode_ids(rec.tokens, vocab));
                        std::vector<int> row;
                        for (double p : ve.flat()) row.push_back(p >= pr.threshold ? 1 : 0);
                        ids.push_back(rec.id);
                        labels.push_back(std::move(row));
                    }
                    write_clf_predictions(ids, labels, pr.out);
                } else {
                    std::vector<double> values;
                    for (const auto& rec : records) {
                        auto [v0, ve] = model.predict(encode_ids(rec.tokens, vocab));
                        ids.push_back(rec.id);
                        values.push_back(ve.flat()[0]);
                    }
                    write_reg_predictions(ids, values, pr.out);
                }
            }
        } else if (*explain) {
            ModelBundle model = load_model_file(ex.model);
            if (model.config.output_dim != 1)
                throw contract_error("explain expects a single-output intensity model");
            Vocabulary vocab = load_vocab_for_model(ex.vocab, model);
            Lexicon lexicon = load_lexicon_checked(ex.lexicon);
            auto records = load_dataset(ex.input, "reg", ex.emotion);
            tokenize_records(records, lexicon);
            if (ex.limit > 0 && records.size() > ex.limit) records.resize(ex.limit);
            std::vector<Attribution> attributions;
            attributions.reserve(records.size());
            for (const auto& rec : records) {
                std::vector<std::size_t> ids = encode_ids(rec.tokens, vocab);
                if (ids.size() > kMaxSeqLen) ids.resize(kMaxSeqLen);
                bool exact = !ex.force_sampled && ids.size() <= kExactShapleyLimit;
                Attribution a = attribute(model, rec.id, rec.tokens.tokens, ids, exact,
                                          ex.permutations, ex.seed);
                a.gold = *rec.intensity;
                attributions.push_back(std::move(a));
            }
            std::ofstream os(ex.out);
            if (!os) throw format_error("cannot open heatmap file: " + ex.out);
            os << render_heatmap(attributions);
            if (!ex.csv_out.empty()) write_attribution_csv(attributions, ex.csv_out);
        } else if (*evaluate) {
            Config cfg;
            if (!ev.config.empty()) cfg = Config::load(ev.config);
            std::uint64_t vocab_hash = 0;
            if (!ev.vocab.empty()) vocab_hash = Vocabulary::load(ev.vocab).content_hash();

            EvalReport report;
            report.task = ev.task;
            report.fingerprint = hex_fingerprint(cfg, vocab_hash, ev.seed);
            if (ev.task == "reg") {
                auto [pred_ids, pred_vals] = read_reg_predictions(ev.pred);
                auto records = load_dataset(ev.gold, "reg", ev.emotion);
                std::unordered_map<std::string, double> gold;
                for (const auto& rec : records) gold[rec.id] = *rec.intensity;
                std::vector<double> gold_vals;
                for (const auto& id : pred_ids) {
                    auto it = gold.find(id);
                    if (it == gold.end())
                        throw contract_error("no gold intensity for prediction id '" + id + "'");
                    gold_vals.push_back(it->second);
                }
                report.metrics["pearson"] = pearson(pred_vals, gold_vals);
                if (!ev.emotion.empty())
                    report.per_emotion["pearson_" + ev.emotion] = report.metrics["pearson"];
            } else {
                auto [pred_ids, pred_labels] = read_clf_predictions(ev.pred);
                auto records = load_ec(ev.gold);
                std::unordered_map<std::string, std::vector<int>> gold;
                for (const auto& rec : records) gold[rec.id] = *rec.labels;
                std::vector<std::vector<int>> gold_labels;
                for (const auto& id : pred_ids) {
                    auto it = gold.find(id);
                    if (it == gold.end())
                        throw contract_error("no gold labels for prediction id '" + id + "'");
                    gold_labels.push_back(it->second);
                }
                MultilabelScores s = multilabel_metrics(pred_labels, gold_labels);
                report.metrics["jaccard"] = s.jaccard;
                report.metrics["micro_f1"] = s.micro_f1;
                report.metrics["macro_f1"] = s.macro_f1;
            }
            std::ofstream os(ev.out);
            if (!os) throw format_error("cannot open report file: " + ev.out);
            os << report.to_text();
            if (!ev.csv_out.empty()) {
                std::ofstream cs(ev.csv_out);
                if (!cs) throw format_error("cannot open report CSV: " + ev.csv_out);
                cs << report.to_csv();
            }
            std::cerr << report.to_text();
        } else if (*baseline) {
            Lexicon lexicon = load_lexicon_checked(bl.lexicon);
            auto train_recs = load_dataset(bl.train_path, "reg", bl.emotion);
            auto test_recs = load_dataset(bl.test_path, "reg", bl.emotion);
            tokenize_records(train_recs, lexicon);
            tokenize_records(test_recs, lexicon);

            std::vector<TokenSequence> train_seqs;
            std::vector<double> y;
            for (const auto& rec : train_recs) {
                train_seqs.push_back(rec.tokens);
                y.push_back(*rec.intensity);
            }

            BaselineModel model;
            Vocabulary vocab;
            EmbeddingTable table;
            if (bl.kind == "nbow") {
                if (bl.embeddings.empty())
                    throw contract_error("baseline --kind nbow requires --embeddings");
                vocab = Vocabulary::build(train_seqs);
                table = load_embeddings(bl.embeddings, vocab, bl.seed);
                model.kind = BaselineKind::nbow;
                model.embeddings = &table;
                model.vocab = &vocab;
            }
            model.fit(train_seqs, y);

            std::vector<std::string> ids;
            std::vector<double> values;
            for (const auto& rec : test_recs) {
                ids.push_back(rec.id);
                values.push_back(model.predict(rec.tokens));
            }
            write_reg_predictions(ids, values, bl.out);
            if (!bl.report.empty()) {
                std::ofstream os(bl.report);
                if (!os) throw format_error("cannot open report file: " + bl.report);
                os << "baseline: " << (bl.kind == "bow" ? "unigram TF-IDF BoW" : "NBoW mean embedding")
                   << "\nlearner: ridge regression (lambda=1.0), substituted for the SVM baseline"
                   << "\nemotion: " << bl.emotion << "\ntrain_rows: " << train_recs.size()
                   << "\n";
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
