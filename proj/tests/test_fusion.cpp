#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "emo/fusion.hpp"
#include "emo/metrics.hpp"
#include "emo/rng.hpp"

using namespace emo;

namespace {

FeatureSource make_source(const std::string& name, std::size_t width,
                          const std::vector<std::string>& ids, std::uint64_t seed) {
    FeatureSource s;
    s.name = name;
    Rng rng(seed);
    for (const auto& id : ids) {
        std::vector<double> v(width);
        for (double& x : v) x = rng.uniform(-1.0, 1.0);
        s.add(id, v);
    }
    return s;
}

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& contents) {
        static int counter = 0;
        path = "emo_fusion_tmp_" + std::to_string(counter++) + ".csv";
        std::ofstream os(path);
        os << contents;
    }
    ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST(Fuse, SingleSourcePassThrough) {
    FeatureSource s = make_source("only", 3, {"a", "b"}, 1);
    FusedMatrix fused = fuse({&s});
    EXPECT_EQ(fused.width, 3u);
    ASSERT_EQ(fused.rows.size(), 2u);
    EXPECT_EQ(fused.rows[0], s.values.at("a"));
    EXPECT_EQ(fused.rows[1], s.values.at("b"));
}

TEST(Fuse, EccuPlusEipuWidth) {
    FeatureSource eccu = make_source("eccu", 139, {"t1", "t2"}, 2);
    FeatureSource eipu = make_source("eipu", 65, {"t1", "t2"}, 3);
    FusedMatrix fused = fuse({&eccu, &eipu});
    EXPECT_EQ(fused.width, 204u);
    EXPECT_NE(fused.manifest.find("eccu,0,139"), std::string::npos);
    EXPECT_NE(fused.manifest.find("eipu,139,65"), std::string::npos);
}

TEST(Fuse, PermutingSourceOrderPermutesColumnGroups) {
    FeatureSource a = make_source("a", 2, {"x"}, 4);
    FeatureSource b = make_source("b", 3, {"x"}, 5);
    FusedMatrix ab = fuse({&a, &b});
    FusedMatrix ba = fuse({&b, &a});
    for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(ab.rows[0][i], ba.rows[0][3 + i]);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(ab.rows[0][2 + i], ba.rows[0][i]);
}

TEST(Fuse, MissingIdNamesIdAndSource) {
    FeatureSource a = make_source("alpha", 2, {"x", "y"}, 6);
    FeatureSource b = make_source("beta", 2, {"x"}, 7);
    try {
        fuse({&a, &b});
        FAIL() << "expected contract_error";
    } catch (const contract_error& e) {
        std::string msg = e.what();
        EXPECT_NE(msg.find("y"), std::string::npos);
        EXPECT_NE(msg.find("beta"), std::string::npos);
    }
}

TEST(Fuse, ManifestReconstructionIsBitIdentical) {
    FeatureSource a = make_source("a", 3, {"i1", "i2", "i3"}, 8);
    FeatureSource b = make_source("b", 2, {"i1", "i2", "i3"}, 9);
    FusedMatrix fused = fuse({&a, &b});
    // parse the manifest and rebuild X from the sources
    std::istringstream ms(fused.manifest);
    std::string line;
    struct Group { std::string name; std::size_t start, width; };
    std::vector<Group> groups;
    while (std::getline(ms, line)) {
        std::size_t c1 = line.find(','), c2 = line.rfind(',');
        groups.push_back({line.substr(0, c1),
                          std::stoul(line.substr(c1 + 1, c2 - c1 - 1)),
                          std::stoul(line.substr(c2 + 1))});
    }
    auto lookup = [&](const std::string& name) -> const FeatureSource& {
        return name == "a" ? a : b;
    };
    for (std::size_t r = 0; r < fused.ids.size(); ++r)
        for (const auto& g : groups) {
            const auto& src_row = lookup(g.name).values.at(fused.ids[r]);
            for (std::size_t c = 0; c < g.width; ++c)
                EXPECT_EQ(fused.rows[r][g.start + c], src_row[c]);
        }
}

TEST(IngestFeatures, WellFormedFile) {
    TempFile f("id,f0,f1\nt1,0.5,1.5\nt2,-1.0,2.0\nt3,0,0\n");
    FeatureSource s = ingest_external_features(f.path, "ext");
    EXPECT_EQ(s.ids.size(), 3u);
    EXPECT_EQ(s.width, 2u);
    EXPECT_DOUBLE_EQ(s.values.at("t1")[1], 1.5);
}

TEST(IngestFeatures, NanRejected) {
    TempFile f("id,f0\nt1,NaN\n");
    EXPECT_THROW(ingest_external_features(f.path, "ext"), format_error);
}

TEST(IngestFeatures, DuplicateIdReported) {
    TempFile f("id,f0\nt1,0.5\nt1,0.6\n");
    try {
        ingest_external_features(f.path, "ext");
        FAIL() << "expected format_error";
    } catch (const format_error& e) {
        EXPECT_NE(std::string(e.what()).find("t1"), std::string::npos);
    }
}

TEST(IngestFeatures, RaggedRowRejectedWithRowNumber) {
    TempFile f("id,f0,f1\nt1,0.5\n");
    try {
        ingest_external_features(f.path, "ext");
        FAIL() << "expected format_error";
    } catch (const format_error& e) {
        EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos);
    }
}

TEST(IngestFeatures, RoundTripsThroughWriter) {
    FeatureSource s = make_source("rt", 4, {"a", "b", "c"}, 10);
    write_feature_csv(s, "emo_fusion_rt.csv");
    FeatureSource back = ingest_external_features("emo_fusion_rt.csv", "rt");
    std::remove("emo_fusion_rt.csv");
    EXPECT_EQ(back.ids, s.ids);
    for (const auto& id : s.ids) EXPECT_EQ(back.values.at(id), s.values.at(id));
}

TEST(GbtTrain, ConstantTargetPredictsMeanWithWeightlessTrees) {
    std::vector<std::vector<double>> X = {{1.0}, {2.0}, {3.0}, {4.0}};
    std::vector<double> y(4, 0.42);
    GBTModel m = gbt_train(X, y, GBTParams::c1());
    for (const auto& x : X) EXPECT_DOUBLE_EQ(m.predict(x), 0.42);
    for (const auto& t : m.trees)
        for (const auto& n : t.nodes)
            if (n.feature < 0) EXPECT_NEAR(n.weight, 0.0, 1e-12);
}

TEST(GbtTrain, FitsLinearRampToHighPearson) {
    // 1-D X, y = x, C1 preset parameters
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    for (int i = 0; i < 200; ++i) {
        double v = static_cast<double>(i) / 199.0;
        X.push_back({v});
        y.push_back(v);
    }
    GBTModel m = gbt_train(X, y, GBTParams::c1());
    std::vector<double> pred;
    for (const auto& x : X) pred.push_back(m.predict(x));
    EXPECT_GT(pearson(pred, y), 0.999);
}

TEST(GbtTrain, TwoLeafHandComputedCase) {
    // one round, one split, lambda=0: leaf values are leaf-wise residual means
    std::vector<std::vector<double>> X = {{0.0}, {0.1}, {0.9}, {1.0}};
    std::vector<double> y = {0.2, 0.3, 0.8, 0.9};
    GBTParams p;
    p.max_depth = 1;
    p.learning_rate = 1.0;
    p.n_estimators = 1;
    p.lambda = 0.0;
    GBTModel m = gbt_train(X, y, p);
    // base = 0.55; residuals {-0.35,-0.25,0.25,0.35}; split at 0.5
    // left leaf = -0.3, right leaf = +0.3
    EXPECT_NEAR(m.predict({0.05}), 0.55 - 0.3, 1e-12);
    EXPECT_NEAR(m.predict({0.95}), 0.55 + 0.3, 1e-12);
    ASSERT_EQ(m.trees.size(), 1u);
    EXPECT_EQ(m.trees[0].nodes[0].feature, 0);
    EXPECT_NEAR(m.trees[0].nodes[0].threshold, 0.5, 1e-12);
}

TEST(GbtTrain, TrainingErrorNonIncreasingWithEstimators) {
    Rng rng(11);
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    for (int i = 0; i < 120; ++i) {
        std::vector<double> x = {rng.uniform(), rng.uniform(), rng.uniform()};
        y.push_back(std::min(1.0, std::max(0.0, 0.5 * x[0] + 0.3 * x[1] * x[2] +
                                                    0.1 * rng.uniform())));
        X.push_back(std::move(x));
    }
    GBTParams p = GBTParams::c1();
    auto mse_at = [&](std::size_t rounds) {
        GBTParams q = p;
        q.n_estimators = rounds;
        GBTModel m = gbt_train(X, y, q);
        double s = 0.0;
        for (std::size_t i = 0; i < X.size(); ++i) {
            double d = m.raw_predict(X[i]) - y[i];
            s += d * d;
        }
        return s / static_cast<double>(X.size());
    };
    double e1 = mse_at(1), e10 = mse_at(10), e100 = mse_at(100), e400 = mse_at(400);
    EXPECT_LE(e10, e1 + 1e-12);
    EXPECT_LE(e100, e10 + 1e-12);
    EXPECT_LE(e400, e100 + 1e-12);
}

TEST(GbtTrain, RespectsMaxDepthForBothPresets) {
    Rng rng(12);
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    for (int i = 0; i < 80; ++i) {
        std::vector<double> x = {rng.uniform(), rng.uniform()};
        y.push_back(x[0] > 0.5 ? x[1] : 1.0 - x[1]);
        X.push_back(std::move(x));
    }
    for (GBTParams p : {GBTParams::c1(), GBTParams::c2()}) {
        p.n_estimators = 25;
        GBTModel m = gbt_train(X, y, p);
        for (const auto& t : m.trees) EXPECT_LE(t.depth_from(), p.max_depth);
    }
}

TEST(GbtTrain, ConstantFeaturesWarnAndPredictBase) {
    std::vector<std::vector<double>> X = {{1.0}, {1.0}, {1.0}, {1.0}};
    std::vector<double> y = {0.1, 0.4, 0.6, 0.9};
    GBTModel m = gbt_train(X, y, GBTParams::c1());
    EXPECT_FALSE(m.warnings.empty());
    EXPECT_NEAR(m.predict({1.0}), 0.5, 1e-9);
}

TEST(GbtPredict, EmptyEnsembleReturnsBase) {
    GBTModel m;
    m.base_score = 0.37;
    m.n_features = 2;
    EXPECT_DOUBLE_EQ(m.predict({0.0, 0.0}), 0.37);
}

TEST(GbtPredict, WidthMismatchThrows) {
    std::vector<std::vector<double>> X = {{0.0, 1.0}, {1.0, 0.0}, {0.5, 0.5}};
    std::vector<double> y = {0.0, 1.0, 0.5};
    GBTModel m = gbt_train(X, y, GBTParams::c1());
    EXPECT_THROW(m.predict({0.5}), contract_error);
}

TEST(GbtPredict, OutputClampedToUnitInterval) {
    std::vector<std::vector<double>> X = {{0.0}, {0.5}, {1.0}};
    std::vector<double> y = {0.0, 0.5, 1.0};
    GBTParams p;
    p.max_depth = 1;
    p.learning_rate = 10.0;  // deliberately overshooting
    p.n_estimators = 5;
    p.min_leaf = 1;
    GBTModel m = gbt_train(X, y, p);
    for (double v : {-5.0, 0.0, 0.5, 1.0, 5.0}) {
        double out = m.predict({v});
        EXPECT_GE(out, 0.0);
        EXPECT_LE(out, 1.0);
    }
}

TEST(GbtPersistence, TextRoundTripPreservesPredictions) {
    Rng rng(13);
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    for (int i = 0; i < 60; ++i) {
        std::vector<double> x = {rng.uniform(), rng.uniform()};
        y.push_back(0.3 * x[0] + 0.7 * x[1]);
        X.push_back(std::move(x));
    }
    GBTParams p = GBTParams::c2();
    p.n_estimators = 40;
    GBTModel m = gbt_train(X, y, p);
    std::stringstream buf;
    save_gbt(m, buf);
    GBTModel back = load_gbt(buf);
    for (const auto& x : X) EXPECT_EQ(m.predict(x), back.predict(x));
}
