#include <gtest/gtest.h>

#include <random>

#include "noiselens/error.hpp"
#include "noiselens/eval_report.hpp"
#include "noiselens/noise_lab.hpp"
#include "noiselens/surrogate.hpp"
#include "support.hpp"

using namespace noiselens;

TEST(Eval, AccuracyAndTopK) {
    const std::vector<ClassIndex> pred = {0, 1, 2, 2};
    const std::vector<ClassIndex> ref = {0, 1, 1, 2};
    EXPECT_DOUBLE_EQ(accuracy(pred, ref), 0.75);
    EXPECT_THROW(accuracy(pred, std::vector<ClassIndex>{0}), Error);
    Matrix p(2, 3);
    p(0, 0) = 0.5;
    p(0, 1) = 0.3;
    p(0, 2) = 0.2;
    p(1, 0) = 0.4;
    p(1, 1) = 0.2;
    p(1, 2) = 0.4;
    const std::vector<ClassIndex> truth = {2, 2};
    EXPECT_DOUBLE_EQ(top_k_accuracy(p, truth, 1), 0.0);
    EXPECT_DOUBLE_EQ(top_k_accuracy(p, truth, 2), 0.5);
    EXPECT_DOUBLE_EQ(top_k_accuracy(p, truth, 3), 1.0);
    const auto recall = per_class_recall(pred, ref, 3);
    EXPECT_DOUBLE_EQ(recall[1], 0.5);
    EXPECT_DOUBLE_EQ(recall[2], 1.0);
}

TEST(Eval, HistogramMatchesBruteForce) {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v = {0.0, 1.0, 0.1, 0.2, 0.3, 0.7, 0.9, 0.30000000000000004, 0.29999999999999999};
    for (int i = 0; i < 5000; ++i) v.push_back(u(gen));
    const auto h = confidence_histogram(v);
    std::array<std::size_t, 10> expected{};
    for (double x : v) {
        std::size_t bin = 0;
        for (std::size_t k = 1; k < 10; ++k) {
            if (x >= static_cast<double>(k) / 10.0) bin = k;
        }
        ++expected[bin];
    }
    EXPECT_EQ(h.counts, expected);
    EXPECT_THROW(confidence_histogram(std::vector<double>{1.5}), Error);
}

TEST(Eval, SweepIsMonotoneAndSkipsEmpty) {
    const BlobSpec spec{3, 60, 6, 2.0, 2};
    NoiseSpec ns;
    ns.rate = 0.4;
    ns.seed = 3;
    const auto noisy = inject_noise(make_blobs(spec), ns);
    EmbeddingTable table{noisy.dataset.ids(), noisy.dataset.feature_matrix()};
    const auto scores = cosine_softmax_score(table, ClassEmbeddingBank(blob_centers(spec), "c"), {});
    TrainConfig tc;
    tc.epochs = 2;
    const std::vector<double> rho = {0.1, 0.5, 0.9, 1.0};
    const auto sweep = threshold_sweep(noisy.dataset, scores, rho,
                                       SweepBundle{MarginConfig::shallow(), tc, make_blob_test_set(spec, 9, 20)});
    ASSERT_EQ(sweep.points.size(), 4u);
    for (std::size_t k = 1; k < 4; ++k) EXPECT_LE(sweep.points[k].selected_count, sweep.points[k - 1].selected_count);
    EXPECT_TRUE(sweep.points[3].skipped);
    EXPECT_FALSE(sweep.points[0].skipped);
    EXPECT_TRUE(sweep.points[0].test_accuracy.has_value());
    EXPECT_TRUE(sweep.points[0].precision.has_value());
}

TEST(Eval, RenderFormats) {
    ReportRecord r{"test", {}};
    r.add("top1", 0.5).add("samples", std::size_t{4});
    const std::vector<ReportRecord> records = {r};
    EXPECT_EQ(render(records, ReportFormat::records), "kind=test top1=0.5 samples=4\n");
    const auto table = render(records, ReportFormat::table);
    EXPECT_NE(table.find("[test]"), std::string::npos);
    EXPECT_NE(table.find("top1"), std::string::npos);
    EXPECT_THROW(parse_report_format("json"), Error);
}
