#include <gtest/gtest.h>

#include <cmath>

#include "noiselens/error.hpp"
#include "noiselens/noise_lab.hpp"
#include "noiselens/rng.hpp"
#include "support.hpp"

using namespace noiselens;

TEST(Rng, ReproducibleStreams) {
    Rng a(42), b(42), c(derive_seed(42, 1));
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
    EXPECT_NE(Rng(42).next_u64(), c.next_u64());
    EXPECT_NE(derive_seed(42, 1), derive_seed(42, 2));
}

TEST(Rng, UniformAndNormalMoments) {
    Rng r(7);
    double s = 0.0, s2 = 0.0, u = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double x = r.normal();
        s += x;
        s2 += x * x;
        const double v = r.uniform();
        ASSERT_GE(v, 0.0);
        ASSERT_LT(v, 1.0);
        u += v;
    }
    EXPECT_NEAR(s / n, 0.0, 0.01);
    EXPECT_NEAR(s2 / n, 1.0, 0.01);
    EXPECT_NEAR(u / n, 0.5, 0.005);
    std::vector<int> hits(7, 0);
    for (int i = 0; i < 70000; ++i) ++hits[r.index(7)];
    for (int h : hits) EXPECT_NEAR(h, 10000, 400);
}

TEST(Blobs, ShapeIdsAndDeterminism) {
    const BlobSpec spec{3, 10, 4, 5.0, 9};
    const auto a = make_blobs(spec);
    EXPECT_EQ(a.size(), 30u);
    EXPECT_EQ(a.feature_dim(), 4u);
    EXPECT_EQ(a.id(29), 29);
    EXPECT_EQ(a.ground_truth()[10], 1u);
    EXPECT_EQ(a.noisy_labels(), a.ground_truth());
    EXPECT_EQ(a, make_blobs(spec));
    EXPECT_FALSE(a == make_blobs(BlobSpec{3, 10, 4, 5.0, 10}));
    const auto test = make_blob_test_set(spec, 1, 5);
    EXPECT_EQ(test.size(), 15u);
    EXPECT_THROW(make_blobs(BlobSpec{1, 10, 4, 5.0, 0}), Error);
    EXPECT_THROW(make_blobs(BlobSpec{3, 10, 4, 0.0, 0}), Error);
}

TEST(Blobs, CentersBeyondDimension) {
    const auto centers = blob_centers(BlobSpec{6, 1, 3, 2.0, 4});
    for (std::size_t k = 0; k < 6; ++k) {
        double n2 = 0.0;
        for (double v : centers.row(k)) n2 += v * v;
        EXPECT_NEAR(std::sqrt(n2), 2.0, 1e-12);
    }
    EXPECT_EQ(centers(0, 0), 2.0);
    EXPECT_EQ(centers(1, 1), 2.0);
}

TEST(Noise, SymmetricRecordConsistent) {
    const auto clean = make_blobs(BlobSpec{5, 400, 2, 3.0, 1});
    NoiseSpec spec;
    spec.rate = 0.3;
    spec.seed = 5;
    const auto noisy = inject_noise(clean, spec);
    std::size_t flipped = 0;
    for (std::size_t i = 0; i < clean.size(); ++i) flipped += noisy.dataset.noisy_label(i) != clean.ground_truth()[i];
    EXPECT_EQ(noisy.record.flipped_ids.size(), flipped);
    EXPECT_DOUBLE_EQ(noisy.record.realized_rate, static_cast<double>(flipped) / clean.size());
    EXPECT_EQ(noisy.dataset.ground_truth(), clean.ground_truth());
    for (std::size_t i = 0; i < 5; ++i) {
        double row = 0.0;
        for (double v : noisy.record.realized_transition.row(i)) row += v;
        EXPECT_NEAR(row, 1.0, 1e-12);
    }
    EXPECT_EQ(inject_noise(clean, spec).dataset, noisy.dataset);
}

TEST(Noise, RateBoundaries) {
    const auto clean = make_blobs(BlobSpec{3, 50, 2, 3.0, 1});
    NoiseSpec zero;
    zero.rate = 0.0;
    EXPECT_TRUE(inject_noise(clean, zero).record.flipped_ids.empty());
    NoiseSpec bad;
    bad.rate = 1.5;
    EXPECT_THROW(inject_noise(clean, bad), Error);
    NoiseSpec asym;
    asym.kind = NoiseKind::asymmetric;
    asym.rate = 1.0;
    asym.pair_map = {{0, 1}};
    const auto all = inject_noise(clean, asym);
    EXPECT_EQ(all.record.flipped_ids.size(), 50u);
    asym.pair_map = {{0, 0}};
    EXPECT_THROW(inject_noise(clean, asym), Error);
    asym.pair_map = {{0, 7}};
    EXPECT_THROW(inject_noise(clean, asym), Error);
    asym.pair_map.clear();
    EXPECT_THROW(inject_noise(clean, asym), Error);
    const auto unlabeled = Dataset(LabelSpace(2), {{0, {1.0}, 0, {}}});
    EXPECT_THROW(inject_noise(unlabeled, zero), Error);
}

TEST(Noise, PairMapParsing) {
    const auto m = parse_pair_map("0:1, 2:3");
    EXPECT_EQ(m.at(0), 1u);
    EXPECT_EQ(m.at(2), 3u);
    EXPECT_EQ(parse_pair_map(format_pair_map(m)), m);
    EXPECT_TRUE(parse_pair_map("").empty());
    EXPECT_THROW(parse_pair_map("0-1"), Error);
    EXPECT_THROW(parse_pair_map("0:1,0:2"), Error);
}

TEST(Noise, InstanceDependentDependsOnFeatures) {
    const auto clean = make_blobs(BlobSpec{4, 500, 8, 2.0, 3});
    NoiseSpec spec;
    spec.kind = NoiseKind::instance_dependent;
    spec.rate = 0.3;
    spec.seed = 17;
    const auto noisy = inject_noise(clean, spec);
    EXPECT_NEAR(noisy.record.realized_rate, 0.3, 0.05);
    spec.idn_sd = 0.0;
    spec.rate = 0.0;
    EXPECT_TRUE(inject_noise(clean, spec).record.flipped_ids.empty());
    spec.idn_lower = 0.5;
    spec.idn_upper = 0.2;
    EXPECT_THROW(inject_noise(clean, spec), Error);
}

TEST(Noise, OracleScores) {
    const auto clean = make_blobs(BlobSpec{4, 3, 2, 3.0, 1});
    const auto s = oracle_scores(clean, 0.7);
    EXPECT_DOUBLE_EQ(s(0, 0), 0.7);
    EXPECT_DOUBLE_EQ(s(0, 1), 0.1);
    EXPECT_THROW(oracle_scores(clean, 0.2), Error);
}

TEST(Noise, CorruptionRoundTripAndQuality) {
    testing_support::TempDir dir("corrupt");
    const auto clean = make_blobs(BlobSpec{3, 100, 2, 3.0, 1});
    NoiseSpec spec;
    spec.rate = 0.5;
    spec.seed = 2;
    const auto noisy = inject_noise(clean, spec);
    save_corruption(noisy.record, noisy.dataset.size(), dir / "c.txt");
    const auto back = load_corruption(dir / "c.txt");
    EXPECT_EQ(back.flipped_ids, noisy.record.flipped_ids);
    EXPECT_EQ(back.realized_rate, noisy.record.realized_rate);
    EXPECT_EQ(back.realized_transition, noisy.record.realized_transition);

    const auto mask = select_by_confidence(noisy.dataset, oracle_scores(noisy.dataset), 0.5);
    const auto q = selection_quality(mask, noisy.dataset, noisy.record);
    EXPECT_EQ(q.precision, 1.0);
    EXPECT_EQ(q.recall, 1.0);
    EXPECT_EQ(q.selected, clean.size() - noisy.record.flipped_ids.size());
}
