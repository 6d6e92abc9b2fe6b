#include <gtest/gtest.h>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <random>

#include "noiselens/error.hpp"
#include "noiselens/surrogate.hpp"
#include "support.hpp"

using namespace noiselens;
using big = boost::multiprecision::cpp_bin_float_50;

namespace {

Matrix random_matrix(std::mt19937_64& gen, std::size_t r, std::size_t c) {
    std::normal_distribution<double> n;
    Matrix m(r, c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) m(i, j) = n(gen);
    return m;
}

std::vector<SampleId> iota_ids(std::size_t n) {
    std::vector<SampleId> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<SampleId>(i);
    return ids;
}

// softmax(cos(v, t_k) / tau) evaluated without any stabilization.
std::vector<double> reference_row(std::span<const double> v, const Matrix& bank, double tau) {
    const std::size_t c = bank.rows();
    std::vector<big> e(c);
    big vn = 0;
    for (double x : v) vn += big(x) * big(x);
    vn = sqrt(vn);
    big total = 0;
    for (std::size_t k = 0; k < c; ++k) {
        big dot = 0, tn = 0;
        for (std::size_t j = 0; j < v.size(); ++j) {
            dot += big(v[j]) * big(bank(k, j));
            tn += big(bank(k, j)) * big(bank(k, j));
        }
        e[k] = exp(dot / (vn * sqrt(tn)) / big(tau));
        total += e[k];
    }
    std::vector<double> out(c);
    for (std::size_t k = 0; k < c; ++k) out[k] = (e[k] / total).convert_to<double>();
    return out;
}

}  // namespace

TEST(Surrogate, MatchesHighPrecisionReference) {
    std::mt19937_64 gen(5);
    const ClassEmbeddingBank bank(random_matrix(gen, 7, 12), "photo");
    const EmbeddingTable table{iota_ids(50), random_matrix(gen, 50, 12)};
    for (double tau : {0.01, 0.1, 1.0}) {
        const auto scores = cosine_softmax_score(table, bank, {tau});
        for (std::size_t i = 0; i < 50; ++i) {
            const auto ref = reference_row(table.vectors.row(i), bank.embeddings(), tau);
            for (std::size_t k = 0; k < 7; ++k) EXPECT_NEAR(scores(i, k), ref[k], 1e-12);
        }
    }
}

TEST(Surrogate, LowTemperatureNeverOverflows) {
    std::mt19937_64 gen(9);
    const ClassEmbeddingBank bank(random_matrix(gen, 4, 3), "p");
    const EmbeddingTable table{iota_ids(20), random_matrix(gen, 20, 3)};
    const auto scores = cosine_softmax_score(table, bank, {1e-4});
    for (std::size_t i = 0; i < 20; ++i) {
        double total = 0.0;
        for (double v : scores.row(i)) {
            EXPECT_TRUE(std::isfinite(v));
            total += v;
        }
        EXPECT_NEAR(total, 1.0, 1e-12);
    }
}

TEST(Surrogate, ZeroNormAndShapeErrors) {
    Matrix bank_values(2, 2);
    bank_values(0, 0) = 1.0;
    EXPECT_THROW(ClassEmbeddingBank(bank_values, "p"), Error);
    bank_values(1, 1) = 1.0;
    EXPECT_THROW(ClassEmbeddingBank(bank_values, "two words"), Error);
    const ClassEmbeddingBank bank(bank_values, "p");
    EmbeddingTable zero{iota_ids(1), Matrix(1, 2)};
    EXPECT_THROW(cosine_softmax_score(zero, bank, {}), Error);
    EmbeddingTable wide{iota_ids(1), Matrix(1, 3, 1.0)};
    EXPECT_THROW(cosine_softmax_score(wide, bank, {}), Error);
    EmbeddingTable ok{iota_ids(1), Matrix(1, 2, 1.0)};
    EXPECT_THROW(cosine_softmax_score(ok, bank, {0.0}), Error);
}

TEST(Surrogate, SourcesAgreeThroughFiles) {
    testing_support::TempDir dir("surrogate");
    std::mt19937_64 gen(2);
    std::vector<Sample> samples;
    const auto feats = random_matrix(gen, 10, 4);
    for (std::size_t i = 0; i < 10; ++i) {
        const auto r = feats.row(i);
        samples.push_back({static_cast<SampleId>(100 + i), {r.begin(), r.end()}, static_cast<ClassIndex>(i % 3), {}});
    }
    const Dataset data(LabelSpace(3), samples);
    const ClassEmbeddingBank bank(random_matrix(gen, 3, 4), "a");
    save_bank(bank, dir / "bank.txt");
    const auto loaded = load_bank(dir / "bank.txt");
    EXPECT_EQ(loaded.embeddings(), bank.embeddings());
    EXPECT_EQ(loaded.prompt_id(), "a");

    const auto direct = score_with_surrogate(data, CosineScorerSource{bank, {}, std::nullopt});
    save_scores(direct, dir / "s.txt");
    const auto via_file = score_with_surrogate(data, ScoreFileSource{dir / "s.txt"});
    EXPECT_EQ(direct, via_file);
    EXPECT_EQ(direct.sample_ids(), data.ids());

    EmbeddingTable other{data.ids(), random_matrix(gen, 10, 4)};
    const auto separate = score_with_surrogate(data, CosineScorerSource{bank, {}, other});
    EXPECT_EQ(separate, cosine_softmax_score(other, bank, {}));
    other.ids[3] = 7;
    EXPECT_THROW(score_with_surrogate(data, CosineScorerSource{bank, {}, other}), Error);
}
