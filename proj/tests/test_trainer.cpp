#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "noiselens/error.hpp"
#include "noiselens/noise_lab.hpp"
#include "noiselens/parallel.hpp"
#include "noiselens/trainer.hpp"
#include "support.hpp"

using namespace noiselens;

namespace {

struct Setup {
    Dataset data;
    TransitionMatrix tm;
    ClassPrior prior;
};

Setup blob_setup(std::size_t per_class = 100) {
    auto data = make_blobs(BlobSpec{3, per_class, 4, 3.0, 21});
    auto tm = estimate_transition_matrix(data, oracle_scores(data, 0.8));
    auto prior = compute_class_prior(data, data.label_space());
    return {std::move(data), std::move(tm), std::move(prior)};
}

}  // namespace

TEST(Trainer, InitIsBoundedAndSeeded) {
    const auto a = init_classifier(16, 4, 3);
    EXPECT_EQ(a, init_classifier(16, 4, 3));
    EXPECT_FALSE(a == init_classifier(16, 4, 4));
    for (double w : a.weights.data()) EXPECT_LE(std::abs(w), 0.25);
    for (double b : a.bias) EXPECT_EQ(b, 0.0);
}

TEST(Trainer, ParameterGradientMatchesFiniteDifference) {
    const auto s = blob_setup(10);
    auto clf = init_classifier(4, 3, 1);
    std::vector<std::size_t> idx(s.data.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (const auto& margin : {MarginConfig::shallow(), MarginConfig::deep(), MarginConfig::cross_entropy()}) {
        const auto g = loss_gradient(clf, s.data, idx, s.tm, s.prior, margin);
        const double h = 1e-6;
        for (std::size_t k = 0; k < clf.weights.data().size(); ++k) {
            auto up = clf, dn = clf;
            up.weights.data()[k] += h;
            dn.weights.data()[k] -= h;
            const double fd = (loss_gradient(up, s.data, idx, s.tm, s.prior, margin).loss -
                               loss_gradient(dn, s.data, idx, s.tm, s.prior, margin).loss) / (2 * h);
            EXPECT_NEAR(g.weights.data()[k], fd, 1e-7);
        }
        for (std::size_t k = 0; k < clf.bias.size(); ++k) {
            auto up = clf, dn = clf;
            up.bias[k] += h;
            dn.bias[k] -= h;
            const double fd = (loss_gradient(up, s.data, idx, s.tm, s.prior, margin).loss -
                               loss_gradient(dn, s.data, idx, s.tm, s.prior, margin).loss) / (2 * h);
            EXPECT_NEAR(g.bias[k], fd, 1e-7);
        }
    }
}

TEST(Trainer, LearnsSeparableBlobsDeterministically) {
    const auto s = blob_setup();
    TrainConfig cfg;
    cfg.batch_size = 32;
    cfg.seed = 4;
    const auto a = train(s.data, s.tm, s.prior, MarginConfig::shallow(), cfg);
    const auto b = train(s.data, s.tm, s.prior, MarginConfig::shallow(), cfg);
    EXPECT_EQ(a.classifier, b.classifier);
    EXPECT_EQ(a.epoch_loss, b.epoch_loss);
    EXPECT_LT(a.epoch_loss.back(), a.epoch_loss.front());
    EXPECT_GT(a.epoch_accuracy.back(), 0.95);
    const auto pred = predict(a.classifier, s.data);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < s.data.size(); ++i) hits += pred.labels[i] == s.data.ground_truth()[i];
    EXPECT_GT(hits, 0.95 * s.data.size());
}

TEST(Trainer, ThreadCountDoesNotChangeResult) {
    const auto s = blob_setup(400);
    TrainConfig cfg;
    cfg.epochs = 3;
    set_max_threads(1);
    const auto serial = train(s.data, s.tm, s.prior, MarginConfig::shallow(), cfg);
    set_max_threads(6);
    const auto parallel = train(s.data, s.tm, s.prior, MarginConfig::shallow(), cfg);
    set_max_threads(0);
    EXPECT_EQ(serial.classifier, parallel.classifier);
}

TEST(Trainer, PartialLastBatchAndStepDecay) {
    const auto s = blob_setup(7);
    TrainConfig cfg;
    cfg.batch_size = 8;
    cfg.epochs = 4;
    cfg.lr_step_epochs = 2;
    const auto r = train(s.data, s.tm, s.prior, MarginConfig::shallow(), cfg);
    EXPECT_EQ(r.epoch_loss.size(), 4u);
    cfg.batch_size = 0;
    EXPECT_THROW(train(s.data, s.tm, s.prior, MarginConfig::shallow(), cfg), Error);
}

TEST(Trainer, DivergenceIsReported) {
    const auto s = blob_setup();
    TrainConfig cfg;
    cfg.learning_rate = 1e300;
    cfg.momentum = 0.0;
    try {
        train(s.data, s.tm, s.prior, MarginConfig::cross_entropy(), cfg);
        FAIL() << "expected divergence";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("non-finite"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
    }
}

TEST(Trainer, PredictTiesGoToLowestIndex) {
    LinearClassifier clf{Matrix(3, 2), {0.0, 0.0, 0.0}};
    const Dataset d(LabelSpace(3), {{0, {1.0, 2.0}, 0, {}}});
    EXPECT_EQ(predict(clf, d).labels[0], 0u);
    clf.bias = {0.0, 1.0, 1.0};
    EXPECT_EQ(predict(clf, d).labels[0], 1u);
    const Dataset wrong(LabelSpace(3), {{0, {1.0}, 0, {}}});
    EXPECT_THROW(predict(clf, wrong), Error);
}

TEST(Trainer, CheckpointRoundTrip) {
    testing_support::TempDir dir("clf");
    const auto clf = init_classifier(5, 3, 8);
    save_classifier(clf, dir / "c.txt");
    save_classifier(clf, dir / "c.bin", FileEncoding::binary);
    EXPECT_EQ(load_classifier(dir / "c.txt"), clf);
    EXPECT_EQ(load_classifier(dir / "c.bin"), clf);
}
