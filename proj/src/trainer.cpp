#include "noiselens/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "io_util.hpp"
#include "noiselens/error.hpp"
#include "noiselens/parallel.hpp"
#include "noiselens/rng.hpp"

namespace noiselens {

namespace {

constexpr std::uint64_t kInitStream = 31;
constexpr std::uint64_t kShuffleStream = 32;

}  // namespace

void LinearClassifier::logits(std::span<const double> x, std::span<double> out) const {
    for (std::size_t k = 0; k < num_classes(); ++k) {
        const auto w = weights.row(k);
        double z = bias[k];
        for (std::size_t j = 0; j < x.size(); ++j) z += w[j] * x[j];
        out[k] = z;
    }
}

void TrainConfig::validate() const {
    if (epochs < 1) throw Error("epochs must be at least 1");
    if (batch_size < 1) throw Error("batch size must be at least 1");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw Error("learning rate must be nonnegative");
    if (!(weight_decay >= 0.0)) throw Error("weight decay must be nonnegative");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw Error("momentum must lie in [0, 1)");
    if (!(lr_decay > 0.0)) throw Error("lr decay factor must be positive");
}

LinearClassifier init_classifier(std::size_t dim, std::size_t classes, std::uint64_t seed) {
    if (dim < 1 || classes < 1) throw Error("classifier needs positive dimension and class count");
    LinearClassifier clf;
    clf.weights = Matrix(classes, dim);
    clf.bias.assign(classes, 0.0);
    const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
    Rng rng(derive_seed(seed, kInitStream));
    for (double& w : clf.weights.data()) w = rng.uniform(-bound, bound);
    return clf;
}

ClassifierGradient loss_gradient(const LinearClassifier& clf, const Dataset& data, std::span<const std::size_t> indices,
                                 const TransitionMatrix& tm, const ClassPrior& prior, const MarginConfig& margin) {
    const std::size_t c = clf.num_classes();
    const std::size_t d = clf.dim();
    const std::size_t b = indices.size();
    Matrix logits(b, c);
    std::vector<ClassIndex> labels(b);
    for (std::size_t r = 0; r < b; ++r) {
        clf.logits(data.features(indices[r]), logits.row(r));
        labels[r] = data.noisy_label(indices[r]);
    }
    const LossBatch batch = nabm_loss_batch(logits, labels, tm, prior, margin);

    ClassifierGradient grad;
    grad.weights = Matrix(c, d);
    grad.bias.assign(c, 0.0);
    grad.loss = batch.mean_loss();
    const double inv_b = 1.0 / static_cast<double>(b);
    // Fixed row order keeps the reduction deterministic.
    for (std::size_t r = 0; r < b; ++r) {
        const auto x = data.features(indices[r]);
        const auto g = batch.grad_logits.row(r);
        for (std::size_t k = 0; k < c; ++k) {
            const double gk = g[k] * inv_b;
            if (gk == 0.0) continue;
            auto w = grad.weights.row(k);
            for (std::size_t j = 0; j < d; ++j) w[j] += gk * x[j];
            grad.bias[k] += gk;
        }
    }
    return grad;
}

TrainReport train(const Dataset& clean_subset, const TransitionMatrix& tm, const ClassPrior& prior,
                  const MarginConfig& margin, const TrainConfig& cfg) {
    cfg.validate();
    margin.validate();
    const auto started = std::chrono::steady_clock::now();
    const std::size_t n = clean_subset.size();
    if (n == 0) throw Error("training subset is empty");
    const std::size_t c = clean_subset.num_classes();
    const std::size_t d = clean_subset.feature_dim();

    TrainReport report;
    LinearClassifier clf = init_classifier(d, c, cfg.seed);
    Matrix velocity_w(c, d);
    std::vector<double> velocity_b(c, 0.0);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(cfg.seed, kShuffleStream));
    std::vector<double> z(c);

    double lr = cfg.learning_rate;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.lr_step_epochs > 0 && epoch > 0 && epoch % cfg.lr_step_epochs == 0) lr *= cfg.lr_decay;
        if (cfg.shuffle) shuffle_rng.shuffle(std::span<std::size_t>(order));

        double loss_sum = 0.0;
        std::size_t step = 0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size, ++step) {
            const std::size_t stop = std::min(n, start + cfg.batch_size);
            const std::span<const std::size_t> batch(order.data() + start, stop - start);
            const auto grad = loss_gradient(clf, clean_subset, batch, tm, prior, margin);
            if (!std::isfinite(grad.loss)) {
                throw Error("non-finite loss at epoch " + std::to_string(epoch) + " step " + std::to_string(step));
            }
            loss_sum += grad.loss * static_cast<double>(batch.size());

            auto& w = clf.weights.data();
            auto& vw = velocity_w.data();
            const auto& gw = grad.weights.data();
            for (std::size_t k = 0; k < w.size(); ++k) {
                vw[k] = cfg.momentum * vw[k] + gw[k] + cfg.weight_decay * w[k];
                w[k] -= lr * vw[k];
            }
            for (std::size_t k = 0; k < c; ++k) {
                velocity_b[k] = cfg.momentum * velocity_b[k] + grad.bias[k] + cfg.weight_decay * clf.bias[k];
                clf.bias[k] -= lr * velocity_b[k];
            }
            for (double v : w) {
                if (!std::isfinite(v)) {
                    throw Error("non-finite parameter at epoch " + std::to_string(epoch) + " step " +
                                std::to_string(step));
                }
            }
        }
        report.epoch_loss.push_back(loss_sum / static_cast<double>(n));

        std::size_t correct = 0;
        for (std::size_t i = 0; i < n; ++i) {
            clf.logits(clean_subset.features(i), z);
            const auto best = static_cast<ClassIndex>(std::max_element(z.begin(), z.end()) - z.begin());
            correct += best == clean_subset.noisy_label(i) ? 1 : 0;
        }
        report.epoch_accuracy.push_back(static_cast<double>(correct) / static_cast<double>(n));
    }
    report.classifier = std::move(clf);
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return report;
}

Predictions predict(const LinearClassifier& clf, const Dataset& dataset) {
    if (dataset.feature_dim() != clf.dim()) {
        throw Error("classifier expects dimension " + std::to_string(clf.dim()) + ", dataset has " +
                    std::to_string(dataset.feature_dim()));
    }
    const std::size_t n = dataset.size();
    const std::size_t c = clf.num_classes();
    Predictions out;
    out.labels.resize(n);
    out.probabilities = Matrix(n, c);
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        std::vector<double> z(c);
        for (std::size_t i = begin; i < end; ++i) {
            clf.logits(dataset.features(i), z);
            // max_element returns the first maximum: ties go to the lowest index.
            const auto best = std::max_element(z.begin(), z.end());
            out.labels[i] = static_cast<ClassIndex>(best - z.begin());
            const double top = *best;
            auto p = out.probabilities.row(i);
            double total = 0.0;
            for (std::size_t k = 0; k < c; ++k) {
                p[k] = std::exp(z[k] - top);
                total += p[k];
            }
            for (double& v : p) v /= total;
        }
    });
    return out;
}

void save_classifier(const LinearClassifier& clf, const std::filesystem::path& path, FileEncoding encoding) {
    auto out = io::open_output(path, encoding == FileEncoding::binary);
    const std::size_t c = clf.num_classes();
    const std::size_t d = clf.dim();
    if (encoding == FileEncoding::binary) {
        io::BinaryWriter w(out, io::BinaryKind::classifier);
        w.put<std::uint32_t>(static_cast<std::uint32_t>(c));
        w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
        for (double v : clf.weights.data()) w.put<double>(v);
        for (double v : clf.bias) w.put<double>(v);
    } else {
        out << "#noiselens-clf v1 C=" << c << " D=" << d << '\n';
        for (std::size_t k = 0; k < c; ++k) out << io::join_doubles(clf.weights.row(k).data(), d) << '\n';
        out << io::join_doubles(clf.bias.data(), c) << '\n';
    }
    if (!out) throw Error("failed writing " + path.string());
}

LinearClassifier load_classifier(const std::filesystem::path& path) {
    const bool binary = io::is_binary_file(path);
    auto in = io::open_input(path, binary);
    LinearClassifier clf;
    if (binary) {
        io::BinaryReader r(in, io::BinaryKind::classifier);
        const auto c = r.get<std::uint32_t>();
        const auto d = r.get<std::uint32_t>();
        clf.weights = Matrix(c, d);
        for (double& v : clf.weights.data()) v = r.get<double>();
        clf.bias.resize(c);
        for (double& v : clf.bias) v = r.get<double>();
        return clf;
    }
    std::string line;
    if (!std::getline(in, line)) throw Error("empty classifier file");
    const auto header = io::parse_header(line, "noiselens-clf");
    const auto c = static_cast<std::size_t>(header.int_field("C"));
    const auto d = static_cast<std::size_t>(header.int_field("D"));
    if (c < 1 || d < 1) throw Error("invalid classifier header values");
    clf.weights = Matrix(c, d);
    io::LineReader reader(in);
    for (std::size_t k = 0; k <= c; ++k) {
        if (!reader.next(line)) throw Error("classifier file is truncated");
        const auto fields = io::split(line, ',');
        const std::size_t width = k < c ? d : c;
        if (fields.size() != width) throw Error("malformed classifier row", reader.record());
        for (std::size_t j = 0; j < width; ++j) {
            const double v = io::parse_double(fields[j], reader.record());
            if (k < c) {
                clf.weights(k, j) = v;
            } else {
                clf.bias.push_back(v);
            }
        }
    }
    return clf;
}

}  // namespace noiselens
