#include "noiselens/noise_lab.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "io_util.hpp"
#include "noiselens/error.hpp"
#include "noiselens/rng.hpp"

namespace noiselens {

namespace {

// Stream tags for derive_seed. Centers, samples and noise never share a stream.
constexpr std::uint64_t kCenterStream = 11;
constexpr std::uint64_t kSampleStream = 12;
constexpr std::uint64_t kTestStream = 13;
constexpr std::uint64_t kNoiseStream = 21;
constexpr std::uint64_t kProjectionStream = 22;

Dataset draw_blobs(const BlobSpec& spec, const Matrix& centers, std::uint64_t stream_seed, std::size_t per_class) {
    const std::size_t c = spec.num_classes;
    const std::size_t n = c * per_class;
    Rng rng(stream_seed);
    Matrix features(n, spec.dim);
    std::vector<SampleId> ids(n);
    std::vector<ClassIndex> labels(n);
    std::size_t i = 0;
    for (std::size_t k = 0; k < c; ++k) {
        for (std::size_t r = 0; r < per_class; ++r, ++i) {
            ids[i] = static_cast<SampleId>(i);
            labels[i] = static_cast<ClassIndex>(k);
            auto row = features.row(i);
            for (std::size_t j = 0; j < spec.dim; ++j) row[j] = centers(k, j) + rng.normal();
        }
    }
    auto truth = labels;
    return Dataset(LabelSpace(c), std::move(ids), std::move(features), std::move(labels), std::move(truth));
}

Matrix realized_transition(const std::vector<ClassIndex>& truth, const std::vector<ClassIndex>& noisy,
                           std::size_t c) {
    Matrix m(c, c);
    std::vector<std::size_t> rows(c, 0);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        m(truth[i], noisy[i]) += 1.0;
        ++rows[truth[i]];
    }
    for (std::size_t k = 0; k < c; ++k) {
        if (rows[k] == 0) continue;
        for (double& v : m.row(k)) v /= static_cast<double>(rows[k]);
    }
    return m;
}

NoisyDataset finish(const Dataset& dataset, std::vector<ClassIndex> noisy) {
    const auto& truth = dataset.ground_truth();
    CorruptionRecord record;
    for (std::size_t i = 0; i < noisy.size(); ++i) {
        if (noisy[i] != truth[i]) record.flipped_ids.push_back(dataset.id(i));
    }
    record.realized_rate = static_cast<double>(record.flipped_ids.size()) / static_cast<double>(dataset.size());
    record.realized_transition = realized_transition(truth, noisy, dataset.num_classes());
    return {dataset.with_noisy_labels(std::move(noisy)), std::move(record)};
}

void require_ground_truth(const Dataset& dataset) {
    if (!dataset.has_ground_truth()) throw Error("noise injection needs a dataset with ground-truth labels");
}

double truncated_normal(Rng& rng, double mean, double sd, double lo, double hi) {
    if (sd == 0.0) return std::clamp(mean, lo, hi);
    for (int attempt = 0; attempt < 100000; ++attempt) {
        const double x = rng.normal(mean, sd);
        if (x >= lo && x <= hi) return x;
    }
    throw Error("truncated normal: acceptance region has negligible mass");
}

}  // namespace

void BlobSpec::validate() const {
    if (num_classes < 2) throw Error("blobs need at least 2 classes");
    if (per_class < 1) throw Error("blobs need at least 1 sample per class");
    if (dim < 2) throw Error("blob dimension must be at least 2");
    if (!(separation > 0.0) || !std::isfinite(separation)) throw Error("blob separation must be positive");
}

Matrix blob_centers(const BlobSpec& spec) {
    spec.validate();
    Matrix centers(spec.num_classes, spec.dim);
    Rng rng(derive_seed(spec.seed, kCenterStream));
    for (std::size_t k = 0; k < spec.num_classes; ++k) {
        auto row = centers.row(k);
        if (k < spec.dim) {
            row[k] = spec.separation;
            continue;
        }
        double norm = 0.0;
        do {
            norm = 0.0;
            for (double& v : row) {
                v = rng.normal();
                norm += v * v;
            }
            norm = std::sqrt(norm);
        } while (norm < 1e-12);
        for (double& v : row) v *= spec.separation / norm;
    }
    return centers;
}

Dataset make_blobs(const BlobSpec& spec) {
    const Matrix centers = blob_centers(spec);
    return draw_blobs(spec, centers, derive_seed(spec.seed, kSampleStream), spec.per_class);
}

Dataset make_blobs(std::size_t num_classes, std::size_t per_class, std::size_t dim, double separation,
                   std::uint64_t seed) {
    return make_blobs(BlobSpec{num_classes, per_class, dim, separation, seed});
}

Dataset make_blob_test_set(const BlobSpec& spec, std::uint64_t test_seed, std::size_t per_class) {
    if (per_class < 1) throw Error("test set needs at least 1 sample per class");
    const Matrix centers = blob_centers(spec);
    return draw_blobs(spec, centers, derive_seed(test_seed, kTestStream), per_class);
}

std::string to_string(NoiseKind kind) {
    switch (kind) {
        case NoiseKind::none: return "none";
        case NoiseKind::symmetric: return "sym";
        case NoiseKind::asymmetric: return "asym";
        case NoiseKind::instance_dependent: return "idn";
    }
    return "unknown";
}

NoiseKind parse_noise_kind(const std::string& name) {
    if (name == "none") return NoiseKind::none;
    if (name == "sym" || name == "symmetric") return NoiseKind::symmetric;
    if (name == "asym" || name == "asymmetric") return NoiseKind::asymmetric;
    if (name == "idn" || name == "instance" || name == "instance-dependent") return NoiseKind::instance_dependent;
    throw Error("unknown noise kind '" + name + "'");
}

void NoiseSpec::validate(std::size_t num_classes) const {
    if (!(rate >= 0.0 && rate <= 1.0)) throw Error("noise rate must lie in [0, 1]");
    if (kind == NoiseKind::symmetric && rate >= 1.0) throw Error("symmetric noise rate must be below 1");
    if (kind == NoiseKind::asymmetric) {
        if (pair_map.empty()) throw Error("asymmetric noise needs a pair map");
        for (auto [from, to] : pair_map) {
            if (from >= num_classes || to >= num_classes) throw Error("pair map class out of range");
            if (from == to) throw Error("pair map entry maps class " + std::to_string(from) + " to itself");
        }
    }
    if (kind == NoiseKind::instance_dependent) {
        if (!(idn_sd >= 0.0)) throw Error("instance-dependent sd must be nonnegative");
        if (!(idn_lower >= 0.0 && idn_lower <= idn_upper && idn_upper <= 1.0)) {
            throw Error("instance-dependent truncation bounds must satisfy 0 <= lo <= hi <= 1");
        }
    }
}

std::map<ClassIndex, ClassIndex> parse_pair_map(const std::string& text) {
    std::map<ClassIndex, ClassIndex> pairs;
    if (text.empty()) return pairs;
    for (auto item : io::split(text, ',')) {
        const auto parts = io::split(item, ':');
        if (parts.size() != 2) throw Error("malformed pair '" + std::string(item) + "', expected from:to");
        const auto from = io::parse_int(parts[0], 0);
        const auto to = io::parse_int(parts[1], 0);
        if (from < 0 || to < 0) throw Error("pair map classes must be nonnegative");
        if (!pairs.emplace(static_cast<ClassIndex>(from), static_cast<ClassIndex>(to)).second) {
            throw Error("class " + std::to_string(from) + " appears twice in pair map");
        }
    }
    return pairs;
}

std::string format_pair_map(const std::map<ClassIndex, ClassIndex>& pairs) {
    std::string s;
    for (auto [from, to] : pairs) {
        if (!s.empty()) s += ',';
        s += std::to_string(from) + ":" + std::to_string(to);
    }
    return s;
}

NoisyDataset inject_symmetric(const Dataset& dataset, const NoiseSpec& spec) {
    require_ground_truth(dataset);
    if (spec.kind != NoiseKind::symmetric) throw Error("inject_symmetric needs a symmetric noise spec");
    spec.validate(dataset.num_classes());
    Rng rng(derive_seed(spec.seed, kNoiseStream));
    const auto& truth = dataset.ground_truth();
    std::vector<ClassIndex> noisy(truth);
    for (auto& y : noisy) {
        if (rng.uniform() < spec.rate) y = static_cast<ClassIndex>(rng.index(dataset.num_classes()));
    }
    return finish(dataset, std::move(noisy));
}

NoisyDataset inject_asymmetric(const Dataset& dataset, const NoiseSpec& spec) {
    require_ground_truth(dataset);
    if (spec.kind != NoiseKind::asymmetric) throw Error("inject_asymmetric needs an asymmetric noise spec");
    spec.validate(dataset.num_classes());
    Rng rng(derive_seed(spec.seed, kNoiseStream));
    const auto& truth = dataset.ground_truth();
    std::vector<ClassIndex> noisy(truth);
    for (std::size_t i = 0; i < noisy.size(); ++i) {
        const bool flip = rng.uniform() < spec.rate;
        const auto it = spec.pair_map.find(truth[i]);
        if (flip && it != spec.pair_map.end()) noisy[i] = it->second;
    }
    return finish(dataset, std::move(noisy));
}

NoisyDataset inject_instance_dependent(const Dataset& dataset, const NoiseSpec& spec) {
    require_ground_truth(dataset);
    if (spec.kind != NoiseKind::instance_dependent) throw Error("inject_instance_dependent needs an idn spec");
    spec.validate(dataset.num_classes());
    const std::size_t c = dataset.num_classes();
    const std::size_t d = dataset.feature_dim();

    Rng projection_rng(derive_seed(spec.seed, kProjectionStream));
    Matrix w(c, d);
    for (double& v : w.data()) v = projection_rng.normal();

    Rng rng(derive_seed(spec.seed, kNoiseStream));
    const auto& truth = dataset.ground_truth();
    std::vector<ClassIndex> noisy(truth);
    std::vector<double> probs(c);
    for (std::size_t i = 0; i < noisy.size(); ++i) {
        const double budget = truncated_normal(rng, spec.rate, spec.idn_sd, spec.idn_lower, spec.idn_upper);
        const ClassIndex y = truth[i];
        const auto x = dataset.features(i);
        double top = -INFINITY;
        for (std::size_t k = 0; k < c; ++k) {
            if (k == y) continue;
            double dot = 0.0;
            for (std::size_t j = 0; j < d; ++j) dot += x[j] * w(k, j);
            probs[k] = dot;
            top = std::max(top, dot);
        }
        double total = 0.0;
        for (std::size_t k = 0; k < c; ++k) {
            if (k == y) continue;
            probs[k] = std::exp(probs[k] - top);
            total += probs[k];
        }
        for (std::size_t k = 0; k < c; ++k) probs[k] = (k == y) ? 1.0 - budget : budget * probs[k] / total;

        const double u = rng.uniform();
        double cumulative = 0.0;
        ClassIndex drawn = y;
        for (std::size_t k = 0; k < c; ++k) {
            if (probs[k] <= 0.0) continue;
            cumulative += probs[k];
            drawn = static_cast<ClassIndex>(k);
            if (u < cumulative) break;
        }
        noisy[i] = drawn;
    }
    return finish(dataset, std::move(noisy));
}

NoisyDataset inject_noise(const Dataset& dataset, const NoiseSpec& spec) {
    switch (spec.kind) {
        case NoiseKind::symmetric: return inject_symmetric(dataset, spec);
        case NoiseKind::asymmetric: return inject_asymmetric(dataset, spec);
        case NoiseKind::instance_dependent: return inject_instance_dependent(dataset, spec);
        case NoiseKind::none: break;
    }
    require_ground_truth(dataset);
    return finish(dataset, dataset.noisy_labels());
}

Matrix symmetric_noise_matrix(std::size_t num_classes, double rate) {
    const double c = static_cast<double>(num_classes);
    Matrix m(num_classes, num_classes, rate / c);
    for (std::size_t k = 0; k < num_classes; ++k) m(k, k) = 1.0 - rate * (c - 1.0) / c;
    return m;
}

ScoreMatrix oracle_scores(const Dataset& dataset, double confidence) {
    const std::size_t c = dataset.num_classes();
    if (!(confidence >= 1.0 / static_cast<double>(c) && confidence <= 1.0)) {
        throw Error("oracle confidence must lie in [1/C, 1]");
    }
    const auto& truth = dataset.ground_truth();
    const double rest = (1.0 - confidence) / static_cast<double>(c - 1);
    Matrix values(dataset.size(), c, rest);
    for (std::size_t i = 0; i < dataset.size(); ++i) values(i, truth[i]) = confidence;
    return ScoreMatrix::from_external(dataset.ids(), std::move(values), ScoreMatrix::kInternalTolerance);
}

SelectionQuality selection_quality(const SelectionMask& mask, const Dataset& dataset,
                                   const CorruptionRecord& record) {
    if (mask.size() != dataset.size()) throw Error("mask size differs from dataset size");
    const std::set<SampleId> flipped(record.flipped_ids.begin(), record.flipped_ids.end());
    const auto& truth = dataset.ground_truth();
    SelectionQuality q;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (mask.sample_ids[i] != dataset.id(i)) throw Error("mask/dataset id mismatch", i);
        const bool clean = dataset.noisy_label(i) == truth[i];
        if (clean == static_cast<bool>(flipped.count(dataset.id(i)))) {
            throw Error("corruption record disagrees with dataset labels", i);
        }
        q.total_clean += clean ? 1 : 0;
        if (mask.verdicts[i]) {
            ++q.selected;
            q.selected_clean += clean ? 1 : 0;
        }
    }
    if (q.selected > 0) q.precision = static_cast<double>(q.selected_clean) / static_cast<double>(q.selected);
    if (q.total_clean > 0) q.recall = static_cast<double>(q.selected_clean) / static_cast<double>(q.total_clean);
    if (q.precision + q.recall > 0.0) q.f1 = 2.0 * q.precision * q.recall / (q.precision + q.recall);
    return q;
}

void save_corruption(const CorruptionRecord& record, std::size_t num_samples, const std::filesystem::path& path) {
    auto out = io::open_output(path, false);
    const std::size_t c = record.realized_transition.rows();
    out << "#noiselens-corruption v1 N=" << num_samples << " C=" << c << " FLIPPED=" << record.flipped_ids.size()
        << " RATE=" << io::format_double(record.realized_rate) << '\n';
    out << "flipped";
    for (auto id : record.flipped_ids) out << ',' << id;
    out << '\n';
    for (std::size_t k = 0; k < c; ++k) out << io::join_doubles(record.realized_transition.row(k).data(), c) << '\n';
    if (!out) throw Error("failed writing " + path.string());
}

CorruptionRecord load_corruption(const std::filesystem::path& path) {
    auto in = io::open_input(path, false);
    std::string line;
    if (!std::getline(in, line)) throw Error("empty corruption file");
    const auto header = io::parse_header(line, "noiselens-corruption");
    const auto c = static_cast<std::size_t>(header.int_field("C"));
    CorruptionRecord record;
    record.realized_rate = header.double_field("RATE");
    io::LineReader reader(in);
    if (!reader.next(line)) throw Error("corruption file has no flipped line");
    const auto ids = io::split(line, ',');
    if (ids.empty() || ids[0] != "flipped") throw Error("expected flipped id line", reader.record());
    for (std::size_t k = 1; k < ids.size(); ++k) record.flipped_ids.push_back(io::parse_int(ids[k], reader.record()));
    if (record.flipped_ids.size() != static_cast<std::size_t>(header.int_field("FLIPPED"))) {
        throw Error("flipped id count differs from header");
    }
    record.realized_transition = Matrix(c, c);
    for (std::size_t k = 0; k < c; ++k) {
        if (!reader.next(line)) throw Error("corruption file is missing transition rows");
        const auto fields = io::split(line, ',');
        if (fields.size() != c) throw Error("malformed transition row", reader.record());
        for (std::size_t j = 0; j < c; ++j) record.realized_transition(k, j) = io::parse_double(fields[j], reader.record());
    }
    return record;
}

}  // namespace noiselens
