#include "noiselens/priors.hpp"

#include <cmath>

#include "io_util.hpp"
#include "noiselens/error.hpp"
#include "noiselens/parallel.hpp"

namespace noiselens {

std::vector<std::string> TransitionMatrix::warnings() const {
    std::vector<std::string> out;
    for (auto k : empty_classes) {
        out.push_back("class " + std::to_string(k) + " has no samples; transition row set to uniform");
    }
    return out;
}

std::vector<double> ClassPrior::raw() const {
    std::vector<double> r(counts.size());
    for (std::size_t j = 0; j < counts.size(); ++j) {
        r[j] = static_cast<double>(counts[j]) / static_cast<double>(total);
    }
    return r;
}

TransitionMatrix estimate_transition_matrix(const Dataset& dataset, const ScoreMatrix& scores) {
    const std::size_t c = dataset.num_classes();
    const std::size_t n = dataset.size();
    if (scores.rows() != n || scores.cols() != c) throw Error("score matrix shape does not match dataset");
    for (std::size_t i = 0; i < n; ++i) {
        if (scores.sample_ids()[i] != dataset.id(i)) throw Error("score matrix misaligned with dataset", i);
    }

    // Per-block partial sums, combined in block order: identical for any
    // thread count.
    const std::size_t blocks = (n + kReductionBlock - 1) / kReductionBlock;
    std::vector<Matrix> partial(blocks, Matrix(c, c));
    std::vector<std::vector<std::size_t>> partial_counts(blocks, std::vector<std::size_t>(c, 0));
    parallel_for(blocks, [&](std::size_t begin, std::size_t end) {
        for (std::size_t b = begin; b < end; ++b) {
            const std::size_t lo = b * kReductionBlock;
            const std::size_t hi = std::min(n, lo + kReductionBlock);
            for (std::size_t i = lo; i < hi; ++i) {
                const auto y = dataset.noisy_label(i);
                ++partial_counts[b][y];
                auto acc = partial[b].row(y);
                const auto q = scores.row(i);
                for (std::size_t j = 0; j < c; ++j) acc[j] += q[j];
            }
        }
    });

    TransitionMatrix tm;
    tm.values = Matrix(c, c);
    tm.source_count.assign(c, 0);
    for (std::size_t b = 0; b < blocks; ++b) {
        for (std::size_t k = 0; k < c * c; ++k) tm.values.data()[k] += partial[b].data()[k];
        for (std::size_t k = 0; k < c; ++k) tm.source_count[k] += partial_counts[b][k];
    }
    for (std::size_t i = 0; i < c; ++i) {
        auto row = tm.values.row(i);
        if (tm.source_count[i] == 0) {
            tm.empty_classes.push_back(static_cast<ClassIndex>(i));
            for (double& v : row) v = 1.0 / static_cast<double>(c);
            continue;
        }
        const double inv = static_cast<double>(tm.source_count[i]);
        for (double& v : row) v /= inv;
    }
    return tm;
}

double transition_matrix_error(const TransitionMatrix& estimated, const Matrix& reference) {
    const Matrix& m = estimated.values;
    if (m.rows() != reference.rows() || m.cols() != reference.cols()) {
        throw Error("transition matrix dimension mismatch");
    }
    for (std::size_t i = 0; i < reference.rows(); ++i) {
        double s = 0.0;
        for (double v : reference.row(i)) s += v;
        if (std::abs(s - 1.0) > 1e-6) throw Error("reference row does not sum to 1", i);
    }
    double total = 0.0;
    for (std::size_t k = 0; k < m.data().size(); ++k) total += std::abs(m.data()[k] - reference.data()[k]);
    return total / static_cast<double>(m.data().size());
}

ClassPrior compute_class_prior(const Dataset& clean_subset, const LabelSpace& label_space, double smoothing) {
    if (clean_subset.size() == 0) throw Error("class prior needs a non-empty subset");
    if (clean_subset.num_classes() != label_space.num_classes()) throw Error("label space mismatch");
    if (!(smoothing > 0.0)) throw Error("prior smoothing must be positive");
    const std::size_t c = label_space.num_classes();
    ClassPrior prior;
    prior.counts.assign(c, 0);
    for (std::size_t i = 0; i < clean_subset.size(); ++i) ++prior.counts[clean_subset.noisy_label(i)];
    prior.total = clean_subset.size();
    prior.values.resize(c);
    const double denom = static_cast<double>(prior.total) + static_cast<double>(c) * smoothing;
    for (std::size_t j = 0; j < c; ++j) prior.values[j] = (static_cast<double>(prior.counts[j]) + smoothing) / denom;
    return prior;
}

namespace {

std::string join_counts(const std::vector<std::size_t>& counts) {
    std::string s;
    for (std::size_t j = 0; j < counts.size(); ++j) {
        if (j) s += ',';
        s += std::to_string(counts[j]);
    }
    return s;
}

std::vector<std::size_t> counts_from_comments(const std::vector<std::string>& comments, std::size_t c) {
    for (const auto& comment : comments) {
        if (comment.rfind("counts ", 0) != 0) continue;
        std::vector<std::size_t> out;
        for (auto tok : io::split(std::string_view(comment).substr(7), ',')) {
            const auto v = io::parse_int(tok, 0);
            if (v < 0) throw Error("negative count");
            out.push_back(static_cast<std::size_t>(v));
        }
        if (out.size() != c) throw Error("counts line has wrong length");
        return out;
    }
    return {};
}

}  // namespace

void save_transition_matrix(const TransitionMatrix& tm, const std::filesystem::path& path) {
    auto out = io::open_output(path, false);
    const std::size_t c = tm.num_classes();
    out << "#noiselens-tm v1 C=" << c << '\n';
    for (std::size_t i = 0; i < c; ++i) out << io::join_doubles(tm.values.row(i).data(), c) << '\n';
    out << "#counts " << join_counts(tm.source_count) << '\n';
    if (!out) throw Error("failed writing " + path.string());
}

TransitionMatrix load_transition_matrix(const std::filesystem::path& path) {
    auto in = io::open_input(path, false);
    std::string line;
    if (!std::getline(in, line)) throw Error("empty transition matrix file");
    const auto header = io::parse_header(line, "noiselens-tm");
    const auto c = header.int_field("C");
    if (c < 2) throw Error("invalid transition matrix size");
    const auto cs = static_cast<std::size_t>(c);
    TransitionMatrix tm;
    tm.values = Matrix(cs, cs);
    io::LineReader reader(in);
    std::size_t row = 0;
    while (reader.next(line)) {
        const std::size_t rec = reader.record();
        if (row >= cs) throw Error("too many transition matrix rows", rec);
        const auto fields = io::split(line, ',');
        if (fields.size() != cs) throw Error("malformed transition matrix row", rec);
        double s = 0.0;
        for (std::size_t j = 0; j < cs; ++j) {
            const double v = io::parse_double(fields[j], rec);
            if (!(v >= 0.0 && v <= 1.0)) throw Error("transition entry outside [0, 1]", rec);
            tm.values(row, j) = v;
            s += v;
        }
        if (std::abs(s - 1.0) > ScoreMatrix::kIngestTolerance) throw Error("transition row does not sum to 1", rec);
        ++row;
    }
    if (row != cs) throw Error("transition matrix has too few rows");
    tm.source_count = counts_from_comments(reader.comments(), cs);
    for (std::size_t k = 0; k < tm.source_count.size(); ++k) {
        if (tm.source_count[k] == 0) tm.empty_classes.push_back(static_cast<ClassIndex>(k));
    }
    return tm;
}

void save_class_prior(const ClassPrior& prior, const std::filesystem::path& path) {
    auto out = io::open_output(path, false);
    out << "#noiselens-prior v1 C=" << prior.values.size() << " N=" << prior.total << '\n';
    out << io::join_doubles(prior.values.data(), prior.values.size()) << '\n';
    out << "#counts " << join_counts(prior.counts) << '\n';
    if (!out) throw Error("failed writing " + path.string());
}

ClassPrior load_class_prior(const std::filesystem::path& path) {
    auto in = io::open_input(path, false);
    std::string line;
    if (!std::getline(in, line)) throw Error("empty prior file");
    const auto header = io::parse_header(line, "noiselens-prior");
    const auto c = header.int_field("C");
    if (c < 2) throw Error("invalid prior size");
    ClassPrior prior;
    if (header.fields.count("N")) prior.total = static_cast<std::size_t>(header.int_field("N"));
    io::LineReader reader(in);
    if (!reader.next(line)) throw Error("prior file has no values line");
    const auto fields = io::split(line, ',');
    if (fields.size() != static_cast<std::size_t>(c)) throw Error("malformed prior values", reader.record());
    double s = 0.0;
    for (auto tok : fields) {
        const double v = io::parse_double(tok, reader.record());
        if (!(v > 0.0)) throw Error("prior entries must be positive", reader.record());
        prior.values.push_back(v);
        s += v;
    }
    if (std::abs(s - 1.0) > ScoreMatrix::kIngestTolerance) throw Error("prior does not sum to 1");
    if (reader.next(line)) throw Error("unexpected data after prior values", reader.record());
    prior.counts = counts_from_comments(reader.comments(), static_cast<std::size_t>(c));
    return prior;
}

}  // namespace noiselens
