#include "noiselens/surrogate.hpp"

#include <algorithm>
#include <cmath>

#include "io_util.hpp"
#include "noiselens/error.hpp"
#include "noiselens/parallel.hpp"

namespace noiselens {

namespace {

constexpr double kMinNorm = 1e-30;

double norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

ClassEmbeddingBank::ClassEmbeddingBank(Matrix embeddings, std::string prompt_id)
    : embeddings_(std::move(embeddings)), prompt_id_(std::move(prompt_id)) {
    if (embeddings_.rows() < 2) throw Error("class embedding bank needs at least 2 classes");
    if (embeddings_.cols() == 0) throw Error("class embedding dimension must be positive");
    if (prompt_id_.empty() || prompt_id_.find_first_of(" \t\r\n") != std::string::npos) {
        throw Error("prompt id must be a non-empty token without whitespace");
    }
    for (std::size_t k = 0; k < embeddings_.rows(); ++k) {
        for (double v : embeddings_.row(k)) {
            if (!std::isfinite(v)) throw Error("non-finite class embedding", k);
        }
        if (norm(embeddings_.row(k)) < kMinNorm) throw Error("zero-norm class embedding", k);
    }
}

ScoreMatrix cosine_softmax_score(const EmbeddingTable& image_embeddings, const ClassEmbeddingBank& bank,
                                 const ScorerConfig& config) {
    if (!(config.temperature > 0.0) || !std::isfinite(config.temperature)) {
        throw Error("temperature must be positive");
    }
    const Matrix& images = image_embeddings.vectors;
    if (images.cols() != bank.dim()) {
        throw Error("embedding dimension " + std::to_string(images.cols()) + " does not match bank dimension " +
                    std::to_string(bank.dim()));
    }
    if (image_embeddings.ids.size() != images.rows()) throw Error("embedding id list length differs from rows");
    const std::size_t n = images.rows();
    const std::size_t c = bank.num_classes();

    std::vector<double> image_norms(n);
    for (std::size_t i = 0; i < n; ++i) {
        image_norms[i] = norm(images.row(i));
        if (!std::isfinite(image_norms[i])) throw Error("non-finite embedding", i);
        if (image_norms[i] < kMinNorm) throw Error("zero-norm embedding", i);
    }
    Matrix unit_bank = bank.embeddings();
    for (std::size_t k = 0; k < c; ++k) {
        const double nk = norm(unit_bank.row(k));
        for (double& v : unit_bank.row(k)) v /= nk;
    }

    Matrix out(n, c);
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        std::vector<double> cosines(c);
        for (std::size_t i = begin; i < end; ++i) {
            const auto v = images.row(i);
            for (std::size_t k = 0; k < c; ++k) {
                const auto t = unit_bank.row(k);
                double dot = 0.0;
                for (std::size_t j = 0; j < v.size(); ++j) dot += v[j] * t[j];
                cosines[k] = dot / image_norms[i];
            }
            const double top = *std::max_element(cosines.begin(), cosines.end());
            auto row = out.row(i);
            double total = 0.0;
            for (std::size_t k = 0; k < c; ++k) {
                row[k] = std::exp((cosines[k] - top) / config.temperature);
                total += row[k];
            }
            for (double& q : row) q /= total;
        }
    });
    return ScoreMatrix(image_embeddings.ids, std::move(out));
}

ScoreMatrix score_with_surrogate(const Dataset& dataset, const ScorerSource& source) {
    if (const auto* file = std::get_if<ScoreFileSource>(&source)) {
        return load_scores(file->path, dataset);
    }
    const auto& cosine = std::get<CosineScorerSource>(source);
    if (cosine.bank.num_classes() != dataset.num_classes()) {
        throw Error("bank has " + std::to_string(cosine.bank.num_classes()) + " classes, dataset has " +
                    std::to_string(dataset.num_classes()));
    }
    if (cosine.embeddings) {
        const auto& table = *cosine.embeddings;
        if (table.ids.size() != dataset.size()) throw Error("embedding table row count differs from dataset size");
        for (std::size_t i = 0; i < dataset.size(); ++i) {
            if (table.ids[i] != dataset.id(i)) throw Error("embedding id mismatch", i);
        }
        return cosine_softmax_score(table, cosine.bank, cosine.config);
    }
    const EmbeddingTable own{dataset.ids(), dataset.feature_matrix()};
    return cosine_softmax_score(own, cosine.bank, cosine.config);
}

ClassEmbeddingBank load_bank(const std::filesystem::path& path) {
    const bool binary = io::is_binary_file(path);
    auto in = io::open_input(path, binary);
    if (binary) {
        io::BinaryReader r(in, io::BinaryKind::bank);
        const auto c = r.get<std::uint32_t>();
        const auto d = r.get<std::uint32_t>();
        auto prompt = r.get_string();
        Matrix e(c, d);
        std::vector<bool> seen(c, false);
        for (std::size_t i = 0; i < c; ++i) {
            const auto k = r.get<std::uint32_t>();
            if (k >= c || seen[k]) throw Error("bad or duplicate class index in bank", i);
            seen[k] = true;
            for (auto& v : e.row(k)) v = r.get<double>();
        }
        return ClassEmbeddingBank(std::move(e), std::move(prompt));
    }
    std::string line;
    if (!std::getline(in, line)) throw Error("empty bank file");
    const auto header = io::parse_header(line, "noiselens-bank");
    const auto c = header.int_field("C");
    const auto d = header.int_field("D");
    if (c < 2 || d < 1) throw Error("invalid bank header values");
    const std::string prompt = header.fields.count("PROMPT") ? header.field("PROMPT") : std::string("default");
    Matrix e(static_cast<std::size_t>(c), static_cast<std::size_t>(d));
    std::vector<bool> seen(static_cast<std::size_t>(c), false);
    io::LineReader reader(in);
    std::size_t rows = 0;
    while (reader.next(line)) {
        const std::size_t rec = reader.record();
        const auto fields = io::split(line, ',');
        if (fields.size() != static_cast<std::size_t>(d) + 1) throw Error("dimension mismatch", rec);
        const auto k = io::parse_int(fields[0], rec);
        if (k < 0 || k >= c || seen[static_cast<std::size_t>(k)]) {
            throw Error("bad or duplicate class index in bank", rec);
        }
        seen[static_cast<std::size_t>(k)] = true;
        auto out = e.row(static_cast<std::size_t>(k));
        for (std::size_t j = 0; j < out.size(); ++j) out[j] = io::parse_double(fields[j + 1], rec);
        ++rows;
    }
    if (rows != static_cast<std::size_t>(c)) throw Error("bank file must list every class exactly once");
    return ClassEmbeddingBank(std::move(e), prompt);
}

void save_bank(const ClassEmbeddingBank& bank, const std::filesystem::path& path, FileEncoding encoding) {
    auto out = io::open_output(path, encoding == FileEncoding::binary);
    if (encoding == FileEncoding::binary) {
        io::BinaryWriter w(out, io::BinaryKind::bank);
        w.put<std::uint32_t>(static_cast<std::uint32_t>(bank.num_classes()));
        w.put<std::uint32_t>(static_cast<std::uint32_t>(bank.dim()));
        w.put_string(bank.prompt_id());
        for (std::size_t k = 0; k < bank.num_classes(); ++k) {
            w.put<std::uint32_t>(static_cast<std::uint32_t>(k));
            for (double v : bank.embeddings().row(k)) w.put<double>(v);
        }
    } else {
        out << "#noiselens-bank v1 C=" << bank.num_classes() << " D=" << bank.dim() << " PROMPT=" << bank.prompt_id()
            << '\n';
        for (std::size_t k = 0; k < bank.num_classes(); ++k) {
            out << k << ',' << io::join_doubles(bank.embeddings().row(k).data(), bank.dim()) << '\n';
        }
    }
    if (!out) throw Error("failed writing " + path.string());
}

}  // namespace noiselens
