#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <variant>

#include "noiselens/core_data.hpp"
#include "noiselens/matrix.hpp"

namespace noiselens {

/// Per-class text-side embeddings for one prompt variant (C x d_t).
class ClassEmbeddingBank {
public:
    ClassEmbeddingBank(Matrix embeddings, std::string prompt_id);

    std::size_t num_classes() const noexcept { return embeddings_.rows(); }
    std::size_t dim() const noexcept { return embeddings_.cols(); }
    const Matrix& embeddings() const noexcept { return embeddings_; }
    const std::string& prompt_id() const noexcept { return prompt_id_; }

private:
    Matrix embeddings_;
    std::string prompt_id_;
};

struct ScorerConfig {
    double temperature = 0.01;
};

/// q(y=j|x_i) = softmax_j(cos(V_i, T_j) / temperature), stabilized by
/// subtracting the row maximum before exponentiation.
ScoreMatrix cosine_softmax_score(const EmbeddingTable& image_embeddings, const ClassEmbeddingBank& bank,
                                 const ScorerConfig& config);

/// Cosine-softmax over a dataset's own feature vectors (or a separate
/// embedding table aligned to its ids).
struct CosineScorerSource {
    ClassEmbeddingBank bank;
    ScorerConfig config;
    std::optional<EmbeddingTable> embeddings;
};

struct ScoreFileSource {
    std::filesystem::path path;
};

using ScorerSource = std::variant<CosineScorerSource, ScoreFileSource>;

ScoreMatrix score_with_surrogate(const Dataset& dataset, const ScorerSource& source);

ClassEmbeddingBank load_bank(const std::filesystem::path& path);
void save_bank(const ClassEmbeddingBank& bank, const std::filesystem::path& path,
               FileEncoding encoding = FileEncoding::text);

}  // namespace noiselens
