#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "noiselens/core_data.hpp"
#include "noiselens/losses.hpp"
#include "noiselens/noise_lab.hpp"
#include "noiselens/priors.hpp"
#include "noiselens/selection.hpp"
#include "noiselens/surrogate.hpp"
#include "noiselens/trainer.hpp"

namespace noiselens {

/// Flat `section.key = value` settings. Lines starting with '#' are comments.
class ConfigFile {
public:
    static ConfigFile parse(std::string_view text);
    static ConfigFile load(const std::filesystem::path& path);

    void set(const std::string& key, const std::string& value) { entries_[key] = value; }
    bool has(const std::string& key) const { return entries_.count(key) > 0; }
    const std::map<std::string, std::string>& entries() const noexcept { return entries_; }

    std::string get(const std::string& key, const std::string& fallback) const;
    std::string require(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    /// Directory that relative paths are resolved against.
    std::filesystem::path base_dir;

private:
    std::map<std::string, std::string> entries_;
};

enum class DatasetSourceKind { file, synth };
enum class ScorerSourceKind { bank, file, oracle, centers };
enum class TestSourceKind { none, file, synth };

struct ExperimentConfig {
    DatasetSourceKind dataset_source = DatasetSourceKind::synth;
    std::filesystem::path dataset_path;
    BlobSpec blobs;
    NoiseSpec noise;

    ScorerSourceKind scorer_source = ScorerSourceKind::oracle;
    std::filesystem::path bank_path;
    std::filesystem::path bank_b_path;
    std::filesystem::path embeddings_path;
    ScorerConfig scorer;
    std::filesystem::path score_file;
    std::filesystem::path score_file_b;
    double oracle_confidence = 1.0;

    SelectionCriterion criterion = SelectionCriterion::confidence;
    double rho = rho_presets::default_10_class;
    double mu = kDefaultMu;

    MarginConfig margin = MarginConfig::shallow();
    TrainConfig train;

    TestSourceKind test_source = TestSourceKind::none;
    std::filesystem::path test_path;
    std::uint64_t test_seed = 1;
    std::size_t test_per_class = 200;

    std::filesystem::path output_dir = "noiselens-run";

    /// Builds and validates; throws Error before any work is done.
    static ExperimentConfig from(const ConfigFile& file);
    /// Fully resolved settings (defaults included), sorted by key.
    std::map<std::string, std::string> resolved() const;
    void validate() const;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t hash_file(const std::filesystem::path& path);
std::string hex64(std::uint64_t value);

struct ExperimentResult {
    int exit_code = 0;
    std::string failed_stage;
    std::string message;
    std::filesystem::path output_dir;
    std::vector<std::string> artifacts;  // file names written, in order

    std::optional<ScoreMatrix> scores;
    std::optional<SelectionMask> mask;
    std::optional<TransitionMatrix> transition;
    std::optional<ClassPrior> prior;
    std::optional<TrainReport> training;
    std::optional<double> test_accuracy;
};

/// Score, select, estimate the transition matrix on the full data, compute
/// the class prior on the clean subset, train, evaluate. Every intermediate
/// artifact and a manifest are written to cfg.output_dir. Stage errors give
/// exit_code 1 with partial artifacts kept.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

}  // namespace noiselens
