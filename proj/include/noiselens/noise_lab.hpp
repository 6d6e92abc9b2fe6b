#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "noiselens/core_data.hpp"
#include "noiselens/matrix.hpp"
#include "noiselens/selection.hpp"

namespace noiselens {

// Synthetic ground-truth data and label-noise injection. Everything here may
// read true labels; nothing in selection or training does.

struct BlobSpec {
    std::size_t num_classes = 2;
    std::size_t per_class = 100;
    std::size_t dim = 2;
    double separation = 10.0;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Class means: separation * e_k for k < min(C, d); further classes sit on
/// random unit directions scaled by separation. Depends only on (C, d,
/// separation, seed).
Matrix blob_centers(const BlobSpec& spec);

/// Unit-variance spherical Gaussian blobs around blob_centers(spec), class
/// major order, ids 0..N-1, noisy_label = true_label = class.
Dataset make_blobs(const BlobSpec& spec);
Dataset make_blobs(std::size_t num_classes, std::size_t per_class, std::size_t dim, double separation,
                   std::uint64_t seed);

/// Clean held-out set: same centers as `spec`, samples drawn from an
/// independent stream keyed by `test_seed`.
Dataset make_blob_test_set(const BlobSpec& spec, std::uint64_t test_seed, std::size_t per_class);

enum class NoiseKind { none, symmetric, asymmetric, instance_dependent };

std::string to_string(NoiseKind kind);
NoiseKind parse_noise_kind(const std::string& name);

struct NoiseSpec {
    NoiseKind kind = NoiseKind::symmetric;
    double rate = 0.0;
    std::map<ClassIndex, ClassIndex> pair_map;  // asymmetric only
    std::uint64_t seed = 0;
    // Instance-dependent flip budget: truncated normal(rate, sd) on [lo, hi].
    double idn_sd = 0.1;
    double idn_lower = 0.0;
    double idn_upper = 1.0;

    void validate(std::size_t num_classes) const;
};

/// Parses "0:1,1:0,3:5" into a pair map.
std::map<ClassIndex, ClassIndex> parse_pair_map(const std::string& text);
std::string format_pair_map(const std::map<ClassIndex, ClassIndex>& pairs);

struct CorruptionRecord {
    std::vector<SampleId> flipped_ids;
    double realized_rate = 0.0;
    Matrix realized_transition;  // [true][noisy] empirical frequencies
};

struct NoisyDataset {
    Dataset dataset;
    CorruptionRecord record;
};

/// With probability rate, resample the label uniformly over all C classes
/// (so a rate/C fraction keeps its label).
NoisyDataset inject_symmetric(const Dataset& dataset, const NoiseSpec& spec);
/// With probability rate, replace the label of a mapped class by its pair.
NoisyDataset inject_asymmetric(const Dataset& dataset, const NoiseSpec& spec);
/// Feature-dependent flips with per-sample budget from a truncated normal.
NoisyDataset inject_instance_dependent(const Dataset& dataset, const NoiseSpec& spec);
/// Dispatches on spec.kind; `none` returns the dataset unchanged.
NoisyDataset inject_noise(const Dataset& dataset, const NoiseSpec& spec);

/// Analytic transition matrix of inject_symmetric.
Matrix symmetric_noise_matrix(std::size_t num_classes, double rate);

/// Scorer that reads ground truth: `confidence` on the true label, the rest
/// spread uniformly. confidence = 1 gives one-hot rows.
ScoreMatrix oracle_scores(const Dataset& dataset, double confidence = 1.0);

struct SelectionQuality {
    std::size_t selected = 0;
    std::size_t selected_clean = 0;
    std::size_t total_clean = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

SelectionQuality selection_quality(const SelectionMask& mask, const Dataset& dataset, const CorruptionRecord& record);

void save_corruption(const CorruptionRecord& record, std::size_t num_samples, const std::filesystem::path& path);
CorruptionRecord load_corruption(const std::filesystem::path& path);

}  // namespace noiselens
