#include "noiselens/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "io_util.hpp"
#include "noiselens/error.hpp"
#include "noiselens/eval_report.hpp"

namespace noiselens {

// ---------------------------------------------------------------------------
// ConfigFile

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace

ConfigFile ConfigFile::parse(std::string_view text) {
    ConfigFile cfg;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        const auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        const std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw Error("config line is not 'key = value'", line_no);
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        const auto dot = key.find('.');
        if (dot == std::string::npos || dot == 0 || dot + 1 == key.size() || key.find('.', dot + 1) != std::string::npos) {
            throw Error("config key '" + key + "' must have the form section.key", line_no);
        }
        if (cfg.entries_.count(key)) throw Error("duplicate config key '" + key + "'", line_no);
        cfg.entries_[key] = value;
    }
    return cfg;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    auto cfg = parse(buf.str());
    cfg.base_dir = path.parent_path();
    return cfg;
}

std::string ConfigFile::get(const std::string& key, const std::string& fallback) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second;
}

std::string ConfigFile::require(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end() || it->second.empty()) throw Error("config is missing required key " + key);
    return it->second;
}

double ConfigFile::get_double(const std::string& key, double fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    try {
        return io::parse_double(it->second, 0);
    } catch (const Error&) {
        throw Error("config key " + key + " expects a number, got '" + it->second + "'");
    }
}

std::uint64_t ConfigFile::get_u64(const std::string& key, std::uint64_t fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    std::uint64_t v = 0;
    const auto& s = it->second;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw Error("config key " + key + " expects a nonnegative integer, got '" + s + "'");
    }
    return v;
}

bool ConfigFile::get_bool(const std::string& key, bool fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw Error("config key " + key + " expects true/false, got '" + it->second + "'");
}

// ---------------------------------------------------------------------------
// ExperimentConfig

namespace {

const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys = {
        "dataset.source", "dataset.path",
        "synth.classes", "synth.per_class", "synth.dim", "synth.separation", "synth.seed",
        "noise.kind", "noise.rate", "noise.pairs", "noise.seed", "noise.idn_sd", "noise.idn_lower", "noise.idn_upper",
        "scorer.source", "scorer.bank", "scorer.bank_b", "scorer.embeddings", "scorer.temperature",
        "scorer.file", "scorer.file_b", "scorer.oracle_confidence",
        "selection.criterion", "selection.rho", "selection.mu",
        "margin.delta", "margin.t", "margin.s", "margin.gamma",
        "train.epochs", "train.batch_size", "train.lr", "train.weight_decay", "train.momentum", "train.seed",
        "train.shuffle", "train.lr_step_epochs", "train.lr_decay",
        "test.source", "test.path", "test.seed", "test.per_class",
        "output.dir",
    };
    return keys;
}

std::filesystem::path resolve(const ConfigFile& file, const std::string& key) {
    const std::filesystem::path p = file.get(key, "");
    if (p.empty() || p.is_absolute() || file.base_dir.empty()) return p;
    return file.base_dir / p;
}

std::string scorer_name(ScorerSourceKind k) {
    switch (k) {
        case ScorerSourceKind::bank: return "bank";
        case ScorerSourceKind::file: return "file";
        case ScorerSourceKind::oracle: return "oracle";
        case ScorerSourceKind::centers: return "centers";
    }
    return "unknown";
}

std::string test_name(TestSourceKind k) {
    switch (k) {
        case TestSourceKind::none: return "none";
        case TestSourceKind::file: return "file";
        case TestSourceKind::synth: return "synth";
    }
    return "unknown";
}

}  // namespace

ExperimentConfig ExperimentConfig::from(const ConfigFile& file) {
    for (const auto& [key, value] : file.entries()) {
        if (std::find(known_keys().begin(), known_keys().end(), key) == known_keys().end()) {
            throw Error("unknown config key '" + key + "'");
        }
    }
    ExperimentConfig c;
    const auto ds = file.get("dataset.source", "synth");
    if (ds == "synth") {
        c.dataset_source = DatasetSourceKind::synth;
    } else if (ds == "file") {
        c.dataset_source = DatasetSourceKind::file;
        c.dataset_path = resolve(file, "dataset.path");
    } else {
        throw Error("dataset.source must be synth or file");
    }
    c.blobs.num_classes = file.get_u64("synth.classes", 2);
    c.blobs.per_class = file.get_u64("synth.per_class", 100);
    c.blobs.dim = file.get_u64("synth.dim", 2);
    c.blobs.separation = file.get_double("synth.separation", 10.0);
    c.blobs.seed = file.get_u64("synth.seed", 0);

    c.noise.kind = parse_noise_kind(file.get("noise.kind", "none"));
    c.noise.rate = file.get_double("noise.rate", 0.0);
    c.noise.pair_map = parse_pair_map(file.get("noise.pairs", ""));
    c.noise.seed = file.get_u64("noise.seed", 0);
    c.noise.idn_sd = file.get_double("noise.idn_sd", 0.1);
    c.noise.idn_lower = file.get_double("noise.idn_lower", 0.0);
    c.noise.idn_upper = file.get_double("noise.idn_upper", 1.0);

    const auto sc = file.get("scorer.source", "oracle");
    if (sc == "bank") {
        c.scorer_source = ScorerSourceKind::bank;
    } else if (sc == "file") {
        c.scorer_source = ScorerSourceKind::file;
    } else if (sc == "oracle") {
        c.scorer_source = ScorerSourceKind::oracle;
    } else if (sc == "centers") {
        c.scorer_source = ScorerSourceKind::centers;
    } else {
        throw Error("scorer.source must be bank, file, oracle or centers");
    }
    c.bank_path = resolve(file, "scorer.bank");
    c.bank_b_path = resolve(file, "scorer.bank_b");
    c.embeddings_path = resolve(file, "scorer.embeddings");
    c.scorer.temperature = file.get_double("scorer.temperature", 0.01);
    c.score_file = resolve(file, "scorer.file");
    c.score_file_b = resolve(file, "scorer.file_b");
    c.oracle_confidence = file.get_double("scorer.oracle_confidence", 1.0);

    c.criterion = parse_criterion(file.get("selection.criterion", "confidence"));
    c.rho = file.get_double("selection.rho", rho_presets::default_10_class);
    c.mu = file.get_double("selection.mu", kDefaultMu);

    c.margin.delta = file.get_double("margin.delta", c.margin.delta);
    c.margin.t = file.get_double("margin.t", c.margin.t);
    c.margin.s = file.get_double("margin.s", c.margin.s);
    c.margin.gamma = file.get_double("margin.gamma", c.margin.gamma);

    c.train.epochs = file.get_u64("train.epochs", c.train.epochs);
    c.train.batch_size = file.get_u64("train.batch_size", c.train.batch_size);
    c.train.learning_rate = file.get_double("train.lr", c.train.learning_rate);
    c.train.weight_decay = file.get_double("train.weight_decay", c.train.weight_decay);
    c.train.momentum = file.get_double("train.momentum", c.train.momentum);
    c.train.seed = file.get_u64("train.seed", c.train.seed);
    c.train.shuffle = file.get_bool("train.shuffle", c.train.shuffle);
    c.train.lr_step_epochs = file.get_u64("train.lr_step_epochs", 0);
    c.train.lr_decay = file.get_double("train.lr_decay", c.train.lr_decay);

    const auto ts = file.get("test.source", "none");
    if (ts == "none") {
        c.test_source = TestSourceKind::none;
    } else if (ts == "file") {
        c.test_source = TestSourceKind::file;
        c.test_path = resolve(file, "test.path");
    } else if (ts == "synth") {
        c.test_source = TestSourceKind::synth;
    } else {
        throw Error("test.source must be none, file or synth");
    }
    c.test_seed = file.get_u64("test.seed", 1);
    c.test_per_class = file.get_u64("test.per_class", 200);

    c.output_dir = file.has("output.dir") ? resolve(file, "output.dir") : std::filesystem::path("noiselens-run");
    c.validate();
    return c;
}

void ExperimentConfig::validate() const {
    if (dataset_source == DatasetSourceKind::file && dataset_path.empty()) {
        throw Error("dataset.source = file needs dataset.path");
    }
    if (dataset_source == DatasetSourceKind::synth) {
        blobs.validate();
        noise.validate(blobs.num_classes);
    }
    const bool two_sources = criterion != SelectionCriterion::confidence;
    switch (scorer_source) {
        case ScorerSourceKind::bank:
            if (bank_path.empty()) throw Error("scorer.source = bank needs scorer.bank");
            if (two_sources && bank_b_path.empty()) {
                throw Error("prompt-consistency selection needs a second bank (scorer.bank_b)");
            }
            break;
        case ScorerSourceKind::file:
            if (score_file.empty()) throw Error("scorer.source = file needs scorer.file");
            if (two_sources && score_file_b.empty()) {
                throw Error("prompt-consistency selection needs a second score file (scorer.file_b)");
            }
            break;
        case ScorerSourceKind::oracle:
        case ScorerSourceKind::centers:
            if (two_sources) throw Error("prompt-consistency selection needs two score sources (bank or file)");
            if (dataset_source != DatasetSourceKind::synth && scorer_source == ScorerSourceKind::centers) {
                throw Error("scorer.source = centers needs a synthetic dataset");
            }
            break;
    }
    if (!(scorer.temperature > 0.0)) throw Error("scorer.temperature must be positive");
    if (criterion != SelectionCriterion::prompt_consistency && !(rho >= 0.0 && rho <= 1.0)) {
        throw Error("selection.rho must lie in [0, 1]");
    }
    if (criterion != SelectionCriterion::confidence && !(mu > 0.0)) throw Error("selection.mu must be positive");
    margin.validate();
    train.validate();
    if (test_source == TestSourceKind::file && test_path.empty()) throw Error("test.source = file needs test.path");
    if (test_source == TestSourceKind::synth && dataset_source != DatasetSourceKind::synth) {
        throw Error("test.source = synth needs a synthetic training dataset");
    }
    if (output_dir.empty()) throw Error("output.dir must not be empty");
}

std::map<std::string, std::string> ExperimentConfig::resolved() const {
    auto d = [](double v) { return io::format_double(v); };
    std::map<std::string, std::string> r;
    r["dataset.source"] = dataset_source == DatasetSourceKind::synth ? "synth" : "file";
    if (dataset_source == DatasetSourceKind::file) r["dataset.path"] = dataset_path.string();
    if (dataset_source == DatasetSourceKind::synth) {
        r["synth.classes"] = std::to_string(blobs.num_classes);
        r["synth.per_class"] = std::to_string(blobs.per_class);
        r["synth.dim"] = std::to_string(blobs.dim);
        r["synth.separation"] = d(blobs.separation);
        r["synth.seed"] = std::to_string(blobs.seed);
        r["noise.kind"] = to_string(noise.kind);
        r["noise.rate"] = d(noise.rate);
        r["noise.pairs"] = format_pair_map(noise.pair_map);
        r["noise.seed"] = std::to_string(noise.seed);
        r["noise.idn_sd"] = d(noise.idn_sd);
        r["noise.idn_lower"] = d(noise.idn_lower);
        r["noise.idn_upper"] = d(noise.idn_upper);
    }
    r["scorer.source"] = scorer_name(scorer_source);
    r["scorer.temperature"] = d(scorer.temperature);
    if (!bank_path.empty()) r["scorer.bank"] = bank_path.string();
    if (!bank_b_path.empty()) r["scorer.bank_b"] = bank_b_path.string();
    if (!embeddings_path.empty()) r["scorer.embeddings"] = embeddings_path.string();
    if (!score_file.empty()) r["scorer.file"] = score_file.string();
    if (!score_file_b.empty()) r["scorer.file_b"] = score_file_b.string();
    r["scorer.oracle_confidence"] = d(oracle_confidence);
    r["selection.criterion"] = to_string(criterion);
    r["selection.rho"] = d(rho);
    r["selection.mu"] = d(mu);
    r["margin.delta"] = d(margin.delta);
    r["margin.t"] = d(margin.t);
    r["margin.s"] = d(margin.s);
    r["margin.gamma"] = d(margin.gamma);
    r["train.epochs"] = std::to_string(train.epochs);
    r["train.batch_size"] = std::to_string(train.batch_size);
    r["train.lr"] = d(train.learning_rate);
    r["train.weight_decay"] = d(train.weight_decay);
    r["train.momentum"] = d(train.momentum);
    r["train.seed"] = std::to_string(train.seed);
    r["train.shuffle"] = train.shuffle ? "true" : "false";
    r["train.lr_step_epochs"] = std::to_string(train.lr_step_epochs);
    r["train.lr_decay"] = d(train.lr_decay);
    r["test.source"] = test_name(test_source);
    if (test_source == TestSourceKind::file) r["test.path"] = test_path.string();
    if (test_source == TestSourceKind::synth) {
        r["test.seed"] = std::to_string(test_seed);
        r["test.per_class"] = std::to_string(test_per_class);
    }
    r["output.dir"] = output_dir.string();
    return r;
}

// ---------------------------------------------------------------------------
// Hashing

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t hash_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return fnv1a64(buf.str());
}

std::string hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

// ---------------------------------------------------------------------------
// run_experiment

namespace {

void write_manifest(const ExperimentConfig& cfg, const ExperimentResult& result) {
    const auto resolved = cfg.resolved();
    std::string config_text;
    for (const auto& [k, v] : resolved) {
        if (k == "output.dir") continue;
        config_text += k + "=" + v + "\n";
    }
    std::ofstream out(cfg.output_dir / "manifest.txt", std::ios::trunc);
    out << "#noiselens-manifest v1\n";
    out << "status=" << (result.exit_code == 0 ? "ok" : "failed") << '\n';
    if (result.exit_code != 0) {
        out << "failed_stage=" << result.failed_stage << '\n';
        out << "message=" << result.message << '\n';
    }
    out << "config_hash=" << hex64(fnv1a64(config_text)) << '\n';
    for (const auto& [k, v] : resolved) {
        if (k.size() >= 5 && k.compare(k.size() - 5, 5, ".seed") == 0) out << "seed." << k.substr(0, k.find('.')) << '=' << v << '\n';
    }
    for (const auto& [k, v] : resolved) {
        if (k == "output.dir") continue;
        out << "config." << k << '=' << v << '\n';
    }
    std::uint64_t combined = fnv1a64("");
    for (const auto& name : result.artifacts) {
        const auto h = hash_file(cfg.output_dir / name);
        out << "artifact." << name << '=' << hex64(h) << '\n';
        combined = fnv1a64(hex64(h), combined);
    }
    out << "numeric_hash=" << hex64(combined) << '\n';
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    ExperimentResult result;
    result.output_dir = cfg.output_dir;
    std::string stage = "setup";
    auto artifact = [&](const std::string& name) {
        result.artifacts.push_back(name);
        return cfg.output_dir / name;
    };
    try {
        cfg.validate();
        std::filesystem::create_directories(cfg.output_dir);

        stage = "dataset";
        std::optional<Dataset> train_set;
        std::optional<CorruptionRecord> corruption;
        if (cfg.dataset_source == DatasetSourceKind::synth) {
            auto noisy = inject_noise(make_blobs(cfg.blobs), cfg.noise);
            train_set.emplace(std::move(noisy.dataset));
            corruption = std::move(noisy.record);
            save_dataset(*train_set, artifact("dataset.txt"));
            save_corruption(*corruption, train_set->size(), artifact("corruption.txt"));
        } else {
            train_set.emplace(load_dataset(cfg.dataset_path));
        }
        const Dataset& data = *train_set;

        stage = "scoring";
        std::optional<ScoreMatrix> scores_b;
        switch (cfg.scorer_source) {
            case ScorerSourceKind::bank: {
                std::optional<EmbeddingTable> table;
                if (!cfg.embeddings_path.empty()) table = load_embeddings(cfg.embeddings_path);
                result.scores = score_with_surrogate(data, CosineScorerSource{load_bank(cfg.bank_path), cfg.scorer, table});
                if (!cfg.bank_b_path.empty()) {
                    scores_b = score_with_surrogate(data, CosineScorerSource{load_bank(cfg.bank_b_path), cfg.scorer, table});
                }
                break;
            }
            case ScorerSourceKind::file:
                result.scores = score_with_surrogate(data, ScoreFileSource{cfg.score_file});
                if (!cfg.score_file_b.empty()) scores_b = score_with_surrogate(data, ScoreFileSource{cfg.score_file_b});
                break;
            case ScorerSourceKind::oracle:
                result.scores = oracle_scores(data, cfg.oracle_confidence);
                break;
            case ScorerSourceKind::centers:
                result.scores = score_with_surrogate(
                    data, CosineScorerSource{ClassEmbeddingBank(blob_centers(cfg.blobs), "blob-centers"), cfg.scorer,
                                             std::nullopt});
                break;
        }
        save_scores(*result.scores, artifact("scores.txt"));
        if (scores_b) save_scores(*scores_b, artifact("scores_b.txt"));

        stage = "selection";
        switch (cfg.criterion) {
            case SelectionCriterion::confidence:
                result.mask = select_by_confidence(data, *result.scores, cfg.rho);
                break;
            case SelectionCriterion::prompt_consistency:
                result.mask = select_by_prompt_consistency(data, *result.scores, *scores_b, cfg.mu);
                break;
            case SelectionCriterion::conjunction:
                result.mask = combine_masks(select_by_confidence(data, *result.scores, cfg.rho),
                                            select_by_prompt_consistency(data, *result.scores, *scores_b, cfg.mu));
                break;
        }
        save_mask(*result.mask, artifact("mask.txt"));
        const Dataset clean = apply_mask(data, *result.mask);

        stage = "transition";
        result.transition = estimate_transition_matrix(data, *result.scores);
        save_transition_matrix(*result.transition, artifact("transition.txt"));

        stage = "prior";
        result.prior = compute_class_prior(clean, data.label_space());
        save_class_prior(*result.prior, artifact("prior.txt"));

        stage = "training";
        result.training = train(clean, *result.transition, *result.prior, cfg.margin, cfg.train);
        save_classifier(result.training->classifier, artifact("classifier.txt"));

        stage = "evaluation";
        std::vector<ReportRecord> records;
        ReportRecord run{"selection", {}};
        run.add("criterion", to_string(result.mask->criterion))
            .add("threshold", result.mask->threshold)
            .add("selected", result.mask->selected_count())
            .add("total", data.size());
        records.push_back(run);
        if (data.has_ground_truth()) records.push_back(to_record(selection_quality(*result.mask, data)));
        for (const auto& w : result.transition->warnings()) {
            ReportRecord r{"warning", {}};
            std::string text = w;
            std::replace(text.begin(), text.end(), ' ', '_');
            records.push_back(r.add("message", text));
        }
        if (result.mask->criterion != SelectionCriterion::prompt_consistency) {
            auto hist = to_records(confidence_histogram(result.mask->scores, "confidence"));
            records.insert(records.end(), hist.begin(), hist.end());
        }
        for (std::size_t e = 0; e < result.training->epoch_loss.size(); ++e) {
            ReportRecord r{"epoch", {}};
            r.add("epoch", e + 1)
                .add("loss", result.training->epoch_loss[e])
                .add("train_accuracy", result.training->epoch_accuracy[e]);
            records.push_back(r);
        }
        std::optional<Dataset> test_set;
        if (cfg.test_source == TestSourceKind::synth) {
            test_set = make_blob_test_set(cfg.blobs, cfg.test_seed, cfg.test_per_class);
        } else if (cfg.test_source == TestSourceKind::file) {
            test_set = load_dataset(cfg.test_path);
        }
        if (test_set) {
            const auto pred = predict(result.training->classifier, *test_set);
            const auto& reference = test_set->has_ground_truth() ? test_set->ground_truth() : test_set->noisy_labels();
            result.test_accuracy = accuracy(pred.labels, reference);
            ReportRecord r{"test", {}};
            r.add("samples", test_set->size()).add("top1", *result.test_accuracy);
            if (test_set->num_classes() >= 5) r.add("top5", top_k_accuracy(pred.probabilities, reference, 5));
            records.push_back(r);
        }
        stage = "report";
        {
            auto out = io::open_output(artifact("report.txt"), false);
            out << render(records, ReportFormat::records);
        }
        result.exit_code = 0;
    } catch (const std::exception& e) {
        result.exit_code = 1;
        result.failed_stage = stage;
        result.message = e.what();
        // Drop the entry for an artifact whose write failed part-way.
        std::vector<std::string> kept;
        for (const auto& name : result.artifacts) {
            if (std::filesystem::exists(cfg.output_dir / name)) kept.push_back(name);
        }
        result.artifacts = std::move(kept);
    }
    try {
        if (std::filesystem::exists(cfg.output_dir)) write_manifest(cfg, result);
    } catch (const std::exception& e) {
        if (result.exit_code == 0) {
            result.exit_code = 1;
            result.failed_stage = "manifest";
            result.message = e.what();
        }
    }
    return result;
}

}  // namespace noiselens
