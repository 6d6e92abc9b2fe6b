// noiselens: clean-sample selection and margin-adjusted training over
// precomputed embeddings.
//
// Exit codes: 0 success, 1 stage failure, 2 usage error.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "noiselens/core_data.hpp"
#include "noiselens/error.hpp"
#include "noiselens/eval_report.hpp"
#include "noiselens/experiment.hpp"
#include "noiselens/noise_lab.hpp"
#include "noiselens/parallel.hpp"
#include "noiselens/priors.hpp"
#include "noiselens/selection.hpp"
#include "noiselens/surrogate.hpp"
#include "noiselens/trainer.hpp"

namespace nl = noiselens;

namespace {


int fail(const std::string& stage, const std::exception& e) {
    std::cerr << "noiselens: error [" << stage << "]: " << e.what() << '\n';
    return 1;
}

nl::FileEncoding encoding(bool binary) { return binary ? nl::FileEncoding::binary : nl::FileEncoding::text; }

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const auto token = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!token.empty()) out.push_back(std::stod(token));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

void add_margin_flags(CLI::App* cmd, nl::MarginConfig& m) {
    cmd->add_option("--delta", m.delta, "noise-aware margin weight")->capture_default_str();
    cmd->add_option("--t", m.t, "balanced margin weight")->capture_default_str();
    cmd->add_option("--s", m.s, "margin temperature")->capture_default_str();
    cmd->add_option("--gamma", m.gamma, "focal exponent")->capture_default_str();
}

void add_train_flags(CLI::App* cmd, nl::TrainConfig& t) {
    cmd->add_option("--epochs", t.epochs)->capture_default_str();
    cmd->add_option("--batch-size", t.batch_size)->capture_default_str();
    cmd->add_option("--lr", t.learning_rate)->capture_default_str();
    cmd->add_option("--wd", t.weight_decay, "L2 weight decay")->capture_default_str();
    cmd->add_option("--momentum", t.momentum)->capture_default_str();
    cmd->add_option("--seed", t.seed)->capture_default_str();
    cmd->add_option("--lr-step-epochs", t.lr_step_epochs, "step decay period (0 = constant)")->capture_default_str();
    cmd->add_option("--lr-decay", t.lr_decay)->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"noiselens: surrogate-scored clean-sample selection and margin-adjusted training"};
    app.require_subcommand(1);

    std::size_t threads = 0;
    app.add_option("--threads", threads, "worker thread cap (env NOISELENS_THREADS)");

    // synth ------------------------------------------------------------------
    auto* synth = app.add_subcommand("synth", "generate Gaussian blobs and inject label noise");
    nl::BlobSpec blobs;
    std::string noise_kind = "none";
    nl::NoiseSpec noise;
    std::string pairs;
    std::string synth_out, corruption_out, centers_out, test_out;
    std::uint64_t test_seed = 1;
    std::size_t test_per_class = 200;
    bool synth_binary = false;
    synth->add_option("--classes", blobs.num_classes)->capture_default_str();
    synth->add_option("--per-class", blobs.per_class)->capture_default_str();
    synth->add_option("--dim", blobs.dim)->capture_default_str();
    synth->add_option("--sep", blobs.separation, "distance of class means from the origin")->capture_default_str();
    synth->add_option("--seed", blobs.seed, "blob seed")->capture_default_str();
    synth->add_option("--noise", noise_kind, "none|sym|asym|idn")
        ->check(CLI::IsMember({"none", "sym", "asym", "idn"}))
        ->capture_default_str();
    synth->add_option("--rate", noise.rate)->capture_default_str();
    synth->add_option("--noise-seed", noise.seed)->capture_default_str();
    synth->add_option("--pairs", pairs, "asymmetric pair map, e.g. 0:1,1:0");
    synth->add_option("--idn-sd", noise.idn_sd)->capture_default_str();
    synth->add_option("--idn-lower", noise.idn_lower)->capture_default_str();
    synth->add_option("--idn-upper", noise.idn_upper)->capture_default_str();
    synth->add_option("--out", synth_out, "dataset output path")->required();
    synth->add_option("--corruption", corruption_out, "corruption record output path");
    synth->add_option("--centers", centers_out, "write class means as an embedding bank");
    synth->add_option("--test-out", test_out, "also write a clean held-out set");
    synth->add_option("--test-seed", test_seed)->capture_default_str();
    synth->add_option("--test-per-class", test_per_class)->capture_default_str();
    synth->add_flag("--binary", synth_binary, "write the binary container");

    // score ------------------------------------------------------------------
    auto* score = app.add_subcommand("score", "score a dataset with the cosine-softmax surrogate");
    std::string score_dataset, score_bank, score_embeddings, score_out;
    nl::ScorerConfig scorer;
    bool score_oracle = false;
    double oracle_confidence = 1.0;
    bool score_binary = false;
    score->add_option("--dataset", score_dataset)->required();
    auto* bank_opt = score->add_option("--bank", score_bank, "class embedding bank");
    auto* oracle_flag = score->add_flag("--oracle", score_oracle, "ground-truth scorer (synthetic data only)");
    bank_opt->excludes(oracle_flag);
    score->add_option("--oracle-confidence", oracle_confidence)->capture_default_str();
    score->add_option("--embeddings", score_embeddings, "separate embedding table aligned to dataset ids");
    score->add_option("--temperature", scorer.temperature)->capture_default_str();
    score->add_option("--out", score_out)->required();
    score->add_flag("--binary", score_binary);

    // select -----------------------------------------------------------------
    auto* select = app.add_subcommand("select", "select clean samples");
    std::string sel_dataset, sel_scores, sel_scores_b, sel_out, criterion = "confidence";
    double rho = nl::rho_presets::default_10_class;
    double mu = nl::kDefaultMu;
    select->add_option("--dataset", sel_dataset)->required();
    select->add_option("--scores", sel_scores)->required();
    select->add_option("--scores-b", sel_scores_b, "second prompt's scores (prompt consistency)");
    select->add_option("--criterion", criterion, "confidence|prompt-consistency|conjunction (both criteria, extension)")
        ->check(CLI::IsMember({"confidence", "prompt-consistency", "conjunction"}))
        ->capture_default_str();
    select->add_option("--rho", rho)->capture_default_str();
    select->add_option("--mu", mu)->capture_default_str();
    select->add_option("--out", sel_out)->required();

    // priors -----------------------------------------------------------------
    auto* priors = app.add_subcommand("priors", "estimate the transition matrix and class prior");
    std::string pr_dataset, pr_scores, pr_mask, pr_tm_out, pr_prior_out;
    priors->add_option("--dataset", pr_dataset)->required();
    priors->add_option("--scores", pr_scores)->required();
    priors->add_option("--mask", pr_mask)->required();
    priors->add_option("--tm-out", pr_tm_out)->required();
    priors->add_option("--prior-out", pr_prior_out)->required();

    // train ------------------------------------------------------------------
    auto* trainc = app.add_subcommand("train", "train a linear head on the clean subset");
    std::string tr_dataset, tr_mask, tr_tm, tr_prior, tr_out;
    nl::MarginConfig margin = nl::MarginConfig::shallow();
    nl::TrainConfig train_cfg;
    bool tr_binary = false;
    trainc->add_option("--dataset", tr_dataset)->required();
    trainc->add_option("--mask", tr_mask)->required();
    trainc->add_option("--tm", tr_tm)->required();
    trainc->add_option("--prior", tr_prior)->required();
    add_margin_flags(trainc, margin);
    add_train_flags(trainc, train_cfg);
    trainc->add_option("--out", tr_out)->required();
    trainc->add_flag("--binary", tr_binary);

    // report -----------------------------------------------------------------
    auto* report = app.add_subcommand("report", "accuracy, confidence histograms and threshold sweeps");
    std::string rep_format = "table", rep_test, rep_clf, rep_train, rep_scores, rep_mask, rep_sweep;
    std::size_t topk = 5;
    nl::MarginConfig sweep_margin = nl::MarginConfig::shallow();
    nl::TrainConfig sweep_train;
    report->add_option("--format", rep_format)->check(CLI::IsMember({"table", "records"}))->capture_default_str();
    report->add_option("--test", rep_test, "evaluation dataset");
    report->add_option("--classifier", rep_clf, "checkpoint to evaluate on --test");
    report->add_option("--topk", topk)->capture_default_str();
    report->add_option("--train-dataset", rep_train, "training dataset (histogram, selection quality, sweep)");
    report->add_option("--scores", rep_scores, "scores aligned to --train-dataset");
    report->add_option("--mask", rep_mask, "mask over --train-dataset");
    report->add_option("--sweep", rep_sweep, "comma-separated ascending rho values");
    add_margin_flags(report, sweep_margin);
    add_train_flags(report, sweep_train);

    // run --------------------------------------------------------------------
    auto* run = app.add_subcommand("run", "run the full pipeline from a config file");
    std::string run_config, run_output;
    run->add_option("--config", run_config)->required();
    run->add_option("--output", run_output, "override output.dir");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "noiselens: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    if (threads == 0) {
        if (const char* env = std::getenv("NOISELENS_THREADS")) threads = std::strtoul(env, nullptr, 10);
    }
    nl::set_max_threads(threads);

    std::string stage = "setup";
    try {
        if (synth->parsed()) {
            stage = "synth";
            noise.kind = nl::parse_noise_kind(noise_kind);
            noise.pair_map = nl::parse_pair_map(pairs);
            const auto noisy = nl::inject_noise(nl::make_blobs(blobs), noise);
            nl::save_dataset(noisy.dataset, synth_out, encoding(synth_binary));
            if (!corruption_out.empty()) nl::save_corruption(noisy.record, noisy.dataset.size(), corruption_out);
            if (!centers_out.empty()) {
                nl::save_bank(nl::ClassEmbeddingBank(nl::blob_centers(blobs), "blob-centers"), centers_out);
            }
            if (!test_out.empty()) {
                nl::save_dataset(nl::make_blob_test_set(blobs, test_seed, test_per_class), test_out,
                                 encoding(synth_binary));
            }
            std::cout << "samples=" << noisy.dataset.size() << " flipped=" << noisy.record.flipped_ids.size()
                      << " realized_rate=" << noisy.record.realized_rate << '\n';
        } else if (score->parsed()) {
            stage = "score";
            const auto data = nl::load_dataset(score_dataset);
            std::optional<nl::ScoreMatrix> scores;
            if (score_oracle) {
                scores = nl::oracle_scores(data, oracle_confidence);
            } else {
                if (score_bank.empty()) throw nl::Error("score needs --bank or --oracle");
                std::optional<nl::EmbeddingTable> table;
                if (!score_embeddings.empty()) table = nl::load_embeddings(score_embeddings);
                scores = nl::score_with_surrogate(data, nl::CosineScorerSource{nl::load_bank(score_bank), scorer, table});
            }
            nl::save_scores(*scores, score_out, encoding(score_binary));
        } else if (select->parsed()) {
            stage = "select";
            const auto data = nl::load_dataset(sel_dataset);
            const auto scores = nl::load_scores(sel_scores, data);
            const auto crit = nl::parse_criterion(criterion);
            std::optional<nl::SelectionMask> mask;
            if (crit == nl::SelectionCriterion::confidence) {
                mask = nl::select_by_confidence(data, scores, rho);
            } else {
                if (sel_scores_b.empty()) throw nl::Error(criterion + " selection needs --scores-b");
                const auto scores_b = nl::load_scores(sel_scores_b, data);
                auto pc = nl::select_by_prompt_consistency(data, scores, scores_b, mu);
                mask = crit == nl::SelectionCriterion::prompt_consistency
                           ? std::move(pc)
                           : nl::combine_masks(nl::select_by_confidence(data, scores, rho), pc);
            }
            nl::save_mask(*mask, sel_out);
            std::cout << "selected=" << mask->selected_count() << " total=" << mask->size() << '\n';
        } else if (priors->parsed()) {
            stage = "priors";
            const auto data = nl::load_dataset(pr_dataset);
            const auto scores = nl::load_scores(pr_scores, data);
            const auto mask = nl::load_mask(pr_mask);
            const auto tm = nl::estimate_transition_matrix(data, scores);
            for (const auto& w : tm.warnings()) std::cerr << "noiselens: warning: " << w << '\n';
            const auto prior = nl::compute_class_prior(nl::apply_mask(data, mask), data.label_space());
            nl::save_transition_matrix(tm, pr_tm_out);
            nl::save_class_prior(prior, pr_prior_out);
        } else if (trainc->parsed()) {
            stage = "train";
            const auto data = nl::load_dataset(tr_dataset);
            const auto clean = nl::apply_mask(data, nl::load_mask(tr_mask));
            const auto trained = nl::train(clean, nl::load_transition_matrix(tr_tm), nl::load_class_prior(tr_prior),
                                           margin, train_cfg);
            nl::save_classifier(trained.classifier, tr_out, encoding(tr_binary));
            for (std::size_t e = 0; e < trained.epoch_loss.size(); ++e) {
                std::cout << "epoch=" << e + 1 << " loss=" << trained.epoch_loss[e]
                          << " train_accuracy=" << trained.epoch_accuracy[e] << '\n';
            }
            std::cout << "wall_seconds=" << trained.wall_seconds << '\n';
        } else if (report->parsed()) {
            stage = "report";
            std::vector<nl::ReportRecord> records;
            std::optional<nl::Dataset> test_set;
            if (!rep_test.empty()) test_set = nl::load_dataset(rep_test);
            if (!rep_clf.empty()) {
                if (!test_set) throw nl::Error("--classifier needs --test");
                const auto clf = nl::load_classifier(rep_clf);
                const auto pred = nl::predict(clf, *test_set);
                const auto& ref = test_set->has_ground_truth() ? test_set->ground_truth() : test_set->noisy_labels();
                nl::ReportRecord r{"test", {}};
                r.add("samples", test_set->size()).add("top1", nl::accuracy(pred.labels, ref));
                if (topk > 1 && topk <= test_set->num_classes()) {
                    r.add("top" + std::to_string(topk), nl::top_k_accuracy(pred.probabilities, ref, topk));
                }
                records.push_back(r);
                const auto recall = nl::per_class_recall(pred.labels, ref, test_set->num_classes());
                for (std::size_t k = 0; k < recall.size(); ++k) {
                    nl::ReportRecord rc{"class_recall", {}};
                    records.push_back(rc.add("class", k).add("recall", recall[k]));
                }
            }
            std::optional<nl::Dataset> train_set;
            if (!rep_train.empty()) train_set = nl::load_dataset(rep_train);
            std::optional<nl::ScoreMatrix> scores;
            if (!rep_scores.empty()) {
                if (!train_set) throw nl::Error("--scores needs --train-dataset");
                scores = nl::load_scores(rep_scores, *train_set);
                std::vector<double> conf(train_set->size());
                for (std::size_t i = 0; i < conf.size(); ++i) conf[i] = (*scores)(i, train_set->noisy_label(i));
                auto h = nl::to_records(nl::confidence_histogram(conf, "confidence"));
                records.insert(records.end(), h.begin(), h.end());
            }
            if (!rep_mask.empty()) {
                if (!train_set) throw nl::Error("--mask needs --train-dataset");
                const auto mask = nl::load_mask(rep_mask);
                if (train_set->has_ground_truth()) records.push_back(nl::to_record(nl::selection_quality(mask, *train_set)));
            }
            if (!rep_sweep.empty()) {
                if (!train_set || !scores) throw nl::Error("--sweep needs --train-dataset and --scores");
                const auto thresholds = parse_list(rep_sweep);
                const auto sweep = nl::threshold_sweep(*train_set, *scores, thresholds,
                                                       nl::SweepBundle{sweep_margin, sweep_train, test_set});
                auto s = nl::to_records(sweep);
                records.insert(records.end(), s.begin(), s.end());
            }
            std::cout << nl::render(records, nl::parse_report_format(rep_format));
        } else if (run->parsed()) {
            stage = "config";
            auto file = nl::ConfigFile::load(run_config);
            if (!run_output.empty()) file.set("output.dir", std::filesystem::absolute(run_output).string());
            const auto cfg = nl::ExperimentConfig::from(file);
            const auto result = nl::run_experiment(cfg);
            if (result.exit_code != 0) {
                std::cerr << "noiselens: error [" << result.failed_stage << "]: " << result.message << '\n';
                return result.exit_code;
            }
            std::cout << "output=" << result.output_dir.string() << " selected=" << result.mask->selected_count();
            if (result.test_accuracy) std::cout << " test_accuracy=" << *result.test_accuracy;
            std::cout << " wall_seconds=" << result.training->wall_seconds << '\n';
        }
    } catch (const std::exception& e) {
        return fail(stage, e);
    }
    return 0;
}
