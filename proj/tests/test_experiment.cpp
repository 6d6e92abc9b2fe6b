#include <gtest/gtest.h>

#include <fstream>

#include "noiselens/error.hpp"
#include "noiselens/experiment.hpp"
#include "support.hpp"

using namespace noiselens;
using testing_support::read_file;
using testing_support::TempDir;

namespace {

const char* kSynthConfig = R"(# small synthetic run
synth.classes = 3
synth.per_class = 60
synth.dim = 4
synth.separation = 2.5
synth.seed = 5
noise.kind = sym
noise.rate = 0.3
noise.seed = 6
scorer.source = centers
selection.rho = 0.5
train.epochs = 3
train.batch_size = 32
test.source = synth
test.per_class = 30
)";

ExperimentConfig config_in(const TempDir& dir, const std::string& text, const std::string& out) {
    auto file = ConfigFile::parse(text);
    file.set("output.dir", (dir / out).string());
    return ExperimentConfig::from(file);
}

}  // namespace

TEST(Config, ParsesAndRejects) {
    const auto f = ConfigFile::parse("a.b = 1\n# note\n\nc.d=x y\n");
    EXPECT_EQ(f.get("a.b", ""), "1");
    EXPECT_EQ(f.get("c.d", ""), "x y");
    EXPECT_EQ(f.get_u64("a.b", 0), 1u);
    EXPECT_THROW(ConfigFile::parse("a.b = 1\na.b = 2\n"), Error);
    EXPECT_THROW(ConfigFile::parse("nodot = 1\n"), Error);
    EXPECT_THROW(ConfigFile::parse("just text\n"), Error);
    EXPECT_THROW(f.get_double("c.d", 0.0), Error);
    EXPECT_THROW(f.require("x.y"), Error);
    EXPECT_THROW(ExperimentConfig::from(ConfigFile::parse("train.epoch = 3\n")), Error);
}

TEST(Config, SecondScoreSourceRequiredUpFront) {
    TempDir dir("cfg");
    const std::string text = "scorer.source = file\nscorer.file = a.txt\nselection.criterion = prompt-consistency\n";
    EXPECT_THROW(config_in(dir, text, "out"), Error);
    EXPECT_FALSE(std::filesystem::exists(dir / "out"));
    EXPECT_THROW(config_in(dir, "selection.criterion = conjunction\n", "out"), Error);
}

TEST(Config, RelativePathsFollowConfigFile) {
    TempDir dir("cfg-rel");
    std::filesystem::create_directories(dir / "sub");
    {
        std::ofstream out(dir / "sub" / "run.cfg");
        out << "dataset.source = file\ndataset.path = data.txt\nscorer.source = file\nscorer.file = s.txt\n";
    }
    const auto cfg = ExperimentConfig::from(ConfigFile::load(dir / "sub" / "run.cfg"));
    EXPECT_EQ(cfg.dataset_path, dir / "sub" / "data.txt");
    EXPECT_EQ(cfg.score_file, dir / "sub" / "s.txt");
}

TEST(Experiment, SynthRunWritesArtifactsAndManifest) {
    TempDir dir("exp");
    const auto result = run_experiment(config_in(dir, kSynthConfig, "run"));
    ASSERT_EQ(result.exit_code, 0) << result.message;
    for (const char* name : {"dataset.txt", "corruption.txt", "scores.txt", "mask.txt", "transition.txt", "prior.txt",
                             "classifier.txt", "report.txt", "manifest.txt"}) {
        EXPECT_TRUE(std::filesystem::exists(dir / "run" / name)) << name;
    }
    const auto manifest = read_file(dir / "run" / "manifest.txt");
    EXPECT_NE(manifest.find("status=ok"), std::string::npos);
    EXPECT_NE(manifest.find("seed.synth=5"), std::string::npos);
    EXPECT_NE(manifest.find("artifact.classifier.txt="), std::string::npos);
    ASSERT_TRUE(result.test_accuracy.has_value());
    EXPECT_GT(*result.test_accuracy, 0.6);
}

TEST(Experiment, RepeatedRunsAreByteIdentical) {
    TempDir dir("exp-rep");
    const auto a = run_experiment(config_in(dir, kSynthConfig, "a"));
    const auto b = run_experiment(config_in(dir, kSynthConfig, "b"));
    ASSERT_EQ(a.exit_code, 0);
    ASSERT_EQ(a.artifacts, b.artifacts);
    for (const auto& name : a.artifacts) EXPECT_EQ(read_file(dir / "a" / name), read_file(dir / "b" / name)) << name;
    EXPECT_EQ(read_file(dir / "a" / "manifest.txt"), read_file(dir / "b" / "manifest.txt"));
}

TEST(Experiment, FileComposedRunMatchesInProcess) {
    TempDir dir("exp-file");
    const auto synth = run_experiment(config_in(dir, kSynthConfig, "synth"));
    ASSERT_EQ(synth.exit_code, 0);
    std::string text = "dataset.source = file\ndataset.path = " + (dir / "synth" / "dataset.txt").string() +
                       "\nscorer.source = file\nscorer.file = " + (dir / "synth" / "scores.txt").string() +
                       "\nselection.rho = 0.5\ntrain.epochs = 3\ntrain.batch_size = 32\n";
    const auto composed = run_experiment(config_in(dir, text, "file"));
    ASSERT_EQ(composed.exit_code, 0) << composed.message;
    EXPECT_EQ(composed.mask->verdicts, synth.mask->verdicts);
    EXPECT_EQ(read_file(dir / "file" / "classifier.txt"), read_file(dir / "synth" / "classifier.txt"));
    EXPECT_EQ(read_file(dir / "file" / "transition.txt"), read_file(dir / "synth" / "transition.txt"));
}

TEST(Experiment, FailureNamesStage) {
    TempDir dir("exp-fail");
    const auto missing = run_experiment(
        config_in(dir, "dataset.source = file\ndataset.path = /nonexistent/data.txt\nscorer.source = oracle\n", "m"));
    EXPECT_EQ(missing.exit_code, 1);
    EXPECT_EQ(missing.failed_stage, "dataset");
    const auto manifest = read_file(dir / "m" / "manifest.txt");
    EXPECT_NE(manifest.find("status=failed"), std::string::npos);
    EXPECT_NE(manifest.find("failed_stage=dataset"), std::string::npos);

    auto file = ConfigFile::parse(std::string(kSynthConfig).replace(std::string(kSynthConfig).find("selection.rho = 0.5"),
                                                                     19, "selection.rho = 1.0"));
    file.set("output.dir", (dir / "e").string());
    const auto none = run_experiment(ExperimentConfig::from(file));
    EXPECT_EQ(none.exit_code, 1);
    EXPECT_EQ(none.failed_stage, "selection");
    EXPECT_NE(none.message.find("empty selection"), std::string::npos);
}
