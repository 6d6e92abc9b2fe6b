#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <fstream>

#include "noiselens/core_data.hpp"
#include "noiselens/selection.hpp"
#include "support.hpp"

using testing_support::read_file;
using testing_support::TempDir;

namespace {

struct Outcome {
    int code = -1;
    std::string output;
};

Outcome cli(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + (env.empty() ? "" : " ") + std::string(NOISELENS_CLI) + " " + args + " 2>&1";
    Outcome o;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return o;
    std::array<char, 4096> buf{};
    std::size_t got;
    while ((got = fread(buf.data(), 1, buf.size(), pipe)) > 0) o.output.append(buf.data(), got);
    const int status = pclose(pipe);
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return o;
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST(Cli, HelpExitsZero) {
    const auto r = cli("--help");
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.output.find("Usage"), std::string::npos);
    for (const char* sub : {"synth", "score", "select", "priors", "train", "report", "run"}) {
        EXPECT_EQ(cli(std::string(sub) + " --help").code, 0) << sub;
    }
}

TEST(Cli, UsageErrorsExitTwo) {
    auto r = cli("synth --bogus 1 --out x");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.output.find("Usage"), std::string::npos);
    EXPECT_EQ(cli("").code, 2);
    EXPECT_EQ(cli("select --dataset a --scores b").code, 2);
    EXPECT_EQ(cli("select --dataset a --scores b --out c --criterion small-loss").code, 2);
}

TEST(Cli, StageFailureExitsOne) {
    TempDir dir("cli-fail");
    const auto r = cli("select --dataset " + q(dir / "none.txt") + " --scores x --out " + q(dir / "m.txt"));
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.output.find("error [select]"), std::string::npos);
}

TEST(Cli, ComposedPipeline) {
    TempDir dir("cli-pipe");
    auto ok = [](const Outcome& r) {
        EXPECT_EQ(r.code, 0) << r.output;
        return r.code == 0;
    };
    ASSERT_TRUE(ok(cli("synth --classes 3 --per-class 80 --dim 6 --sep 2.5 --noise sym --rate 0.4 --seed 3 --noise-seed 4"
                       " --out " + q(dir / "d.txt") + " --corruption " + q(dir / "c.txt") + " --centers " +
                       q(dir / "bank.txt") + " --test-out " + q(dir / "t.txt") + " --test-per-class 50")));
    ASSERT_TRUE(ok(cli("score --dataset " + q(dir / "d.txt") + " --bank " + q(dir / "bank.txt") + " --out " +
                       q(dir / "s.txt"))));
    ASSERT_TRUE(ok(cli("score --dataset " + q(dir / "d.txt") + " --bank " + q(dir / "bank.txt") + " --out " +
                           q(dir / "s1.txt"),
                       "NOISELENS_THREADS=1")));
    EXPECT_EQ(read_file(dir / "s.txt"), read_file(dir / "s1.txt"));
    ASSERT_TRUE(ok(cli("select --dataset " + q(dir / "d.txt") + " --scores " + q(dir / "s.txt") + " --rho 0.5 --out " +
                       q(dir / "m.txt"))));
    const auto data = noiselens::load_dataset(dir / "d.txt");
    const auto in_process = noiselens::select_by_confidence(data, noiselens::load_scores(dir / "s.txt", data), 0.5);
    const auto from_cli = noiselens::load_mask(dir / "m.txt");
    EXPECT_EQ(from_cli.verdicts, in_process.verdicts);
    EXPECT_EQ(from_cli.scores, in_process.scores);
    ASSERT_TRUE(ok(cli("priors --dataset " + q(dir / "d.txt") + " --scores " + q(dir / "s.txt") + " --mask " +
                       q(dir / "m.txt") + " --tm-out " + q(dir / "tm.txt") + " --prior-out " + q(dir / "p.txt"))));
    ASSERT_TRUE(ok(cli("train --dataset " + q(dir / "d.txt") + " --mask " + q(dir / "m.txt") + " --tm " +
                       q(dir / "tm.txt") + " --prior " + q(dir / "p.txt") + " --epochs 3 --out " + q(dir / "clf.txt"))));
    const auto report = cli("report --format records --test " + q(dir / "t.txt") + " --classifier " +
                            q(dir / "clf.txt") + " --train-dataset " + q(dir / "d.txt") + " --scores " +
                            q(dir / "s.txt") + " --mask " + q(dir / "m.txt"));
    ASSERT_TRUE(ok(report));
    EXPECT_NE(report.output.find("kind=test"), std::string::npos);
    EXPECT_NE(report.output.find("kind=histogram"), std::string::npos);
    EXPECT_NE(report.output.find("kind=selection_quality"), std::string::npos);

    {
        std::ofstream cfg(dir / "run.cfg");
        cfg << "dataset.source = file\ndataset.path = d.txt\nscorer.source = file\nscorer.file = s.txt\n"
               "selection.rho = 0.5\ntrain.epochs = 3\noutput.dir = out\n";
    }
    ASSERT_TRUE(ok(cli("run --config " + q(dir / "run.cfg"))));
    EXPECT_EQ(read_file(dir / "out" / "classifier.txt"), read_file(dir / "clf.txt"));
    EXPECT_EQ(read_file(dir / "out" / "mask.txt"), read_file(dir / "m.txt"));
    EXPECT_EQ(read_file(dir / "out" / "transition.txt"), read_file(dir / "tm.txt"));
}

TEST(Cli, PromptConsistencyNeedsSecondScores) {
    TempDir dir("cli-pc");
    ASSERT_EQ(cli("synth --classes 2 --per-class 5 --out " + q(dir / "d.txt")).code, 0);
    ASSERT_EQ(cli("score --dataset " + q(dir / "d.txt") + " --oracle --out " + q(dir / "s.txt")).code, 0);
    const auto r = cli("select --dataset " + q(dir / "d.txt") + " --scores " + q(dir / "s.txt") +
                       " --criterion prompt-consistency --out " + q(dir / "m.txt"));
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.output.find("--scores-b"), std::string::npos);
    EXPECT_EQ(cli("select --dataset " + q(dir / "d.txt") + " --scores " + q(dir / "s.txt") + " --scores-b " +
                  q(dir / "s.txt") + " --criterion conjunction --out " + q(dir / "m.txt"))
                  .code,
              0);
}

TEST(Cli, MinimalSyntheticRun) {
    TempDir dir("cli-min");
    {
        std::ofstream cfg(dir / "min.cfg");
        cfg << "synth.classes = 2\nsynth.per_class = 25\nnoise.kind = sym\nnoise.rate = 0.2\n"
               "scorer.source = oracle\noutput.dir = out\n";
    }
    const auto r = cli("--threads 2 run --config " + q(dir / "min.cfg"));
    ASSERT_EQ(r.code, 0) << r.output;
    for (const char* name : {"scores.txt", "mask.txt", "transition.txt", "prior.txt", "classifier.txt", "report.txt",
                             "manifest.txt"}) {
        EXPECT_TRUE(std::filesystem::exists(dir / "out" / name)) << name;
    }
    {
        std::ofstream cfg(dir / "bad.cfg");
        cfg << "dataset.source = file\ndataset.path = missing.txt\nscorer.source = oracle\noutput.dir = bad\n";
    }
    const auto bad = cli("run --config " + q(dir / "bad.cfg"));
    EXPECT_EQ(bad.code, 1);
    EXPECT_NE(bad.output.find("error [dataset]"), std::string::npos);
    EXPECT_NE(read_file(dir / "bad" / "manifest.txt").find("failed_stage=dataset"), std::string::npos);
}
