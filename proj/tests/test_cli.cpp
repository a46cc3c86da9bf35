#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(LATENTSEQ_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("latentseq_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST(Cli, GradCheckPasses) { EXPECT_EQ(run("grad-check --seed 2"), 0); }

TEST(Cli, ExitCodes) {
    const auto dir = scratch("codes");
    EXPECT_EQ(run("--no-such-flag"), 2);
    std::ofstream(dir / "bad.txt") << "hiden_size = 3\n";
    EXPECT_EQ(run("train --config " + (dir / "bad.txt").string()), 2);
    std::ofstream(dir / "missing.txt") << "train_data = " << (dir / "nope.frames").string() << "\n";
    EXPECT_EQ(run("train --config " + (dir / "missing.txt").string()), 3);
    EXPECT_EQ(run("eval --checkpoint " + (dir / "nope.ckpt").string()), 3);
}

TEST(Cli, EndToEndTokens) {
    const auto dir = scratch("e2e");
    const auto data = (dir / "data").string();
    ASSERT_EQ(run("make-data --kind parity-tokens --count 24 --valid 8 --test 8 --length 10 --seed 3 --out " + data), 0);
    ASSERT_TRUE(fs::exists(dir / "data" / "config.txt"));
    const auto out = (dir / "run").string();
    ASSERT_EQ(run("train --config " + data + "/config.txt --set max_updates=6 --set eval_interval=3 --set hidden_size=8"
                  " --set backward_hidden_size=8 --set head_hidden=8 --alpha 0.01 --output " + out),
              0);
    for (auto f : {"config.txt", "metrics.csv", "eval.csv", "best.ckpt", "last.ckpt"}) EXPECT_TRUE(fs::exists(dir / "run" / f)) << f;
    EXPECT_EQ(run("eval --checkpoint " + out + "/last.ckpt --iwae-samples 3"), 0);
    EXPECT_EQ(run("sample --checkpoint " + out + "/last.ckpt --count 2 --steps 5 --out " + (dir / "s.txt").string()), 0);
    EXPECT_TRUE(fs::exists(dir / "s.txt"));
    EXPECT_EQ(run("interpolate --checkpoint " + out + "/last.ckpt --from \"zero w1 even even\" --to \"one w2 odd\" --steps 2"),
              0);
    EXPECT_EQ(run("interpolate --checkpoint " + out + "/last.ckpt --from \"zero banana\" --to \"one odd\""), 3);
    // Resume to a larger budget; the shape-defining keys cannot change.
    EXPECT_EQ(run("train --resume " + out + "/last.ckpt --set max_updates=8"), 0);
    EXPECT_EQ(run("train --resume " + out + "/last.ckpt --set hidden_size=16 --set max_updates=9"), 2);
}
