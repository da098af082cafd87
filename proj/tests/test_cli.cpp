#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "support.hpp"

namespace {

struct Run {
    int code;
    std::string out;
};

Run tmq_cli(const std::string& args, const tmq::test::TempDir& dir) {
    const std::string out = dir.file("stdout.txt");
    const std::string cmd = std::string(TMQ_CLI_PATH) + " " + args + " > " + out + " 2> " + dir.file("stderr.txt");
    const int status = std::system(cmd.c_str());
    std::ifstream in(out);
    std::stringstream ss;
    ss << in.rdbuf();
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string read(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

}  // namespace

TEST(Cli, SimulateIsByteStable) {
    tmq::test::TempDir dir("cli_sim");
    write(dir.file("run.ini"), "[schedule]\nname = ramsey\nT = 0.08\n[scan]\nvariable = detuning\nstart = -25\nstop = 25\npoints = 30\n");
    const auto a = tmq_cli("simulate --config " + dir.file("run.ini") + " --seed 3 --shots 20", dir);
    const auto b = tmq_cli("simulate --config " + dir.file("run.ini") + " --seed 3 --shots 20", dir);
    ASSERT_EQ(a.code, 0);
    EXPECT_EQ(a.out, b.out);
    size_t lines = 0;
    for (char ch : a.out) lines += ch == '\n';
    EXPECT_EQ(lines, 2400u + 3u);  // two comment lines and the header
}

TEST(Cli, ExitCodes) {
    tmq::test::TempDir dir("cli_exit");
    write(dir.file("bad.ini"), "[schedule]\nname = bogus\n");
    const auto bad = tmq_cli("simulate --config " + dir.file("bad.ini") + " --seed 1", dir);
    EXPECT_EQ(bad.code, 2);
    EXPECT_NE(read(dir.file("stderr.txt")).find("schedule.name"), std::string::npos);

    EXPECT_EQ(tmq_cli("simulate --seed 1 --config /nonexistent.ini", dir).code, 4);
    EXPECT_EQ(tmq_cli("simulate", dir).code, 2);  // no seed
    EXPECT_EQ(tmq_cli("frobnicate", dir).code, 2);
    EXPECT_EQ(tmq_cli("fit --model gaussian_decay /nonexistent.csv", dir).code, 4);

    // Two points cannot determine two free parameters.
    write(dir.file("tiny.csv"), "x,y\n0,1\n");
    EXPECT_EQ(tmq_cli("fit --model gaussian_decay " + dir.file("tiny.csv"), dir).code, 3);
}

TEST(Cli, ScanThenFit) {
    tmq::test::TempDir dir("cli_fit");
    write(dir.file("run.ini"),
          "[schedule]\nname = hold\ninitial = g3_0\n[scan]\nvariable = T\nvalues = 0, 5, 10, 20, 30, 45, 60\n"
          "observable = atoms\n[fit]\nfixed = tau\n");
    ASSERT_EQ(tmq_cli("scan --config " + dir.file("run.ini") + " --seed 2 --shots 3 --out " + dir.file("scan.csv"), dir)
                  .code,
              0);
    const auto fit = tmq_cli("fit --config " + dir.file("run.ini") + " --model two_body_loss " + dir.file("scan.csv"), dir);
    ASSERT_EQ(fit.code, 0);
    EXPECT_NE(fit.out.find("\"beta_cm3_per_s\""), std::string::npos);
    EXPECT_NE(fit.out.find("\"config\""), std::string::npos);
}

TEST(Cli, ReproduceWritesTables) {
    tmq::test::TempDir dir("cli_rep");
    ASSERT_EQ(tmq_cli("reproduce --figure fig8 --seed 1 --out " + dir.file("out"), dir).code, 0);
    EXPECT_NE(read(dir.file("out/fig8_clock_rabi.csv")).find("# schema=1"), std::string::npos);
    EXPECT_NE(read(dir.file("out/fig8_fit.csv")).find("reflection_intensity"), std::string::npos);
    EXPECT_EQ(tmq_cli("reproduce --figure fig99 --seed 1", dir).code, 2);
}

TEST(Cli, CalibrateReadoutRoundTrip) {
    tmq::test::TempDir dir("cli_cal");
    write(dir.file("run.ini"),
          "[schedule]\nname = probe_scan\n[scan]\nvariable = first_probe\n"
          "values = 100e-6, 200e-6, 400e-6, 600e-6, 800e-6, 1e-3, 2e-3\n");
    ASSERT_EQ(
        tmq_cli("simulate --config " + dir.file("run.ini") + " --seed 4 --shots 4 --out " + dir.file("rows.csv"), dir).code,
        0);
    ASSERT_EQ(tmq_cli("calibrate-readout " + dir.file("rows.csv") + " --out " + dir.file("cal.txt"), dir).code, 0);
    EXPECT_NE(read(dir.file("cal.txt")).find("eps_43"), std::string::npos);
    // The written calibration feeds back into a run.
    write(dir.file("use.ini"), "[readout]\ncalibration = " + dir.file("cal.txt") + "\n");
    EXPECT_EQ(tmq_cli("simulate --config " + dir.file("use.ini") + " --seed 1 --shots 1", dir).code, 0);
}
