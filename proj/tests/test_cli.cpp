#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

TEST_SUITE_BEGIN("cli");

namespace {

const std::string kCli = GFBSDE_CLI_PATH;
const std::string kSrc = GFBSDE_SOURCE_DIR;

int run(const std::string& args, const std::string& log = "/dev/null") {
    const std::string cmd = kCli + " " + args + " >" + log + " 2>&1";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace

TEST_CASE("certify: certified catalog problem exits zero with the right verdict") {
    const std::string out = "/tmp/gfbsde_test_cert.json";
    REQUIRE(run("certify --problem catalog:weakly-coupled --out " + out) == 0);
    const auto j = nlohmann::json::parse(slurp(out));
    CHECK(j["verdict"] == "EXISTS_UNIQUE_P_GE2");
    CHECK(j["constants"]["lambda_p"].get<double>() < 1.0);
    CHECK(j["constants"]["p_prime"].is_number());
    CHECK(j["cp_formula"] == "pow(10 * p, p / 2)");
}

TEST_CASE("certify: degenerate linear entry is not certified (exit 2)") {
    CHECK(run("certify --problem catalog:classical-linear --out /tmp/gfbsde_test_cert2.json") ==
          2);
}

TEST_CASE("certify: BDG override changes the report") {
    const std::string out = "/tmp/gfbsde_test_cert3.json";
    REQUIRE(run("certify --problem catalog:weakly-coupled --cp-formula 1 --out " + out) == 0);
    const auto j = nlohmann::json::parse(slurp(out));
    CHECK(j["constants"]["bdg_c"].get<double>() == 1.0);
    CHECK(j["constants"]["lambda_p"].get<double>() < 0.26);
}

TEST_CASE("malformed problem file exits 1 and names the location") {
    const std::string bad = "/tmp/gfbsde_test_bad.problem";
    {
        std::ofstream f(bad);
        f << "[setting]\nsigma_low = 0.9\nsigma_high = 1.1\np = 2\nbeta = 4\nn = 1\nT = 1\n"
             "x0 = 0\n[coefficients]\nb = 1 +\nh = 0\nsigma = 1\nf = 0\ng = 0\nphi = 0\n"
             "L1 = 0.1\nL2 = 0\nL3 = 0.1\n";
    }
    const std::string log = "/tmp/gfbsde_test_bad.log";
    CHECK(run("certify --problem " + bad, log) == 1);
    const std::string msg = slurp(log);
    CHECK(msg.find("line 10") != std::string::npos);
}

TEST_CASE("outputs are byte-identical across reruns and thread counts") {
    const std::string a = "/tmp/gfbsde_det_a.csv", b = "/tmp/gfbsde_det_b.csv",
                      c = "/tmp/gfbsde_det_c.csv";
    const std::string args =
        " gexp --problem catalog:weakly-coupled --payoff \"x * x\" --n-paths 4000 --seed 99";
    REQUIRE(run("--threads 1" + args + " --out " + a) == 0);
    REQUIRE(run("--threads 2" + args + " --out " + b) == 0);
    REQUIRE(run("--threads 2" + args + " --out " + c) == 0);
    const std::string sa = slurp(a);
    CHECK(sa == slurp(b));
    CHECK(sa == slurp(c));
    CHECK(sa.find("# seed: 99") != std::string::npos);
}

TEST_CASE("environment seed override is honoured and logged") {
    const std::string out = "/tmp/gfbsde_env_seed.csv";
    const std::string cmd = "GFBSDE_SEED=1234 " + kCli +
                            " gexp --problem catalog:weakly-coupled --payoff x --n-paths 100 "
                            "--out " +
                            out + " >/dev/null 2>&1";
    REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
    CHECK(slurp(out).find("# seed: 1234") != std::string::npos);
}

TEST_CASE("solve-fbsde emits a trace and converges on the decoupled entry") {
    const std::string out = "/tmp/gfbsde_fbsde.csv";
    REQUIRE(run("solve-fbsde --problem catalog:decoupled --n-paths 500 --out " + out) == 0);
    const std::string slices = slurp(out);
    CHECK(slices.find("y0") != std::string::npos);
    CHECK(slices.find("EXISTS_UNIQUE_P_GE2") != std::string::npos);
    const std::string trace = slurp(out + ".trace.csv");
    CHECK(trace.find("m,d_x,d_y,ratio,envelope") != std::string::npos);
}

TEST_CASE("problem files shipped in the repository parse and run") {
    const std::string out = "/tmp/gfbsde_file.json";
    REQUIRE(run("certify --problem " + kSrc + "/problems/weakly-coupled.problem --out " + out) ==
            0);
    const auto j = nlohmann::json::parse(slurp(out));
    CHECK(j["verdict"] == "EXISTS_UNIQUE_P_GE2");
}

TEST_CASE("numerical blowups exit with the dedicated code") {
    const std::string stiff = "/tmp/gfbsde_test_stiff.problem";
    {
        std::ofstream f(stiff);
        f << "[setting]\nsigma_low = 0.9\nsigma_high = 1.1\np = 2\nbeta = 4\nn = 1\nT = 1\n"
             "x0 = 1\n[coefficients]\nb = 10000000 * x\nh = 0\nsigma = 1\nf = 0\ng = 0\n"
             "phi = 0\nL1 = 10000000\nL2 = 0\nL3 = 0.1\n[grid]\nn_steps = 64\nn_space = 65\n";
    }
    CHECK(run("solve-sde --problem " + stiff + " --n-paths 50") == 3);
}

TEST_CASE("compare battery runs end to end at smoke scale") {
    const std::string out = "/tmp/gfbsde_cmp.csv";
    REQUIRE(run("compare --problem catalog:monotone-pair --theorem 42 --seeds 2 --grids 16 "
                "--n-paths 500 --out " +
                out) == 0);
    const std::string csv = slurp(out);
    CHECK(csv.find("verdict") != std::string::npos);
    CHECK(csv.find("PASS") != std::string::npos);
    CHECK(csv.find("FAIL") == std::string::npos);
}

TEST_SUITE_END();
