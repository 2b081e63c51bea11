#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

// End-to-end tests of the cstk binary: exit codes, file formats,
// determinism, and the model-file diagnostics.

namespace {

struct RunResult {
    int exit_code = -1;
    std::string out;
};

RunResult run_cli(const std::string& args) {
    const std::string cmd = std::string(CSTK_CLI_PATH) + " " + args + " 2>/dev/null";
    RunResult r;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buf{};
    std::size_t got;
    while ((got = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), got);
    const int status = pclose(pipe);
    r.exit_code = WEXITSTATUS(status);
    return r;
}

std::string temp_path(const std::string& name) {
    return std::string("/tmp/cstk_test_") + name;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path);
    REQUIRE(f.good());
    f << content;
}

std::string read_file(const std::string& path) {
    std::ifstream f(path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("limit subcommand: fc golden number at b = 0") {
    const RunResult r = run_cli("limit --method fc --n 0 --b 0 --cl 0.90");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("method,n,cl,lower,upper,empty") == 0);
    CHECK(r.out.find("feldman-cousins") != std::string::npos);
    CHECK(r.out.find("2.435") != std::string::npos);
}

TEST_CASE("limit subcommand: classical empty interval is representable") {
    const RunResult r = run_cli("limit --method classical --n 0 --b 3.0 --cl 0.90");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find(",,,1") != std::string::npos); // empty bounds + empty flag
}

TEST_CASE("bayes limit through a model file (table 2 cell)") {
    const std::string model = temp_path("table2.model");
    write_file(model, "# table 2, b = 3, eff 10%\n"
                      "b_mean = 3.0\n"
                      "b_rel_sigma = 0\n"
                      "eff_mean = 1.0\n"
                      "eff_rel_sigma = 0.1\n"
                      "eff_form = gamma-from-count\n");
    const RunResult r =
        run_cli("limit --method bayes --model " + model + " --n 3 --cl 0.90 --format json");
    CHECK(r.exit_code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["interval"]["upper"].get<double>() == doctest::Approx(4.46).epsilon(0.02 / 4.46));
}

TEST_CASE("model file diagnostics carry line numbers") {
    const std::string model = temp_path("broken.model");
    write_file(model, "b_mean = 3.0\neff_mean = 1.0\nb_relsigma = 0.1\n");
    const std::string cmd = std::string(CSTK_CLI_PATH) + " limit --method bayes --model " +
                            model + " --n 0 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string err;
    std::array<char, 4096> buf{};
    std::size_t got;
    while ((got = fread(buf.data(), 1, buf.size(), pipe)) > 0) err.append(buf.data(), got);
    const int status = pclose(pipe);
    CHECK(WEXITSTATUS(status) == 2);
    CHECK(err.find(":3:") != std::string::npos); // offending line
    CHECK(err.find("b_relsigma") != std::string::npos);
}

TEST_CASE("pvalue subcommand trivial case") {
    const RunResult r = run_cli("pvalue --n 0 --b 3.0");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("p,sigma_equiv\n1,0") != std::string::npos);
}

TEST_CASE("small probabilities print in scientific notation") {
    const RunResult r = run_cli("pvalue --n 16 --b 3.0");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("e-07") != std::string::npos);
}

TEST_CASE("cls subcommand and upper limit") {
    const RunResult r = run_cli("cls --n 0 --b 3 --s 3");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("0.0497") != std::string::npos);
    CHECK(r.out.find(",1") != std::string::npos); // excluded at 5%

    const RunResult ul = run_cli("cls --n 0 --b 3 --ul --cl 0.90");
    CHECK(ul.exit_code == 0);
    CHECK(ul.out.find("2.3025") != std::string::npos);
}

TEST_CASE("stochastic commands require an explicit seed") {
    const RunResult r = run_cli("coverage --method flip-flop --cl 0.9 --s-min 2 --s-max 2 "
                                "--ds 1 --n-toys 10000");
    CHECK(r.exit_code == 2); // usage error: no default seed
    const RunResult ok = run_cli("coverage --method flip-flop --cl 0.9 --s-min 2 --s-max 2 "
                                 "--ds 1 --n-toys 10000 --seed 5");
    CHECK(ok.exit_code == 0);
}

TEST_CASE("coverage CSV has the exact contract columns and is byte-stable") {
    const std::string out1 = temp_path("cov1.csv"), out2 = temp_path("cov2.csv");
    const std::string args = "coverage --method classical --model " + temp_path("cov.model") +
                             " --cl 0.9 --s-min 0 --s-max 1 --ds 0.5 --n-toys 10000 --seed 7 ";
    write_file(temp_path("cov.model"), "b_mean = 3.0\neff_mean = 1.0\n");
    CHECK(run_cli(args + "--out " + out1).exit_code == 0);
    CHECK(run_cli(args + "--out " + out2).exit_code == 0);
    const std::string csv = read_file(out1);
    CHECK(csv.find("s_true,coverage,stderr,n_toys\n") == 0);
    CHECK(csv == read_file(out2)); // byte-identical reruns
    // 3 grid points -> header + 3 rows
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    // manifest sidecar exists and replays the command
    const std::string manifest = read_file(out1 + ".manifest.json");
    const auto j = nlohmann::json::parse(manifest);
    CHECK(j["seed"] == 7);
    CHECK(j["toolkit_version"] == "0.1.0");
    CHECK(j["parameters"]["method"] == "classical");
    CHECK(j.contains("wall_time_s"));
}

TEST_CASE("json output embeds the manifest and round-trips numbers") {
    const RunResult r = run_cli("limit --method fc --n 2 --b 1.5 --cl 0.9 --format json");
    CHECK(r.exit_code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["manifest"]["command"].get<std::string>().find("limit") != std::string::npos);
    const double upper = j["interval"]["upper"].get<double>();
    // full-precision round trip: re-serialize and re-parse
    const auto j2 = nlohmann::json::parse(j.dump());
    CHECK(j2["interval"]["upper"].get<double>() == upper);
}

TEST_CASE("combine subcommand: weighted and correlated") {
    const std::string input = temp_path("meas.csv");
    write_file(input, "value,sigma\n0,1\n2,2\n");
    const RunResult r = run_cli("combine --input " + input);
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("0.4,") != std::string::npos);

    const std::string cov = temp_path("cov_mat.csv");
    write_file(cov, "1,1.6\n1.6,4\n");
    const RunResult rc = run_cli("combine --input " + input + " --cov " + cov);
    CHECK(rc.exit_code == 0);
    CHECK(rc.out.find("-0.6666") != std::string::npos);
    CHECK(rc.out.substr(rc.out.rfind(',') + 1).find("1") == 0); // outside-range flag

    // singular covariance is a computation error: exit 1
    const std::string singular = temp_path("cov_sing.csv");
    write_file(singular, "1,2\n2,4\n");
    CHECK(run_cli("combine --input " + input + " --cov " + singular).exit_code == 1);
}

TEST_CASE("divergent posterior surfaces as exit 1 with the module's text") {
    const std::string model = temp_path("divergent.model");
    write_file(model, "b_mean = 3.0\neff_mean = 1.0\neff_rel_sigma = 0.1\n"
                      "eff_form = truncated-gaussian\n");
    const std::string cmd = std::string(CSTK_CLI_PATH) + " limit --method bayes --model " +
                            model + " --n 0 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string err;
    std::array<char, 4096> buf{};
    std::size_t got;
    while ((got = fread(buf.data(), 1, buf.size(), pipe)) > 0) err.append(buf.data(), got);
    CHECK(WEXITSTATUS(pclose(pipe)) == 1);
    CHECK(err.find("divergent posterior") != std::string::npos);
}

TEST_CASE("blind/unblind round trip through the CLI") {
    const RunResult b = run_cli("blind --value 137.035999 --key alpha");
    CHECK(b.exit_code == 0);
    std::istringstream lines(b.out);
    std::string header, blinded;
    std::getline(lines, header);
    std::getline(lines, blinded);
    CHECK(blinded != "137.035999");
    const RunResult u = run_cli("unblind --value " + blinded + " --key alpha");
    CHECK(u.exit_code == 0);
    CHECK(u.out.find("137.035999") != std::string::npos);
}

TEST_CASE("gof chi2 subcommand") {
    const std::string data = temp_path("hist.csv");
    write_file(data, "x_lo,x_hi,count\n0,1,9\n1,2,12\n2,3,10\n");
    const std::string pred = temp_path("pred.csv");
    write_file(pred, "10\n10\n10\n");
    const RunResult r = run_cli("gof chi2 --data " + data + " --pred " + pred + " --n-fitted 0");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("0.5,") != std::string::npos); // S = (1+4+0)/10
}

TEST_CASE("gof energy subcommand") {
    const std::string a = temp_path("sample_a.csv");
    const std::string b = temp_path("sample_b.csv");
    write_file(a, "0.1\n0.2\n0.3\n0.5\n0.8\n1.0\n2.0\n");
    write_file(b, "5.1\n5.3\n5.7\n6.0\n6.2\n6.5\n7.0\n");
    const RunResult r =
        run_cli("gof energy --a " + a + " --b " + b + " --scales 1 --n-perm 199 --seed 3");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("e,p,n_perm,exhaustive") == 0);
    CHECK(r.out.find("0.005") != std::string::npos); // p at the 1/200 floor
}

TEST_CASE("help text exists and names the methods") {
    const RunResult r = run_cli("--help");
    CHECK(r.exit_code == 0);
    for (const char* cmd : {"limit", "pvalue", "cls", "sensitivity", "coverage",
                            "systematics", "combine", "blind", "unblind", "gof"}) {
        CHECK(r.out.find(cmd) != std::string::npos);
    }
    const RunResult lim = run_cli("limit --help");
    CHECK(lim.exit_code == 0);
    CHECK(lim.out.find("Feldman-Cousins") != std::string::npos);
    CHECK(lim.out.find("profile") != std::string::npos);
}

TEST_CASE("usage errors exit 2") {
    CHECK(run_cli("limit --method nope --n 0 --b 1").exit_code == 2);
    CHECK(run_cli("limit").exit_code == 2);
    CHECK(run_cli("definitely-not-a-command").exit_code == 2);
}

TEST_CASE("sensitivity subcommands") {
    const RunResult p = run_cli("sensitivity --mode punzi --b 3 --alpha 2.8665e-7 --cl 0.95");
    CHECK(p.exit_code == 0);
    CHECK(p.out.find("16,") != std::string::npos); // t_crit

    const RunResult m =
        run_cli("sensitivity --mode median --b 3 --method bayes --cl 0.9 --n-toys 101 --seed 4");
    CHECK(m.exit_code == 0);
    const RunResult m2 =
        run_cli("sensitivity --mode median --b 3 --method bayes --cl 0.9 --n-toys 101 --seed 4");
    CHECK(m.out == m2.out); // reproducible
}
