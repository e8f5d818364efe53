#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <oscstab/scenario.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace oscstab;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               fs::path("oscstab_test_" + std::to_string(::getpid()) + "_" +
                        std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string file(const std::string& name, const std::string& content) const {
        const fs::path p = path / name;
        std::ofstream out(p);
        out << content;
        return p.string();
    }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int count_lines(const std::string& text) {
    int n = 0;
    for (char c : text)
        if (c == '\n') ++n;
    return n;
}

}  // namespace

TEST_CASE("scenario parsing round trip") {
    TempDir td;
    const std::string p = td.file("demo.scn",
                                  "# comment\n"
                                  "benchmark = euler\n"
                                  "x0 = 0.3, 0.2, 0.1\n"
                                  "gamma = 2.5\n"
                                  "epsilon = 0.25   # trailing comment\n"
                                  "mode = continuous\n"
                                  "horizon = 12\n"
                                  "kappa_s10_3 = 4\n");
    Scenario sc = parse_scenario(p);
    CHECK(sc.benchmark == "euler");
    CHECK(sc.label == "demo");
    REQUIRE(sc.x0.size() == 3);
    CHECK(sc.x0[0] == 0.3);
    CHECK(sc.gamma.value() == 2.5);
    CHECK(sc.epsilon.value() == 0.25);
    CHECK(sc.mode == FeedbackMode::Continuous);
    CHECK(sc.horizon == 12.0);
    CHECK(sc.kappa_overrides.at("s10_3") == 4);
}

TEST_CASE("parse errors name the offending field") {
    TempDir td;
    auto expect_config_error = [&](const std::string& content, const std::string& needle) {
        const std::string p = td.file("bad.scn", content);
        try {
            Scenario sc = parse_scenario(p);
            instantiate(sc);
            FAIL_CHECK("expected ConfigError for: " << content);
        } catch (const ConfigError& e) {
            INFO(e.what());
            CHECK(std::string(e.what()).find(needle) != std::string::npos);
        }
    };
    expect_config_error("x0 = 1, 2, 3\n", "benchmark");
    expect_config_error("benchmark = euler\ngamma = fast\n", "gamma");
    expect_config_error("benchmark = euler\nhorizon = -1\n", "horizon");
    expect_config_error("benchmark = euler\nmode = sampled\n", "mode");
    expect_config_error("benchmark = euler\nwhatever = 1\n", "whatever");
    expect_config_error("benchmark = euler\nkappa_s10_3 = 1.5\n", "kappa_s10_3");
    expect_config_error("benchmark = nosuch\n", "nosuch");
    expect_config_error("benchmark = euler\nalpha = 1, 2\n", "alpha");
}

TEST_CASE("config errors surface as exit code 2") {
    TempDir td;
    const std::string p = td.file("bad.scn", "benchmark = nosuch\n");
    auto res = run_scenario(p, td.path.string());
    CHECK(res.exit_code == 2);
    CHECK(!res.message.empty());
}

TEST_CASE("rigid-body scenario runs end to end") {
    TempDir td;
    const std::string p = td.file("euler_run.scn",
                                  "benchmark = euler\n"
                                  "x0 = 3, 2, 1\n"
                                  "mode = continuous\n"
                                  "horizon = 50\n"
                                  "period_map = off\n");
    auto res = run_scenario(p, td.path.string());
    REQUIRE(res.exit_code == 0);
    REQUIRE(fs::exists(res.csv_path));
    REQUIRE(fs::exists(res.report_path));
    CHECK(res.trajectory.final_state().norm() < 1e-2);

    const std::string csv = slurp(res.csv_path);
    CHECK(csv.rfind("t,x1,x2,x3,u1,u2,norm_x,V,period_start", 0) == 0);

    const std::string report = slurp(res.report_path);
    CHECK(report.find("status") != std::string::npos);
    CHECK(report.find("rate_estimate") != std::string::npos);

    // reruns are byte-identical
    auto res2 = run_scenario(p, (td.path / "again").string());
    CHECK(slurp(res2.csv_path) == csv);
}

TEST_CASE("trajectory csv row count follows the sampling step") {
    TempDir td;
    const std::string p = td.file("rows.scn",
                                  "benchmark = euler\n"
                                  "x0 = 0.1, 0.1, 0.1\n"
                                  "epsilon = 0.5\n"
                                  "mode = continuous\n"
                                  "horizon = 2\n"
                                  "step = 0.125\n"
                                  "assumptions = off\n");
    auto res = run_scenario(p, td.path.string());
    REQUIRE(res.exit_code == 0);
    const std::string csv = slurp(res.csv_path);
    // header plus floor(T / actual step) + 1 samples; the requested step is
    // refined if it is too coarse to resolve the oscillation
    const double step = res.trajectory.step;
    CHECK(step <= 0.125);
    const int expected = static_cast<int>(std::floor(2.0 / step + 0.5)) + 1;
    CHECK(count_lines(csv) == 1 + expected);
}

TEST_CASE("zero initial state stays identically zero") {
    TempDir td;
    const std::string p = td.file("origin.scn",
                                  "benchmark = euler\n"
                                  "x0 = 0, 0, 0\n"
                                  "epsilon = 0.5\n"
                                  "horizon = 3\n"
                                  "decay_rate = on\n");
    auto res = run_scenario(p, td.path.string());
    REQUIRE(res.exit_code == 0);
    for (const Vec& x : res.trajectory.states) CHECK(x.norm() == 0.0);
    std::istringstream csv(slurp(res.csv_path));
    std::string line;
    std::getline(csv, line);  // header
    while (std::getline(csv, line)) {
        // every state column is exactly 0
        CHECK(line.find(",0,0,0,", line.find(',')) != std::string::npos);
    }
}

TEST_CASE("period start markers in sampled mode") {
    TempDir td;
    const std::string p = td.file("marks.scn",
                                  "benchmark = euler\n"
                                  "x0 = 0.2, 0.1, 0.1\n"
                                  "epsilon = 0.5\n"
                                  "mode = pi_epsilon\n"
                                  "horizon = 2\n"
                                  "step = 0.25\n");
    auto res = run_scenario(p, td.path.string());
    REQUIRE(res.exit_code == 0);
    std::istringstream csv(slurp(res.csv_path));
    std::string line;
    std::getline(csv, line);
    int marks = 0, rows = 0;
    while (std::getline(csv, line)) {
        ++rows;
        if (line.size() >= 2 && line.substr(line.size() - 2) == ",1") ++marks;
    }
    CHECK(rows == static_cast<int>(res.trajectory.times.size()));
    CHECK(marks == 5);  // period starts at t = 0, 0.5, 1.0, 1.5, plus t = 2.0
}

TEST_CASE("epsilon sweep fits the remainder order") {
    TempDir td;
    const std::string p = td.file("sweep.scn",
                                  "benchmark = euler\n"
                                  "x0 = 0.3, 0.2, 0.1\n"
                                  "gamma = 1\n");
    auto res = sweep_epsilon(p, {1e-2, 5e-3, 2.5e-3}, td.path.string());
    REQUIRE(res.exit_code == 0);
    CHECK(res.fit.order >= 1.9);
    CHECK(res.fit.r_squared >= 0.99);
    REQUIRE(fs::exists(res.report_path));
    const std::string rep = slurp(res.report_path);
    CHECK(rep.find("order") != std::string::npos);
}

TEST_CASE("epsilon sweep input validation") {
    TempDir td;
    const std::string p = td.file("sweep.scn", "benchmark = euler\n");
    auto res = sweep_epsilon(p, {1e-2, 5e-3}, td.path.string());
    CHECK(res.exit_code == 2);

    const std::string q = td.file("sweep_uw.scn", "benchmark = underwater\n");
    auto res2 = sweep_epsilon(q, {1e-2, 5e-3, 2.5e-3}, td.path.string());
    CHECK(res2.exit_code == 2);  // combined family has no closed-form prediction
}

TEST_CASE("check reports on the standing assumptions") {
    TempDir td;
    const std::string p = td.file("check.scn", "benchmark = brockett\n");
    const std::string out = check_scenario(p);
    CHECK(out.find("a1") != std::string::npos);
    CHECK(out.find("a2") != std::string::npos);
}
