#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "icbandit/experiment.hpp"
#include "icbandit/numeric.hpp"

using namespace icbandit;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("icbandit_test_" + name);
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::ifstream is(p);
    std::string line;
    while (std::getline(is, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

json small_regret_config() {
    return json::parse(R"({
      "scenario": "small", "T": 300, "K": 3,
      "ensemble": {"kind": "leaders", "high": 0.8, "low": 0.4},
      "beliefs": [{"kind": "uniform"}, {"kind": "uniform", "start": 101, "length": 50}, {"kind": "point", "round": 300}],
      "policy": {"kind": "exp4s"},
      "replications": {"runs": 40},
      "seed": 42
    })");
}

std::vector<std::string> error_keys(const json& j) {
    try {
        parse_experiment_config(j);
    } catch (const ConfigError& e) {
        return e.keys();
    }
    return {};
}

bool has_key(const std::vector<std::string>& keys, const std::string& k) {
    return std::find(keys.begin(), keys.end(), k) != keys.end();
}

}  // namespace

TEST_CASE("format_real prints 17 significant digits") {
    CHECK(format_real(0.1) == "0.10000000000000001");
    CHECK(format_real(1.0) == "1");
    CHECK(format_real(-2.5e-300) == "-2.5e-300");
    CHECK(format_real(1e-5) == "1.0000000000000001e-05");
    CHECK(format_real(std::numeric_limits<double>::infinity()) == "inf");
    CHECK(format_real(std::nan("")) == "nan");
    CHECK(std::stod(format_real(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("config parser lists every unknown key with its path") {
    auto j = small_regret_config();
    j["colour"] = "red";
    j["ensemble"]["hgh"] = 0.9;
    j["beliefs"][1]["lenght"] = 5;
    j["policy"]["etaa"] = 1.0;
    j["replications"]["run"] = 3;
    const auto keys = error_keys(j);
    CHECK(keys.size() == 5);
    for (const char* k : {"colour", "ensemble.hgh", "beliefs[1].lenght", "policy.etaa", "replications.run"})
        CHECK_MESSAGE(has_key(keys, k), k);

    try {
        parse_experiment_config(j);
        FAIL("expected a config error");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("unknown keys") != std::string::npos);
        CHECK(msg.find("beliefs[1].lenght") != std::string::npos);
    }
}

TEST_CASE("config parser rejects ill-typed and out-of-range values") {
    auto check_invalid = [](json j, const std::string& key) {
        const auto keys = error_keys(j);
        CHECK_MESSAGE(has_key(keys, key), key);
    };
    auto j = small_regret_config();
    j["T"] = -5;
    check_invalid(j, "T");
    j = small_regret_config();
    j["ensemble"]["high"] = 1.5;
    check_invalid(j, "ensemble.high");
    j = small_regret_config();
    j["ensemble"]["kind"] = "mystery";
    check_invalid(j, "ensemble.kind");
    j = small_regret_config();
    j["beliefs"][1]["length"] = 500;
    check_invalid(j, "beliefs[1]");
    j = small_regret_config();
    j["beliefs"][2]["round"] = 301;
    check_invalid(j, "beliefs[2].round");
    j = small_regret_config();
    j["beliefs"][1]["components"] = 10;
    check_invalid(j, "beliefs[1].components");
    j = small_regret_config();
    j["policy"]["K"] = 4;
    check_invalid(j, "policy.K");
    j = small_regret_config();
    j["method"] = "guess";
    check_invalid(j, "method");
    j = small_regret_config();
    j["assumptions"] = {{"alpha", "verify"}};
    check_invalid(j, "assumptions.Delta");
    j = small_regret_config();
    j["oracle"] = {{"max_K", 7}};
    check_invalid(j, "oracle.max_K");

    CHECK_THROWS_AS(parse_experiment_config(json::array()), ConfigError);
    CHECK(error_keys(small_regret_config()).empty());
}

TEST_CASE("parsed config fills defaults and inherits K into the policy") {
    const auto c = parse_experiment_config(small_regret_config());
    CHECK(c.horizon == 300);
    CHECK(c.policy->arms == 3);
    CHECK(c.policy->kind == "exp4s");
    CHECK(c.beliefs.size() == 3);
    CHECK(c.replications.runs == 40);
    CHECK(c.replications.outer == 200);
    CHECK(c.method == GainMethod::rao_blackwell);
    CHECK_FALSE(c.regret.has_value());

    const auto b = build_belief(c.beliefs[1], c.horizon);
    CHECK(b.mass(101) == doctest::Approx(1.0 / 50));
    CHECK(b.mass(100) == 0.0);
    CHECK(b.mass(150) == doctest::Approx(1.0 / 50));
    CHECK(build_belief(c.beliefs[2], c.horizon).mass(300) == 1.0);

    const auto prior = build_ensemble(c);
    REQUIRE(prior.support().size() == 3);
    for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t a = 0; a < 3; ++a) CHECK(prior.support()[k].mean(0, a) == (a == k ? 0.8 : 0.4));
}

TEST_CASE("commands report missing sections as config errors") {
    auto c = parse_experiment_config(json::parse(R"({"T": 100, "K": 2})"));
    c.out = scratch_dir("missing");
    CHECK_THROWS_AS(cmd_regret(c, 1), ConfigError);
    CHECK_THROWS_AS(cmd_ic_check(c, 1), ConfigError);
    CHECK_THROWS_AS(cmd_bounds(c), ConfigError);
    CHECK_THROWS_AS(cmd_adaptive(c, 1), ConfigError);
}

TEST_CASE("regret command reproduces the golden CSV byte for byte") {
    std::ifstream cfg(std::string(ICBANDIT_GOLDEN_DIR) + "/cli_regret_config.json");
    REQUIRE(cfg);
    auto c = parse_experiment_config(json::parse(cfg));
    c.out = scratch_dir("golden_regret");
    const auto result = cmd_regret(c, 3);
    CHECK(result.exit_code == 0);
    CHECK(slurp(c.out / "regret.csv") == slurp(std::string(ICBANDIT_GOLDEN_DIR) + "/cli_regret.csv"));
}

TEST_CASE("regret command output does not depend on the worker count") {
    auto c = parse_experiment_config(small_regret_config());
    c.out = scratch_dir("regret_j1");
    cmd_regret(c, 1);
    const auto one = slurp(c.out / "regret.csv");
    const auto summary_one = slurp(c.out / "regret_summary.json");
    c.out = scratch_dir("regret_j5");
    cmd_regret(c, 5);
    CHECK(one == slurp(c.out / "regret.csv"));
    CHECK(summary_one == slurp(c.out / "regret_summary.json"));

    c.seed = 43;
    c.out = scratch_dir("regret_seed43");
    cmd_regret(c, 2);
    CHECK(one != slurp(c.out / "regret.csv"));
}

TEST_CASE("regret summary agrees with the per-replication CSV and the oracle column") {
    auto c = parse_experiment_config(small_regret_config());
    c.out = scratch_dir("regret_summary");
    const auto result = cmd_regret(c, 2);
    CHECK(result.exit_code == 0);

    const auto rows = read_csv(c.out / "regret.csv");
    REQUIRE(rows.size() == 1 + 40 * 3);
    CHECK(rows[0] == std::vector<std::string>{"replication", "belief", "external", "swap", "pseudo_external",
                                              "pseudo_swap", "swap_oracle"});
    std::ifstream is(c.out / "regret_summary.json");
    const auto summary = json::parse(is);
    for (std::size_t b = 1; b <= 3; ++b) {
        std::vector<double> external;
        for (std::size_t r = 1; r < rows.size(); ++r) {
            if (std::stoul(rows[r][1]) != b) continue;
            external.push_back(std::stod(rows[r][2]));
            CHECK(std::fabs(std::stod(rows[r][3]) - std::stod(rows[r][6])) <= 1e-12);
            CHECK(std::stod(rows[r][3]) >= std::stod(rows[r][2]) - 1e-12);  // swap >= external
        }
        REQUIRE(external.size() == 40);
        double mean = 0.0;
        for (double x : external) mean += x;
        mean /= 40.0;
        const auto& entry = summary["beliefs"][b - 1]["external"];
        CHECK(entry["mean"].get<double>() == doctest::Approx(mean).epsilon(1e-12));
        CHECK(std::fabs(mean - entry["mean"].get<double>()) <= entry["ci95"].get<double>());
    }
}

TEST_CASE("regret command drops the oracle column above four actions") {
    auto j = small_regret_config();
    j["K"] = 5;
    j["replications"]["runs"] = 3;
    auto c = parse_experiment_config(j);
    c.out = scratch_dir("regret_k5");
    cmd_regret(c, 1);
    CHECK(read_csv(c.out / "regret.csv")[0].size() == 6);
}

TEST_CASE("ic-check marks a point-mass agent as having no guarantee") {
    auto c = parse_experiment_config(json::parse(R"({
      "T": 400, "K": 3, "ensemble": {"kind": "leaders"},
      "beliefs": [{"kind": "point", "round": 350}],
      "policy": {"kind": "exp4s"}, "assumptions": {"Delta": 0.3},
      "replications": {"outer": 30, "inner": 2, "min_count": 1}, "seed": 5
    })"));
    c.out = scratch_dir("ic_point");
    const auto result = cmd_ic_check(c, 2);
    CHECK(result.exit_code == 0);
    const auto rows = read_csv(c.out / "ic_check_1.csv");
    REQUIRE(rows.size() == 7);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        CHECK(rows[r][5] == "1");
        CHECK(rows[r][6] == "no guarantee");
    }
}

TEST_CASE("ic-check reports a never-recommended action as inconclusive") {
    // A greedy-tuned learner on a deterministic instance stops recommending
    // arm 2 long before the agent's round.
    auto c = parse_experiment_config(json::parse(R"({
      "T": 300, "K": 2,
      "ensemble": {"kind": "finite", "means": [[1.0, 0.0]], "noise": "deterministic"},
      "beliefs": [{"kind": "point", "round": 300}],
      "policy": {"kind": "exp3", "eta": 50, "gamma": 0, "beta": 0},
      "assumptions": {"Delta": 0.5, "alpha": 1, "rho": 0},
      "replications": {"outer": 20, "inner": 1, "min_count": 1}, "seed": 9
    })"));
    c.out = scratch_dir("ic_zero");
    cmd_ic_check(c, 1);
    const auto rows = read_csv(c.out / "ic_check_1.csv");
    REQUIRE(rows.size() == 3);
    CHECK(rows[2][0] == "2");
    CHECK(rows[2][4] == "0");
    CHECK(rows[2][6] == "inconclusive");
}

TEST_CASE("ic-check on a decomposed global agent also reports the block bound") {
    auto c = parse_experiment_config(json::parse(R"({
      "T": 3000, "K": 3, "ensemble": {"kind": "leaders"},
      "beliefs": [{"kind": "uniform", "components": 700}],
      "policy": {"kind": "exp4s"}, "assumptions": {"Delta": 0.3},
      "replications": {"outer": 30, "inner": 2, "min_count": 10}, "seed": 1
    })"));
    c.out = scratch_dir("ic_mix");
    cmd_ic_check(c, 0);
    std::ifstream is(c.out / "ic_check.json");
    const auto doc = json::parse(is);
    const auto& agent = doc["agents"][0];
    REQUIRE(agent.contains("components"));
    CHECK(agent["components"].size() == 4);
    double worst = 0.0;
    for (const auto& blk : agent["components"]) worst = std::max(worst, blk["bound"]["epsilon"].get<double>());
    CHECK(agent["epsilon_mixture"].get<double>() == worst);
    CHECK(agent["epsilon"].get<double>() ==
          std::min(agent["epsilon_direct"].get<double>(), agent["epsilon_mixture"].get<double>()));
}

TEST_CASE("bounds single-point mode equals a direct call") {
    auto c = parse_experiment_config(json::parse(R"({
      "bounds": {"point": {"alpha": 0.2, "Delta": 0.5, "regret": 0.05, "w2": 0.0001, "K": 2, "kind": "swap"}}
    })"));
    c.out = scratch_dir("bounds_point");
    cmd_bounds(c);
    std::ifstream is(c.out / "bounds.json");
    const auto doc = json::parse(is);

    BoundInputs in;
    in.alpha = 0.2;
    in.Delta = 0.5;
    in.regret = 0.05;
    in.w2 = 1e-4;
    in.arms = 2;
    in.regret_kind = RegretKind::swap;
    const auto direct = epsilon_swap(in);
    CHECK(doc["bound"]["epsilon"].get<double>() == direct.epsilon);
    CHECK(doc["bound"]["c_term"].get<double>() == direct.c_term);
}

TEST_CASE("bounds grid sweep writes one row per admissible point and a chart") {
    auto c = parse_experiment_config(json::parse(R"({
      "bounds": {"T": [10000, 1000000], "L": [100, 1000, 100000], "rho": [0], "rho_per_window": [0.1],
                 "alpha": 0.5, "Delta": 0.4, "K": 3}
    })"));
    c.out = scratch_dir("bounds_grid");
    const auto result = cmd_bounds(c);
    CHECK(result.exit_code == 0);
    const auto rows = read_csv(c.out / "bounds.csv");
    // T = 1e4 admits two windows, T = 1e6 all three; two drift series each.
    CHECK(rows.size() == 1 + 2 * (2 + 3));
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto T = std::stoul(rows[r][0]), L = std::stoul(rows[r][1]);
        const double rho = std::stod(rows[r][2]);
        const auto direct = uniform_window_epsilon(T, L, 3, 0.5, 0.4, rho);
        CHECK(std::stod(rows[r][8]) == direct.epsilon);
    }
    const auto svg = slurp(c.out / "bounds.svg");
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(std::count(svg.begin(), svg.end(), '\n') > 10);

    // Longer windows at fixed T and zero drift give smaller epsilon.
    double prev = 2.0;
    for (std::size_t r = 1; r < rows.size(); ++r)
        if (rows[r][0] == "1000000" && std::stod(rows[r][2]) == 0.0) {
            CHECK(std::stod(rows[r][8]) <= prev);
            prev = std::stod(rows[r][8]);
        }
}

TEST_CASE("bounds grid rejects malformed grids") {
    CHECK_THROWS_AS(parse_experiment_config(json::parse(R"({"bounds": {"T": [100], "L": [], "K": 2}})")), ConfigError);
    CHECK_THROWS_AS(parse_experiment_config(json::parse(R"({"bounds": {"T": [100], "L": [0], "K": 2}})")), ConfigError);
    CHECK_THROWS_AS(parse_experiment_config(json::parse(R"({"bounds": {"L": [10], "K": 2}})")), ConfigError);
    CHECK_THROWS_AS(parse_experiment_config(json::parse(R"({"bounds": {"T": [100], "L": [10], "rho": ["x"], "K": 2}})")),
                    ConfigError);
    auto c = parse_experiment_config(json::parse(R"({"bounds": {"T": [100], "L": [1000], "K": 2}})"));
    c.out = scratch_dir("bounds_bad");
    CHECK_THROWS_AS(cmd_bounds(c), ConfigError);
}

TEST_CASE("adaptive command is deterministic and reports both slopes") {
    auto c = parse_experiment_config(json::parse(R"({
      "T": 1200, "K": 3,
      "ensemble": {"kind": "piecewise", "segments": [[0.9, 0.1, 0.1], [0.1, 0.9, 0.1], [0.1, 0.1, 0.9]]},
      "policy": {"kind": "exp4s"},
      "adaptive": {"min": 20, "max": 400, "count": 6, "seeds": 6},
      "seed": 4
    })"));
    c.out = scratch_dir("adaptive_a");
    cmd_adaptive(c, 1);
    const auto csv = slurp(c.out / "adaptive.csv");
    const auto doc_text = slurp(c.out / "adaptive.json");
    c.out = scratch_dir("adaptive_b");
    cmd_adaptive(c, 4);
    CHECK(csv == slurp(c.out / "adaptive.csv"));
    CHECK(doc_text == slurp(c.out / "adaptive.json"));

    const auto doc = json::parse(doc_text);
    CHECK(doc["policy"]["slope"].is_number());
    CHECK(doc["baseline"]["slope"].is_number());
    CHECK(doc["policy"]["anchors"].size() == 3);
    CHECK(doc["lengths"].size() == 6);
    const auto rows = read_csv(c.out / "adaptive.csv");
    CHECK(rows[0] == std::vector<std::string>{"length", "policy_mean", "policy_ci", "baseline_mean", "baseline_ci"});
    CHECK(rows.size() == 7);
    CHECK(fs::exists(c.out / "adaptive.svg"));
}

TEST_CASE("adaptive command needs a single adversary") {
    auto c = parse_experiment_config(json::parse(R"({
      "T": 100, "K": 3, "ensemble": {"kind": "leaders"}, "policy": {"kind": "exp3"}
    })"));
    c.out = scratch_dir("adaptive_bad");
    CHECK_THROWS_AS(cmd_adaptive(c, 1), ConfigError);
}

TEST_CASE("oracle-check agrees with the brute force and is seed-deterministic") {
    ExperimentConfig c;
    c.oracle.transcripts = 200;
    c.seed = 77;
    c.out = scratch_dir("oracle_a");
    const auto result = cmd_oracle_check(c, 1);
    CHECK(result.exit_code == 0);
    const auto a = slurp(c.out / "oracle_check.csv");
    c.out = scratch_dir("oracle_b");
    cmd_oracle_check(c, 6);
    CHECK(a == slurp(c.out / "oracle_check.csv"));
    const auto rows = read_csv(c.out / "oracle_check.csv");
    REQUIRE(rows.size() == 201);
    for (std::size_t r = 1; r < rows.size(); ++r) CHECK(std::stod(rows[r][5]) <= 1e-12);
}

TEST_CASE("shipped example configs parse") {
    std::size_t n = 0;
    for (const auto& entry : fs::directory_iterator(ICBANDIT_CONFIG_DIR)) {
        if (entry.path().extension() != ".json") continue;
        std::ifstream is(entry.path());
        CHECK_NOTHROW(parse_experiment_config(json::parse(is)));
        ++n;
    }
    CHECK(n >= 5);
}
