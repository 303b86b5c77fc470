#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "flexmap/grid.hpp"

namespace fs = std::filesystem;
using namespace flexmap;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string stdout_text;
};

RunResult run_cli(const std::string& args, const fs::path& dir) {
    const std::string log = (dir / "cli.log").string();
    const std::string cmd = std::string(FLEXMAP_CLI_PATH) + " " + args + " > " + log + " 2>&1";
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WEXITSTATUS(status);
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    r.stdout_text = ss.str();
    return r;
}

fs::path fresh_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("flexmap_cli_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string small_network_file(const fs::path& dir) {
    grid::Network net = grid::generate_radial(8, 2, 4);
    const fs::path path = dir / "net.json";
    std::ofstream out(path);
    out << grid::to_json(net);
    return path.string();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("opf writes a flat record and reports the interface") {
    const fs::path dir = fresh_dir("opf");
    const std::string net = small_network_file(dir);
    auto r = run_cli("opf --network " + net + " --direction -p --out " + dir.string(), dir);
    CHECK(r.exit_code == 0);
    CHECK(r.stdout_text.find("interface P") != std::string::npos);
    const std::string csv = slurp(dir / "opf.csv");
    CHECK(csv.find("# config ") == 0);
    CHECK(csv.find("interface,") != std::string::npos);
    CHECK(csv.find("bus,1,") != std::string::npos);
    CHECK(csv.find("branch,1,") != std::string::npos);
    CHECK(fs::exists(dir / "effective_config.json"));
}

TEST_CASE("area writes a 2k-point boundary table, reruns byte-identical") {
    const fs::path dir = fresh_dir("area");
    const std::string net = small_network_file(dir);
    const std::string args =
        "area --network " + net + " --k 4 --out " + dir.string() + " --workers 2";
    auto r = run_cli(args, dir);
    REQUIRE(r.exit_code == 0);
    const std::string first = slurp(dir / "boundary.csv");
    int rows = 0;
    for (char ch : first)
        if (ch == '\n') ++rows;
    CHECK(rows == 2 + 8);  // hash line + header + 2k points

    auto r2 = run_cli(args, dir);
    REQUIRE(r2.exit_code == 0);
    CHECK(slurp(dir / "boundary.csv") == first);
}

TEST_CASE("segment-count produces n+1 segments and a chart") {
    const fs::path dir = fresh_dir("segc");
    const std::string net = small_network_file(dir);
    auto r = run_cli("segment-count --network " + net + " --k 4 --chart --out " + dir.string(),
                     dir);
    REQUIRE(r.exit_code == 0);
    const auto doc = nlohmann::json::parse(slurp(dir / "segmentation.json"));
    CHECK(doc["mode"] == "by-count");
    CHECK(doc["segments"].size() == 3);  // levels 0..2
    CHECK(doc.contains("config_hash"));
    bool chart_found = false;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.path().extension() == ".svg") chart_found = true;
    CHECK(chart_found);
    CHECK(slurp(dir / "summary.csv").find("segment,mode,cardinality") != std::string::npos);
}

TEST_CASE("segment-prob honors threshold and reliability overrides") {
    const fs::path dir = fresh_dir("segp");
    const std::string net = small_network_file(dir);
    auto r = run_cli("segment-prob --network " + net +
                         " --k 4 --threshold 0.9 --reliability 1=0.95 --reliability 2=0.94 "
                         "--max-segments 8 --out " +
                         dir.string(),
                     dir);
    REQUIRE(r.exit_code == 0);
    const auto doc = nlohmann::json::parse(slurp(dir / "segmentation.json"));
    CHECK(doc["mode"] == "probabilistic");
    CHECK(doc["threshold"] == 0.9);
    CHECK(doc.contains("envelope"));
    double best = 0.0;
    for (const auto& s : doc["segments"]) best = std::max(best, s["probability"].get<double>());
    CHECK(best == doctest::Approx(0.95).epsilon(1e-12));
}

TEST_CASE("render emits a network SVG") {
    const fs::path dir = fresh_dir("render");
    const std::string net = small_network_file(dir);
    auto r = run_cli("render --network " + net + " --out " + dir.string(), dir);
    REQUIRE(r.exit_code == 0);
    bool svg_found = false;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.path().extension() == ".svg") svg_found = true;
    CHECK(svg_found);
}

TEST_CASE("bench writes per-segment wall-time records") {
    const fs::path dir = fresh_dir("bench");
    const std::string net = small_network_file(dir);
    auto r = run_cli("bench --network " + net + " --k 3 --repeats 2 --out " + dir.string(),
                     dir);
    REQUIRE(r.exit_code == 0);
    const std::string csv = slurp(dir / "bench.csv");
    CHECK(csv.find("segment,repeat,milliseconds") != std::string::npos);
    int rows = 0;
    for (char ch : csv)
        if (ch == '\n') ++rows;
    CHECK(rows == 2 + 2 * 3);  // (levels 0..2) x 2 repeats
}

TEST_CASE("config file values are overridden by flags") {
    const fs::path dir = fresh_dir("config");
    const std::string net = small_network_file(dir);
    const fs::path cfgfile = dir / "run.json";
    {
        std::ofstream out(cfgfile);
        out << R"({"k": 3, "network": ")" << net << R"(", "out": ")" << dir.string() << R"("})";
    }
    auto r = run_cli("area --config " + cfgfile.string() + " --k 5", dir);
    REQUIRE(r.exit_code == 0);
    const auto cfg = nlohmann::json::parse(slurp(dir / "effective_config.json"));
    CHECK(cfg["k"] == 5);
    const std::string csv = slurp(dir / "boundary.csv");
    int rows = 0;
    for (char ch : csv)
        if (ch == '\n') ++rows;
    CHECK(rows == 2 + 10);
}

TEST_CASE("exit codes distinguish parse, validation and infeasible failures") {
    const fs::path dir = fresh_dir("codes");
    auto missing = run_cli("opf --network /nonexistent.json --out " + dir.string(), dir);
    CHECK(missing.exit_code == 2);
    CHECK(missing.stdout_text.find("error kind=parse") != std::string::npos);

    const fs::path bad = dir / "bad.json";
    {
        std::ofstream out(bad);
        out << R"({"base_mva": 10, "base_kv": 11,
                   "buses": [
                     {"id": 1, "demand_p": 0, "demand_q": 0, "v_min": 0.9, "v_max": 1.1,
                      "is_reference": true},
                     {"id": 2, "demand_p": 1, "demand_q": 1, "v_min": 0.9, "v_max": 1.1}],
                   "branches": [], "generators": [], "flex_units": []})";
    }
    auto invalid = run_cli("opf --network " + bad.string() + " --out " + dir.string(), dir);
    CHECK(invalid.exit_code == 3);
    CHECK(invalid.stdout_text.find("error kind=validation") != std::string::npos);

    const std::string net = small_network_file(dir);
    auto unknown = run_cli("area --network " + net + " --method nope --out " + dir.string(),
                           dir);
    CHECK(unknown.exit_code == 2);
}

} // TEST_SUITE
