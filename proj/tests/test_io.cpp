#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "filterbench/io.hpp"
#include "filterbench/markov.hpp"
#include "filterbench/hmm.hpp"

using namespace fb;

namespace {

void write_file(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    out << body;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Run a shell command, capture exit status the way a shell reports it.
int run(const std::string& cmd) {
    int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -2;
}

} // namespace

TEST_CASE("format_double round-trips bit-exactly through strtod") {
    const double vals[] = {0.1,        1.0 / 3.0, 3.14159265358979323846,
                           1e-300,     -1e300,    123456789.123456789,
                           -0.0,       2.2250738585072014e-308,
                           6.02214076e23};
    for (double v : vals) {
        std::string s = format_double(v);
        char* end = nullptr;
        double back = std::strtod(s.c_str(), &end);
        CHECK(*end == '\0');
        CHECK(std::memcmp(&back, &v, sizeof v) == 0);
    }
}

TEST_CASE("emit_csv writes columns in sorted order and ingest round-trips") {
    const std::string path = "io_rt.csv";
    std::map<std::string, std::vector<double>> cols = {
        {"b", {1.0 / 3.0, 2.5}}, {"a", {0.1, -7.0}}, {"c", {1e-300, 4.0}}};
    emit_csv(cols, path);

    std::string raw = read_file(path);
    CHECK(raw.substr(0, raw.find('\n')) == "a,b,c");

    auto rows = ingest_csv(path, {"a", "b", "c"});
    REQUIRE(rows.size() == 2);
    CHECK(rows[0][0] == 0.1);
    CHECK(rows[0][1] == 1.0 / 3.0);
    CHECK(rows[0][2] == 1e-300);
    CHECK(rows[1][0] == -7.0);
    CHECK(rows[1][1] == 2.5);
    CHECK(rows[1][2] == 4.0);
    std::remove(path.c_str());
}

TEST_CASE("emit_csv pads ragged columns with blank cells") {
    const std::string path = "io_ragged.csv";
    emit_csv({{"a", {1.0, 2.0, 3.0}}, {"b", {5.0}}}, path);
    std::string raw = read_file(path);
    CHECK(raw == "a,b\n1,5\n2,\n3,\n");
    std::remove(path.c_str());
}

TEST_CASE("ingest_csv accepts CRLF line endings and skips blank lines") {
    const std::string path = "io_crlf.csv";
    write_file(path, "x,y\r\n1,2\r\n\r\n3,4\r\n");
    auto rows = ingest_csv(path, {"x", "y"});
    REQUIRE(rows.size() == 2);
    CHECK(rows[1][0] == 3.0);
    std::remove(path.c_str());
}

TEST_CASE("ingest_csv failure modes name the file and line") {
    const std::string path = "io_bad.csv";

    CHECK_THROWS_AS(ingest_csv("no_such_file.csv", {"x"}), DataError);

    write_file(path, "");
    CHECK_THROWS_WITH_AS(ingest_csv(path, {"x"}),
                         doctest::Contains("empty file"), DataError);

    write_file(path, "x,z\n1,2\n");
    CHECK_THROWS_WITH_AS(ingest_csv(path, {"x", "y"}),
                         doctest::Contains("header mismatch, expected 'x,y'"),
                         DataError);

    write_file(path, "x,y\n1,2\n,2\n");
    CHECK_THROWS_WITH_AS(ingest_csv(path, {"x", "y"}),
                         doctest::Contains("blank cell at line 3"), DataError);

    write_file(path, "x,y\n1,foo\n");
    CHECK_THROWS_WITH_AS(ingest_csv(path, {"x", "y"}),
                         doctest::Contains("non-numeric cell at line 2"),
                         DataError);

    // Trailing junk after a valid prefix must not silently truncate.
    write_file(path, "x,y\n1,2.5abc\n");
    CHECK_THROWS_WITH_AS(ingest_csv(path, {"x", "y"}),
                         doctest::Contains("non-numeric cell at line 2"),
                         DataError);

    write_file(path, "x,y\n1,inf\n");
    CHECK_THROWS_WITH_AS(ingest_csv(path, {"x", "y"}),
                         doctest::Contains("non-finite value at line 2"),
                         DataError);

    write_file(path, "x,y\n1,2\n1,2,3\n");
    CHECK_THROWS_WITH_AS(ingest_csv(path, {"x", "y"}),
                         doctest::Contains("wrong column count at line 3"),
                         DataError);

    std::remove(path.c_str());
}

TEST_CASE("config_hash matches FNV-1a reference values") {
    CHECK(config_hash("") == 0xcbf29ce484222325ULL);
    CHECK(config_hash("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(config_hash("foobar") == 0x85944171f73967e8ULL);
    CHECK(config_hash("abc") != config_hash("abd"));
    CHECK(config_hash("abc") != config_hash("acb"));
}

TEST_CASE("load_markov_spec_json parses both chain kinds and validates") {
    const std::string path = "io_spec.json";
    write_file(path, R"({"states":[0,1],"kind":"one-step",
                         "matrix":[[0.9,0.1],[0.2,0.8]]})");
    MarkovSpec s = load_markov_spec_json(path);
    CHECK(s.kind == ChainKind::OneStep);
    CHECK(s.matrix(0, 1) == 0.1);
    CHECK(s.states(1) == 1.0);

    write_file(path, R"({"states":[0,1],"kind":"generator",
                         "matrix":[[-2,2],[3,-3]]})");
    CHECK(load_markov_spec_json(path).kind == ChainKind::Generator);

    write_file(path, R"({"states":[0,1],"kind":"bogus",
                         "matrix":[[0.9,0.1],[0.2,0.8]]})");
    CHECK_THROWS_AS(load_markov_spec_json(path), DataError);

    // Missing key surfaces as DataError, not a raw json exception.
    write_file(path, R"({"states":[0,1],"kind":"one-step"})");
    CHECK_THROWS_AS(load_markov_spec_json(path), DataError);

    // Invalid stochastic matrix fails validation.
    write_file(path, R"({"states":[0,1],"kind":"one-step",
                         "matrix":[[0.9,0.2],[0.2,0.8]]})");
    CHECK_THROWS(load_markov_spec_json(path));

    write_file(path, "not json at all");
    CHECK_THROWS_AS(load_markov_spec_json(path), DataError);
    std::remove(path.c_str());
}

TEST_CASE("load_hmm_json builds a usable model") {
    const std::string path = "io_hmm.json";
    write_file(path, R"({"states":[0,1],
                         "lambda":[[0.9,0.1],[0.2,0.8]],
                         "h":[0,1],"gamma":0.5,"p0":[0.5,0.5]})");
    DiscreteHMM h = load_hmm_json(path);
    CHECK(h.d() == 2);
    CHECK(h.gamma == 0.5);
    CHECK(h.chain.kind == ChainKind::OneStep);

    write_file(path, R"({"states":[0,1],
                         "lambda":[[0.9,0.1],[0.2,0.8]],
                         "h":[0,1],"gamma":0.5})");
    CHECK_THROWS_AS(load_hmm_json(path), DataError);
    std::remove(path.c_str());
}

// ---- whole-binary checks -------------------------------------------------
//
// ctest runs from the build directory, next to the filterbench binary.

TEST_CASE("cli rejects bad invocations with the documented exit codes") {
    CHECK(run("./filterbench frobnicate >/dev/null 2>&1") == 2);
    CHECK(run("./filterbench >/dev/null 2>&1") == 2);
    CHECK(run("./filterbench pf --model m.json --obs o.csv "
              ">/dev/null 2>&1") == 2); // --seed is mandatory
    CHECK(run("./filterbench hmm --model io_missing.json --obs io_missing.csv "
              ">/dev/null 2>&1") == 3);
    CHECK(run("FILTERBENCH_THREADS=abc ./filterbench run --config x.json "
              ">/dev/null 2>&1") == 2);
    CHECK(run("FILTERBENCH_THREADS=0 ./filterbench run --config x.json "
              ">/dev/null 2>&1") == 2);
    CHECK(run("./filterbench --help >/dev/null 2>&1") == 0);
}

TEST_CASE("cli data errors map to exit code 3") {
    write_file("io_cfg.json", R"({"kind":"nonsense","out":"io_o.csv","seed":1})");
    // unknown experiment kind is a spec error
    CHECK(run("./filterbench run --config io_cfg.json >/dev/null 2>&1") == 2);
    write_file("io_cfg.json", R"({"out":"io_o.csv","seed":1})");
    CHECK(run("./filterbench run --config io_cfg.json >/dev/null 2>&1") == 3);
    std::remove("io_cfg.json");
}

TEST_CASE("stability subcommand output is byte-identical across reruns") {
    write_file("io_hmm_cli.json",
               R"({"states":[0,1],
                   "lambda":[[0.9,0.1],[0.2,0.8]],
                   "h":[0,1],"gamma":0.7,"p0":[0.5,0.5]})");
    const std::string cmd =
        "FILTERBENCH_THREADS=2 ./filterbench stability --hmm io_hmm_cli.json "
        "--n 300 --seeds 3 --seed 42 --out ";
    CHECK(run(cmd + "io_s1.csv > io_s1.json") == 0);
    CHECK(run(cmd + "io_s2.csv > io_s2.json") == 0);
    std::string c1 = read_file("io_s1.csv");
    CHECK(!c1.empty());
    CHECK(c1 == read_file("io_s2.csv"));
    std::string j1 = read_file("io_s1.json");
    CHECK(j1 == read_file("io_s2.json"));
    CHECK(j1.find("config_hash") != std::string::npos);
    CHECK(j1.find("filterbench-1.0") != std::string::npos);
    for (const char* f : {"io_hmm_cli.json", "io_s1.csv", "io_s2.csv",
                          "io_s1.json", "io_s2.json"})
        std::remove(f);
}

TEST_CASE("run subcommand emits a parseable counterexample trace") {
    write_file("io_run_cfg.json",
               R"({"kind":"stability-counterexample","out":"io_ce.csv",
                   "seed":9,"n":500})");
    CHECK(run("./filterbench run --config io_run_cfg.json > io_ce.json") == 0);
    auto rows = ingest_csv("io_ce.csv", {"distance", "n"});
    REQUIRE(rows.size() == 500);
    CHECK(rows[10][1] == 10.0);
    CHECK(rows[499][0] > 0.0);
    CHECK(read_file("io_ce.json").find("min_tail_distance") !=
          std::string::npos);
    for (const char* f : {"io_run_cfg.json", "io_ce.csv", "io_ce.json"})
        std::remove(f);
}

TEST_CASE("hmm subcommand filter trace sums to one per row") {
    write_file("io_hmm2.json",
               R"({"states":[0,1],
                   "lambda":[[0.8,0.2],[0.3,0.7]],
                   "h":[0,1],"gamma":0.4,"p0":[0.5,0.5]})");
    write_file("io_obs.csv", "y\n0.1\n0.9\n1.2\n-0.3\n0.6\n");
    CHECK(run("./filterbench hmm --model io_hmm2.json --obs io_obs.csv "
              "--mode filter --out io_f.csv >/dev/null") == 0);
    auto rows = ingest_csv("io_f.csv", {"logc", "n", "pi0", "pi1"});
    REQUIRE(rows.size() == 5);
    for (const auto& r : rows) CHECK(r[2] + r[3] == doctest::Approx(1.0));
    for (const char* f : {"io_hmm2.json", "io_obs.csv", "io_f.csv"})
        std::remove(f);
}
