#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

fs::path scratch() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / ("urmc_cli_test_" + std::to_string(::getpid()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Run run(const std::string& args) {
    const auto out = scratch() / "stdout.txt", err = scratch() / "stderr.txt";
    const std::string cmd = std::string(URMC_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

fs::path write_file(const std::string& name, const std::string& content) {
    const auto p = scratch() / name;
    std::ofstream(p) << content;
    return p;
}

std::vector<std::vector<std::string>> data_rows(const std::string& csv) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream is(csv);
    std::string line;
    bool header = true;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#')
            continue;
        if (header) {
            header = false;
            continue;
        }
        std::vector<std::string> f;
        std::string cur;
        bool quoted = false;
        for (char c : line) {
            if (c == '"')
                quoted = !quoted;
            else if (c == ',' && !quoted) {
                f.push_back(cur);
                cur.clear();
            } else
                cur += c;
        }
        f.push_back(cur);
        rows.push_back(f);
    }
    return rows;
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

fs::path gaussian_csv(const std::string& name, std::size_t n, bool groups, double shift) {
    std::mt19937_64 rng(1234);
    std::normal_distribution<double> z;
    std::ostringstream os;
    os << "parent_income,child_income" << (groups ? ",group" : "") << '\n';
    for (std::size_t i = 0; i < n; ++i) {
        const bool a = i % 2 == 0;
        const double y0 = z(rng);
        const double y1 = 0.5 * y0 + 0.8 * z(rng) + (a ? shift : 0.0);
        os << y0 << ',' << y1;
        if (groups)
            os << ',' << (a ? "A" : "B");
        os << '\n';
    }
    return write_file(name, os.str());
}

} // namespace

TEST_CASE("estimate: beta on a three-row file", "[cli]") {
    const auto in = write_file("toy.csv", "parent_income,child_income\n1.0,2.0\n2.0,1.0\n3.0,3.5\n");
    const auto r = run("estimate " + in.string() + " --estimator beta --tau 0");
    REQUIRE(r.code == 0);
    CHECK(first_line(r.out) == "s,tau,estimate,estimator,n");
    const auto rows = data_rows(r.out);
    REQUIRE(rows.size() == 99);
    for (const auto& row : rows) {
        REQUIRE(row.size() == 5);
        const double v = std::stod(row[2]);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        CHECK(row[4] == "3");
    }
}

TEST_CASE("estimate: sqrt-n order on three rows", "[cli]") {
    const auto in = write_file("toy.csv", "parent_income,child_income\n1.0,2.0\n2.0,1.0\n3.0,3.5\n");
    const auto r = run("estimate " + in.string() + " --estimator ebc --m sqrt-n");
    REQUIRE(r.code == 0);
    CHECK(data_rows(r.out).front()[3] == "ebc(m=2)");
}

TEST_CASE("estimate: malformed row names its line", "[cli]") {
    const auto in = write_file("bad.csv", "parent_income,child_income\n1.0,2.0\nabc,1.0\n");
    const auto r = run("estimate " + in.string() + " --estimator beta");
    CHECK(r.code == 2);
    CHECK(r.err.find("line 3") != std::string::npos);
}

TEST_CASE("estimate: input and usage errors", "[cli]") {
    const auto noheader = write_file("nohdr.csv", "1.0,2.0\n2.0,1.0\n");
    CHECK(run("estimate " + noheader.string()).code == 2);
    const auto ok = write_file("ok.csv", "parent_income,child_income\n1,2\n2,1\n3,3\n");
    CHECK(run("estimate " + ok.string() + " --tau 0.995").code == 2);
    CHECK(run("estimate " + ok.string() + " --estimator kernel").code == 2);
    CHECK(run("estimate " + ok.string() + " --m 7").code == 2);
    CHECK(run("estimate " + (scratch() / "missing.csv").string()).code == 2);
    CHECK(run("frobnicate").code == 2);
}

TEST_CASE("estimate: output round trip and atomic file", "[cli]") {
    const auto in = gaussian_csv("g.csv", 300, false, 0.0);
    const auto out = scratch() / "curve.csv";
    const auto r = run("estimate " + in.string() + " --estimator dr --link probit --design linear --grid 0.1:0.9:0.1 --out " +
                       out.string());
    REQUIRE(r.code == 0);
    const auto rows = data_rows(slurp(out));
    REQUIRE(rows.size() == 9);
    CHECK(std::stod(rows[0][0]) == Catch::Approx(0.1));
    CHECK(rows[0][3] == "dr(probit,degree=1)");
    for (const auto& e : fs::directory_iterator(scratch()))
        CHECK(e.path().string().find(".tmp.") == std::string::npos);
}

TEST_CASE("estimate: conditional dr curve", "[cli]") {
    const auto in = gaussian_csv("groups.csv", 400, true, 0.4);
    const auto a = run("estimate " + in.string() + " --estimator dr --group A --grid 0.5");
    const auto b = run("estimate " + in.string() + " --estimator dr --group B --grid 0.5");
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    CHECK(std::stod(data_rows(a.out)[0][2]) > std::stod(data_rows(b.out)[0][2]));
    CHECK(run("estimate " + in.string() + " --estimator dr --group Z").code == 2);
}

TEST_CASE("bands: single curve, nesting and determinism", "[cli]") {
    const auto in = gaussian_csv("single.csv", 200, false, 0.0);
    const std::string args = "bands " + in.string() + " --estimator dr --link probit --design linear --B 60 --seed 7";
    const auto r1 = run(args);
    REQUIRE(r1.code == 0);
    const auto r2 = run(args);
    CHECK(r1.out == r2.out);
    const auto rows = data_rows(r1.out);
    REQUIRE(rows.size() == 91);
    for (const auto& row : rows) {
        REQUIRE(row.size() == 9);
        CHECK(std::stod(row[6]) <= std::stod(row[4]));
        CHECK(std::stod(row[7]) >= std::stod(row[5]));
    }
    CHECK(r1.out.find("critical_value=") != std::string::npos);
}

TEST_CASE("bands: missing seed is drawn and printed", "[cli]") {
    const auto in = gaussian_csv("single.csv", 100, false, 0.0);
    const auto r = run("bands " + in.string() + " --estimator beta --B 50");
    REQUIRE(r.code == 0);
    CHECK(r.err.find("seed: ") != std::string::npos);
}

TEST_CASE("bands: identical groups give an empty dominance set", "[cli]") {
    const auto in = gaussian_csv("same.csv", 400, true, 0.0);
    const auto r = run("bands " + in.string() + " --link probit --design linear --B 100 --seed 3 --group-a A --group-b B");
    REQUIRE(r.code == 0);
    CHECK(r.out.find("# dominance_set: none") != std::string::npos);
    const auto plain = gaussian_csv("plain.csv", 100, false, 0.0);
    CHECK(run("bands " + plain.string() + " --B 50 --seed 1 --group-a A --group-b B").code == 2);
}

TEST_CASE("simulate: config echo and metrics", "[cli]") {
    const auto out = scratch() / "metrics.csv";
    const auto r = run("simulate --family gaussian --tau-k 0.5 --n 60 --reps 5 --estimators ebc-sqrt,beta --seed 1 "
                       "--out " + out.string());
    REQUIRE(r.code == 0);
    CHECK(r.out.find("theta=0.707") != std::string::npos);
    const auto rows = data_rows(slurp(out));
    REQUIRE(rows.size() == 2);
    CHECK(rows[0][0] == "ebc-sqrt");
    CHECK(std::stod(rows[0][6]) >= std::stod(rows[0][5]));
}

TEST_CASE("simulate: one replication, overlay and errors", "[cli]") {
    const auto overlay = scratch() / "overlay.csv";
    const auto r = run("simulate --family independence --n 40 --reps 1 --estimators ebc-sqrt --seed 2 --overlay " +
                       overlay.string() + " --overlay-reps 1");
    REQUIRE(r.code == 0);
    const auto rows = data_rows(r.out);
    REQUIRE(rows.size() == 1);
    CHECK(std::stod(rows[0][5]) == Catch::Approx(std::stod(rows[0][6])));
    // true + mean + one replication
    CHECK(data_rows(slurp(overlay)).size() == 3 * 99);
    CHECK(run("simulate --family clayton --tau-k -0.3 --n 40 --reps 2 --seed 1").code == 2);
    CHECK(run("simulate --family gaussian --n 40 --reps 2 --estimators nonsense --seed 1").code == 2);
}
