#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "ensim/io.hpp"
#include "ensim/rng.hpp"

using namespace ensim;

namespace {
std::string tmpdir() {
    auto d = std::filesystem::temp_directory_path() / "ensim_io_test";
    std::filesystem::create_directories(d);
    return d.string();
}
}  // namespace

TEST_CASE("bundle round trip, binary and csv payloads", "[io]") {
    Grid g(2, {6, 5, 1}, {0.1, 0.2, 1.0}, 0.05, Boundary::absorbing);
    BundleData b;
    b.grid = g;
    CounterRng rng{9, 0};
    std::vector<Real> a(g.size()), c(g.size());
    for (std::size_t p = 0; p < g.size(); ++p) {
        a[p] = rng.uniform(p, -5, 5);
        c[p] = rng.uniform(p + 1000, -5, 5);
    }
    b.add("A0", a);
    b.add("A1", c);
    b.meta["seed"] = 9;

    for (bool csv : {false, true}) {
        std::string base = tmpdir() + (csv ? "/round_csv" : "/round_bin");
        write_bundle(base, b, csv);
        auto r = read_bundle(base + ".json");
        REQUIRE(r.grid.dim == 2);
        REQUIRE(r.grid.shape[0] == 6);
        REQUIRE(r.grid.boundary == Boundary::absorbing);
        REQUIRE(r.names == std::vector<std::string>{"A0", "A1"});
        REQUIRE(r.meta.at("seed") == 9);
        for (std::size_t p = 0; p < g.size(); ++p) {
            if (csv) {
                REQUIRE(r.comps[0][p] == Catch::Approx(a[p]).margin(0));
            } else {
                REQUIRE(r.comps[0][p] == a[p]);  // binary payload is bit exact
            }
            REQUIRE(r.comps[1][p] == c[p]);
        }
    }
}

TEST_CASE("complex fields serialize as re/im component pairs", "[io]") {
    Grid g = Grid::line(8, 0.1, 0.01);
    BundleData b;
    b.grid = g;
    std::vector<Complex> psi(g.size());
    for (std::size_t p = 0; p < g.size(); ++p) psi[p] = Complex(Real(p), -Real(p) * 0.5);
    b.add_complex("psi", psi);
    REQUIRE(b.names == std::vector<std::string>{"psi_re", "psi_im"});
    std::string base = tmpdir() + "/cplx";
    write_bundle(base, b);
    auto r = read_bundle(base + ".json");
    REQUIRE(r.comps[1][3] == -1.5);
}

TEST_CASE("reading a missing or foreign file fails loudly", "[io]") {
    REQUIRE_THROWS_AS(read_bundle(tmpdir() + "/nope.json"), Error);
    std::string base = tmpdir() + "/foreign";
    {
        std::ofstream f(base + ".json");
        f << "{\"format\": \"something-else\"}\n";
    }
    REQUIRE_THROWS(read_bundle(base + ".json"));
}

TEST_CASE("csv tables print deterministically", "[io]") {
    CsvTable t;
    t.header = {"x", "y"};
    t.rows = {{1.0, 0.5}, {2.0, 1.0 / 3.0}};
    std::string p1 = tmpdir() + "/t1.csv", p2 = tmpdir() + "/t2.csv";
    t.write(p1);
    t.write(p2);
    std::ifstream f1(p1), f2(p2);
    std::stringstream s1, s2;
    s1 << f1.rdbuf();
    s2 << f2.rdbuf();
    REQUIRE(s1.str() == s2.str());
    REQUIRE(s1.str().find("0.33333333333333331") != std::string::npos);
}
