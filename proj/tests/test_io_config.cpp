#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hyperctl/config.hpp"
#include "hyperctl/io.hpp"
#include "hyperctl/presets.hpp"
#include "hyperctl/runner.hpp"

using namespace hyperctl;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

const char* kSample = R"(# sample config
[system]
type = both
n = 3
m = 3
[nm]
lambda = 1
mu = 2 - i/m
sigma = (x+1)*(i/n)*(j/n+1/2)
w = (x+1)*(i/n)*(j/m+1/2)
theta = (x+1)*(i/m)*(j/n+1/2)
psi = (i-j)/m
q = (i/n+1/2)*(j/m)
r = 0
[continuum]
lambda = 1
mu = 2 - eta
sigma = (x+1)*y*(zeta+1/2)
w = (x+1)*y*(zeta+1/2)
theta = (x+1)*eta*(zeta+1/2)
psi = eta - zeta
q = (y+1/2)*zeta
r = 0
[grid]
nx = 17
ne = 4
t_final = 0.2
output_dt = 0.1
[kernels]
method = sa
nx = 13
ne = 4
[controller]
variant = open_loop
[initial]
u0 = (y+1/2)/2
v0 = 1
[scenario]
type = single_run
[output]
dir = out_test
seed = 7
)";

}  // namespace

TEST_CASE("config round trip") {
    ExperimentConfig cfg = parse_config_text(kSample);
    CHECK(cfg.has_nm);
    CHECK(cfg.has_continuum);
    CHECK(cfg.n == 3);
    CHECK(cfg.grid.nx == 17);
    CHECK(cfg.kernel_method == KernelMethod::SuccessiveApprox);
    CHECK(cfg.variant == "open_loop");
    CHECK(cfg.outdir == "out_test");
    CHECK(cfg.seed == 7);
}

TEST_CASE("config rejects unknown keys and bad values") {
    CHECK_THROWS_AS(parse_config_text("[grid]\nnnx = 3\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[nope]\na = b\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[grid]\nnx = abc\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[controller]\nvariant = bogus\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[scenario]\ntype = nope\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("just text\n"), ConfigError);
}

TEST_CASE("n_list parsing") {
    ExperimentConfig cfg = parse_config_text("[scenario]\ntype = n_sweep\nn_list = 2, 5,10\n");
    REQUIRE(cfg.n_list.size() == 3);
    CHECK(cfg.n_list[0] == 2);
    CHECK(cfg.n_list[2] == 10);
}

TEST_CASE("snapshot round trip") {
    fs::path p = fs::temp_directory_path() / "hyperctl_snap_test.bin";
    std::vector<double> data(24);
    for (size_t k = 0; k < data.size(); ++k) data[k] = 0.5 * k - 3.0;
    write_snapshot(p.string(), {2u, 3u, 4u}, data.data());
    std::vector<unsigned> dims;
    auto back = read_snapshot(p.string(), dims);
    REQUIRE(dims.size() == 3);
    CHECK(dims[1] == 3);
    REQUIRE(back.size() == data.size());
    for (size_t k = 0; k < data.size(); ++k) CHECK(back[k] == data[k]);
    // corrupt magic
    {
        std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.write("XX", 2);
    }
    std::vector<unsigned> d2;
    CHECK_THROWS_AS(read_snapshot(p.string(), d2), IoError);
    fs::remove(p);
}

TEST_CASE("config hash is stable and content sensitive") {
    CHECK(config_hash("abc") == config_hash("abc"));
    CHECK(config_hash("abc") != config_hash("abd"));
}

TEST_CASE("runs are reproducible byte for byte") {
    ExperimentConfig cfg = parse_config_text(kSample);
    fs::path out = fs::temp_directory_path() / "hyperctl_repro";
    fs::remove_all(out);
    RunOverrides ov;
    ov.outdir = (out / "a").string();
    REQUIRE(run_experiment(cfg, ov) == 0);
    ov.outdir = (out / "b").string();
    REQUIRE(run_experiment(cfg, ov) == 0);
    CHECK(slurp(out / "a" / "continuum_norms.csv") == slurp(out / "b" / "continuum_norms.csv"));
    CHECK(slurp(out / "a" / "continuum_control.csv") ==
          slurp(out / "b" / "continuum_control.csv"));
    CHECK(!slurp(out / "a" / "manifest.json").empty());
    CHECK(slurp(out / "a" / "manifest.json").find("successive_approximations") !=
          std::string::npos);
    fs::remove_all(out);
}

TEST_CASE("empty system yields a zero trajectory and exit 0") {
    std::string text = kSample;
    text.replace(text.find("u0 = (y+1/2)/2"), std::string("u0 = (y+1/2)/2").size(), "u0 = 0");
    text.replace(text.find("v0 = 1\n"), 7, "v0 = 0\n");
    ExperimentConfig cfg = parse_config_text(text);
    fs::path out = fs::temp_directory_path() / "hyperctl_zero";
    fs::remove_all(out);
    RunOverrides ov;
    ov.outdir = out.string();
    CHECK(run_experiment(cfg, ov) == 0);
    std::string csv = slurp(out / "continuum_norms.csv");
    CHECK(csv.find("\n0,0,0\n") != std::string::npos);
    fs::remove_all(out);
}

TEST_CASE("trajectory and control csv carry headers with units") {
    Trajectory t;
    t.kind = StateKind::Continuum;
    t.times = {0.0, 0.5};
    t.norms = {1.0, 0.5};
    t.control_norms = {0.1, 0.05};
    t.controls = {{0.1, 0.2}, {0.05, 0.1}};
    fs::path p = fs::temp_directory_path() / "hyperctl_traj.csv";
    write_trajectory_csv(p.string(), t);
    std::string body = slurp(p);
    CHECK(body.find("# columns: t [s]") != std::string::npos);
    write_control_csv(p.string(), t);
    body = slurp(p);
    CHECK(body.find("eta") != std::string::npos);
    CHECK(body.find("0.25") != std::string::npos);  // first ensemble node of two
    fs::remove(p);
}
