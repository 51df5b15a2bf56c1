#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path tmp = QFLOW_TEST_TMP;

int qflow(const std::string& args) {
    const std::string cmd = std::string("\"") + QFLOW_CLI + "\" " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path write_config(const std::string& name, const std::string& text) {
    fs::create_directories(tmp);
    const auto p = tmp / name;
    std::ofstream(p) << text;
    return p;
}

std::string out(const std::string& name) { return "--out \"" + (tmp / name).string() + "\""; }

}  // namespace

TEST_CASE("gaussian-accept passes and is reproducible") {
    REQUIRE(qflow(out("accept1") + " --quiet gaussian-accept") == 0);
    REQUIRE(qflow(out("accept2") + " --quiet gaussian-accept") == 0);
    for (const char* f : {"summary.json", "trajectories.csv", "field.csv"}) {
        CHECK(slurp(tmp / "accept1" / f) == slurp(tmp / "accept2" / f));
    }
    CHECK(slurp(tmp / "accept1" / "trajectories.csv").rfind("# schema: qflow.trajectories/1\n", 0) == 0);
    CHECK(slurp(tmp / "accept1" / "field.csv").rfind("# schema: qflow.fields/1\n", 0) == 0);
    const auto s = nlohmann::json::parse(slurp(tmp / "accept1" / "summary.json"));
    CHECK(s["schema"] == "qflow.summary/1");
    CHECK(s["passed"] == true);
}

TEST_CASE("invalid configuration exits with 2") {
    const auto neg = write_config("neg_dt.cfg", "solver.dt = -1\n");
    CHECK(qflow("--config \"" + neg.string() + "\" " + out("neg") + " run-lagrangian") == 2);
    const auto unknown = write_config("unknown.cfg", "solver.dtt = 1\n");
    CHECK(qflow("--config \"" + unknown.string() + "\" " + out("unknown") + " run-lagrangian") == 2);
    CHECK(qflow("--config /nonexistent.cfg " + out("missing") + " run-lagrangian") == 2);
    CHECK(qflow("no-such-command") == 2);
    const auto perturbed = write_config("perturbed.cfg", "state.kind = perturbed\n");
    CHECK(qflow("--config \"" + perturbed.string() + "\" " + out("pert") + " gaussian-accept") == 2);
}

TEST_CASE("oversized step is a numerical abort") {
    const auto cfg = write_config("big_dt.cfg", "grid.n_labels = 81\nsolver.dt = 0.2\nsolver.snapshot_stride = 1\n");
    CHECK(qflow("--config \"" + cfg.string() + "\" " + out("abort") + " run-lagrangian") == 3);
    CHECK(fs::exists(tmp / "abort" / "summary.json"));
}

TEST_CASE("tensor-check") {
    REQUIRE(qflow(out("tensor") + " --quiet tensor-check") == 0);
    const auto s = nlohmann::json::parse(slurp(tmp / "tensor" / "summary.json"));
    CHECK(s["cofactor_draws"] == 100);
    CHECK(s["cofactor_passed"] == 100);
    CHECK(qflow(out("tensor2") + " --seed 7 --quiet tensor-check") == 0);
}

TEST_CASE("reference run and compare") {
    const auto cfg = write_config("short.cfg",
                                  "solver.t_final = 0.5\nreference.n = 601\nreference.x_min = -12\n"
                                  "reference.x_max = 12.04\n");
    REQUIRE(qflow("--config \"" + cfg.string() + "\" " + out("ref") + " --quiet run-reference") == 0);
    REQUIRE(qflow("--config \"" + cfg.string() + "\" " + out("lag") + " --quiet run-lagrangian") == 0);
    CHECK(slurp(tmp / "ref" / "field.csv").rfind("# schema: qflow.fields/1\n", 0) == 0);
    const std::string a = "\"" + (tmp / "lag").string() + "\"";
    const std::string b = "\"" + (tmp / "ref").string() + "\"";
    CHECK(qflow(out("cmp") + " --quiet compare " + a + " " + b) == 0);
    const auto s = nlohmann::json::parse(slurp(tmp / "cmp" / "summary.json"));
    CHECK(s.contains("psi_l2_error"));
}
