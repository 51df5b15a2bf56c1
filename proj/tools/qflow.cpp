#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "qflow/qflow.hpp"

namespace fs = std::filesystem;
using qflow::json;

namespace {

void print_scalars(const json& j, const std::string& prefix = {}) {
    for (const auto& [key, value] : j.items()) {
        if (key == "config" || key == "schema") continue;
        if (value.is_object()) {
            print_scalars(value, prefix + key + ".");
        } else if (!value.is_array()) {
            std::cout << prefix << key << ": " << (value.is_string() ? value.get<std::string>() : value.dump())
                      << '\n';
        }
    }
}

void report(const json& s) {
    print_scalars(s);
    if (s.contains("checks")) {
        for (const auto& c : s["checks"]) {
            std::cout << (c["passed"].get<bool>() ? "PASS " : "FAIL ") << c["name"].get<std::string>() << " = "
                      << c["value"].dump();
            if (c.contains("detail") && !c["detail"].get<std::string>().empty()) {
                std::cout << " (" << c["detail"].get<std::string>() << ")";
            }
            std::cout << '\n';
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qflow: Lagrangian quantum hydrodynamics solver"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "qflow-out";
    long long seed = -1;
    bool quiet = false;
    app.add_option("--config", config_path, "Configuration file (key = value)");
    app.add_option("--out", out_dir, "Output directory");
    app.add_option("--seed", seed, "Random seed (overrides run.seed)")->check(CLI::NonNegativeNumber);
    app.add_flag("--quiet", quiet, "Only report errors");

    auto* lag = app.add_subcommand("run-lagrangian", "Evolve trajectories and reconstruct the wavefunction");
    auto* ref = app.add_subcommand("run-reference", "Split-step Fourier reference solve");
    auto* qtm = app.add_subcommand("run-qtm", "Quantum trajectory method run");
    auto* cmp = app.add_subcommand("compare", "Error norms between two field files or result directories");
    std::string cmp_a, cmp_b;
    cmp->add_option("a", cmp_a, "First result")->required();
    cmp->add_option("b", cmp_b, "Second result")->required();
    auto* tensor = app.add_subcommand("tensor-check", "Deformation-gradient identity suite");
    auto* accept = app.add_subcommand("gaussian-accept", "Free Gaussian acceptance run");
    for (auto* sub : {lag, ref, qtm, cmp, tensor, accept}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return qflow::exit_code::validation;
    }

    try {
        auto cfg = config_path.empty() ? qflow::Config{} : qflow::Config::load(config_path);
        if (seed >= 0) cfg.set("run.seed", std::to_string(seed));
        const fs::path out(out_dir);
        fs::create_directories(out);

        qflow::PipelineResult res;
        if (*lag) {
            res = qflow::run_lagrangian_pipeline(cfg, out);
        } else if (*ref) {
            res = qflow::run_reference_pipeline(cfg, out);
        } else if (*qtm) {
            res = qflow::run_qtm_pipeline(cfg, out);
        } else if (*cmp) {
            res = qflow::compare_pipeline(cfg, cmp_a, cmp_b);
        } else if (*tensor) {
            res = qflow::tensor_check_pipeline(cfg);
        } else {
            res = qflow::gaussian_accept_pipeline(cfg, out);
        }
        qflow::write_summary(out, res.summary);
        if (!quiet) report(res.summary);
        if (res.exit == qflow::exit_code::numerical && res.summary.contains("diagnostic")) {
            std::cerr << "qflow: numerical abort: " << res.summary["diagnostic"].get<std::string>() << '\n';
        }
        return res.exit;
    } catch (const qflow::ValidationError& e) {
        std::cerr << "qflow: " << e.what() << '\n';
        return qflow::exit_code::validation;
    } catch (const qflow::NodeEncountered& e) {
        std::cerr << "qflow: " << e.what() << '\n';
        return qflow::exit_code::numerical;
    } catch (const qflow::TrajectoryCrossing& e) {
        std::cerr << "qflow: " << e.what() << '\n';
        return qflow::exit_code::numerical;
    } catch (const qflow::InstabilityError& e) {
        std::cerr << "qflow: " << e.what() << '\n';
        return qflow::exit_code::numerical;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "qflow: " << e.what() << '\n';
        return qflow::exit_code::validation;
    } catch (const std::exception& e) {
        std::cerr << "qflow: " << e.what() << '\n';
        return qflow::exit_code::checks_failed;
    }
}
