// dpf: distributed AC power flow front end.
//
//   dpf solve --case case9.m --algorithm centralized
//   dpf solve --case c.m --partition p.json --algorithm aladin-gn --model reduced --trace-out t.csv
//   dpf dims --case c.m --partition p.json
//   dpf bench --case c.m --partition p.json --out bench.csv
//   dpf validate --case c.m

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "dpf/case_io.hpp"
#include "dpf/runner.hpp"

namespace fs = std::filesystem;

namespace {

struct Flags {
    std::string case_path, partition_path, model, algorithm, manifest, out;
    std::string trace_out, solution_out, reference;
    std::optional<double> rho, mu, tol;
    std::optional<int> max_iter, threads, repeat;
};

void add_run_flags(CLI::App* cmd, Flags& f) {
    cmd->add_option("--case", f.case_path, "MATPOWER .m or JSON case file");
    cmd->add_option("--partition", f.partition_path, "bus-to-region map (JSON or two-column text)");
    cmd->add_option("--model", f.model, "original | reduced");
    cmd->add_option("--algorithm", f.algorithm, "centralized | aladin-standard | aladin-gn");
    cmd->add_option("--rho", f.rho, "local proximal penalty (default 1e2)");
    cmd->add_option("--mu", f.mu, "coordinator penalty (default 1e2)");
    cmd->add_option("--tol", f.tol, "termination tolerance (default 1e-8)");
    cmd->add_option("--max-iter", f.max_iter, "outer iteration limit (default 50)");
    cmd->add_option("--threads", f.threads, "worker threads for regional steps");
    cmd->add_option("--repeat", f.repeat, "repeat each run and report the median wall time");
    cmd->add_option("--manifest", f.manifest, "JSON manifest; command-line flags take precedence");
}

// CLI flags > manifest > defaults.
dpf::RunManifest build_manifest(const Flags& f) {
    dpf::RunManifest m;
    if (!f.manifest.empty()) {
        const fs::path path(f.manifest);
        m = dpf::parse_manifest(dpf::read_text_file(path), path.parent_path());
    }
    if (!f.case_path.empty()) m.case_path = f.case_path;
    if (!f.partition_path.empty()) m.partition_path = fs::path(f.partition_path);
    if (!f.model.empty()) m.model = dpf::parse_model_variant(f.model);
    if (!f.algorithm.empty()) m.algorithm = dpf::parse_algorithm(f.algorithm);
    if (f.rho) m.rho = f.rho;
    if (f.mu) m.mu = f.mu;
    if (f.tol) m.tol = f.tol;
    if (f.max_iter) m.max_iter = f.max_iter;
    if (f.threads) m.threads = *f.threads;
    if (f.repeat) m.repeat = *f.repeat;
    if (!f.trace_out.empty()) m.trace_out = fs::path(f.trace_out);
    if (!f.solution_out.empty()) m.solution_out = fs::path(f.solution_out);
    if (!f.reference.empty()) m.reference = fs::path(f.reference);
    return m;
}

std::optional<fs::path> optional_path(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return fs::path(s);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distributed AC power flow with ALADIN"};
    app.require_subcommand(1);
    Flags f;

    auto* solve = app.add_subcommand("solve", "solve one case");
    add_run_flags(solve, f);
    solve->add_option("--trace-out", f.trace_out, "convergence trace (.csv or .jsonl)");
    solve->add_option("--solution-out", f.solution_out, "solution JSON (default: standard output)");
    solve->add_option("--reference", f.reference, "reference solution JSON for the gap/deviation columns");

    auto* dims = app.add_subcommand("dims", "print problem dimensions");
    dims->add_option("--case", f.case_path, "case file")->required();
    dims->add_option("--partition", f.partition_path, "partition file");
    dims->add_option("--model", f.model, "ignored; both models are reported");

    auto* bench = app.add_subcommand("bench", "run the algorithm/model grid and write CSV");
    add_run_flags(bench, f);
    bench->add_option("--out", f.out, "CSV output (default: standard output)");

    auto* validate = app.add_subcommand("validate", "check a case and partition");
    validate->add_option("--case", f.case_path, "case file")->required();
    validate->add_option("--partition", f.partition_path, "partition file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : dpf::exit_code::kInputError;
    }

    try {
        if (*solve) return dpf::cmd_solve(build_manifest(f), std::cout, std::cerr);
        if (*dims) return dpf::cmd_dims(f.case_path, optional_path(f.partition_path), std::cout, std::cerr);
        if (*validate) return dpf::cmd_validate(f.case_path, optional_path(f.partition_path), std::cout, std::cerr);
        if (*bench) {
            std::vector<dpf::RunManifest> runs;
            if (!f.manifest.empty() && f.case_path.empty()) {
                const fs::path path(f.manifest);
                runs = dpf::parse_bench_manifest(dpf::read_text_file(path), path.parent_path());
                for (auto& r : runs) {
                    if (f.rho) r.rho = f.rho;
                    if (f.mu) r.mu = f.mu;
                    if (f.tol) r.tol = f.tol;
                    if (f.max_iter) r.max_iter = f.max_iter;
                    if (f.threads) r.threads = *f.threads;
                    if (f.repeat) r.repeat = *f.repeat;
                }
            } else if (!f.case_path.empty() || !f.manifest.empty()) {
                runs = dpf::expand_bench(build_manifest(f));
            }
            if (f.out.empty()) return dpf::cmd_bench(runs, std::cout, std::cerr);
            std::ofstream csv(f.out);
            if (!csv) {
                std::cerr << "error: cannot write " << f.out << "\n";
                return dpf::exit_code::kInputError;
            }
            return dpf::cmd_bench(runs, csv, std::cerr);
        }
    } catch (const dpf::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return dpf::exit_code::kInputError;
    }
    return dpf::exit_code::kInputError;
}
