#include "dpf/runner.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <set>

#include <json.hpp>

#include "dpf/nr_central.hpp"

namespace dpf {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    PfSolution solution;
    std::optional<RunResult> distributed;
    double median_time_s = 0.0;
    bool converged = false;
};

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

PartitionSpec single_region(const RawCase& c) {
    PartitionSpec spec;
    for (const auto& b : c.buses) spec.region_of[b.id] = 1;
    return spec;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

// Runs `m` `repeat` times; NR failures propagate as exceptions.
Outcome execute(const RunManifest& m, const RawCase& c, const DistributedModel* model,
                const TraceReference* reference) {
    Outcome outcome;
    std::vector<double> times;
    for (int k = 0; k < std::max(1, m.repeat); ++k) {
        if (m.algorithm == Algorithm::Centralized) {
            NrOptions nr;
            nr.tol = m.tol.value_or(1e-8);
            if (m.max_iter) nr.max_iter = *m.max_iter;
            outcome.solution = nr_solve(c, nr);
            outcome.converged = true;
            times.push_back(outcome.solution.wall_time_s);
        } else {
            const SolverConfig cfg = m.solver_config();
            const VectorXd x0 = model->initial_state();
            RunResult run = m.algorithm == Algorithm::AladinStandard ? run_standard(*model, cfg, x0, reference)
                                                                     : run_gn_inexact(*model, cfg, x0, reference);
            outcome.solution = run.solution;
            outcome.converged = run.converged;
            times.push_back(run.solution.wall_time_s);
            outcome.distributed = std::move(run);
        }
    }
    outcome.median_time_s = median(times);
    outcome.solution.wall_time_s = outcome.median_time_s;
    return outcome;
}

std::string csv_safe(std::string s) {
    std::replace(s.begin(), s.end(), ',', ';');
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

fs::path resolve(const fs::path& p, const fs::path& base_dir) {
    return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

}  // namespace

std::string_view to_string(Algorithm algorithm) {
    switch (algorithm) {
        case Algorithm::Centralized: return "centralized";
        case Algorithm::AladinStandard: return "aladin-standard";
        case Algorithm::AladinGn: return "aladin-gn";
    }
    return "?";
}

Algorithm parse_algorithm(std::string_view text) {
    if (text == "centralized") return Algorithm::Centralized;
    if (text == "aladin-standard") return Algorithm::AladinStandard;
    if (text == "aladin-gn") return Algorithm::AladinGn;
    throw Error("unknown algorithm '" + std::string(text) + "' (expected centralized, aladin-standard or aladin-gn)");
}

void RunManifest::validate() const {
    if (case_path.empty()) throw Error("a case file is required (--case)");
    if (algorithm != Algorithm::Centralized && !partition_path)
        throw Error("algorithm " + std::string(to_string(algorithm)) + " requires a partition (--partition)");
    if (repeat < 1) throw Error("--repeat must be at least 1");
    if (threads < 1) throw Error("--threads must be at least 1");
}

SolverConfig RunManifest::solver_config() const {
    SolverConfig cfg;
    if (rho) cfg.rho = *rho;
    if (mu) cfg.mu = *mu;
    if (tol) cfg.eps = *tol;
    if (max_iter) cfg.max_outer_iter = *max_iter;
    cfg.threads = threads;
    return cfg;
}

RunManifest parse_manifest(std::string_view json_text, const fs::path& base_dir, RunManifest base) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw SyntaxError(std::string("manifest is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw SyntaxError("manifest must be a JSON object");
    try {
        if (doc.contains("case")) base.case_path = resolve(doc["case"].get<std::string>(), base_dir);
        if (doc.contains("partition")) base.partition_path = resolve(doc["partition"].get<std::string>(), base_dir);
        if (doc.contains("model")) base.model = parse_model_variant(doc["model"].get<std::string>());
        if (doc.contains("algorithm")) base.algorithm = parse_algorithm(doc["algorithm"].get<std::string>());
        if (doc.contains("rho")) base.rho = doc["rho"].get<double>();
        if (doc.contains("mu")) base.mu = doc["mu"].get<double>();
        if (doc.contains("tol")) base.tol = doc["tol"].get<double>();
        if (doc.contains("max_iter")) base.max_iter = doc["max_iter"].get<int>();
        if (doc.contains("trace_out")) base.trace_out = resolve(doc["trace_out"].get<std::string>(), base_dir);
        if (doc.contains("solution_out")) base.solution_out = resolve(doc["solution_out"].get<std::string>(), base_dir);
        if (doc.contains("reference")) base.reference = resolve(doc["reference"].get<std::string>(), base_dir);
        if (doc.contains("threads")) base.threads = doc["threads"].get<int>();
        if (doc.contains("repeat")) base.repeat = doc["repeat"].get<int>();
    } catch (const json::exception& e) {
        throw SyntaxError(std::string("malformed manifest: ") + e.what());
    }
    return base;
}

std::vector<RunManifest> expand_bench(const RunManifest& base) {
    std::vector<RunManifest> runs;
    RunManifest central = base;
    central.algorithm = Algorithm::Centralized;
    for (Algorithm a : {Algorithm::AladinStandard, Algorithm::AladinGn})
        for (ModelVariant v : {ModelVariant::Original, ModelVariant::Reduced}) {
            RunManifest m = base;
            m.algorithm = a;
            m.model = v;
            runs.push_back(m);
        }
    runs.push_back(central);
    return runs;
}

std::vector<RunManifest> parse_bench_manifest(std::string_view json_text, const fs::path& base_dir) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw SyntaxError(std::string("bench manifest is not valid JSON: ") + e.what());
    }
    if (doc.is_object() && doc.contains("runs")) doc = doc["runs"];
    if (!doc.is_array()) throw SyntaxError("bench manifest must be an array of runs");

    std::vector<RunManifest> runs;
    std::set<fs::path> centralized_cases;
    for (const auto& entry : doc) {
        if (!entry.is_object()) throw SyntaxError("bench entries must be objects");
        const RunManifest m = parse_manifest(entry.dump(), base_dir);
        std::vector<Algorithm> algorithms;
        std::vector<ModelVariant> models;
        if (entry.contains("algorithm"))
            algorithms.push_back(m.algorithm);
        else
            algorithms = {Algorithm::AladinStandard, Algorithm::AladinGn};
        if (entry.contains("model"))
            models.push_back(m.model);
        else
            models = {ModelVariant::Original, ModelVariant::Reduced};
        for (Algorithm a : algorithms) {
            if (a == Algorithm::Centralized) {
                centralized_cases.insert(m.case_path);
                RunManifest c = m;
                runs.push_back(c);
                continue;
            }
            for (ModelVariant v : models) {
                RunManifest r = m;
                r.algorithm = a;
                r.model = v;
                runs.push_back(r);
            }
        }
        if (!centralized_cases.contains(m.case_path)) {
            RunManifest c = m;
            c.algorithm = Algorithm::Centralized;
            runs.push_back(c);
            centralized_cases.insert(m.case_path);
        }
    }
    return runs;
}

int cmd_solve(const RunManifest& manifest, std::ostream& out, std::ostream& err) {
    RawCase c;
    std::optional<DistributedModel> model;
    std::optional<TraceReference> reference;
    try {
        manifest.validate();
        c = load_case(manifest.case_path);
        if (manifest.algorithm != Algorithm::Centralized) {
            const PartitionSpec spec = load_partition(*manifest.partition_path, c);
            model.emplace(c, spec, manifest.model);
            manifest.solver_config().validate(*model);
            if (manifest.reference) {
                const PfSolution ref = parse_solution_json(read_text_file(*manifest.reference));
                TraceReference tr;
                tr.state = model->embed(ref);
                tr.objective = model->objective(tr.state);
                reference = std::move(tr);
            }
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code::kInputError;
    }

    Outcome outcome;
    try {
        outcome = execute(manifest, c, model ? &*model : nullptr, reference ? &*reference : nullptr);
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return exit_code::kInputError;
    } catch (const Error& e) {
        err << "no convergence: " << e.what() << "\n";
        return exit_code::kNoConvergence;
    }

    try {
        const std::string solution = solution_to_json(outcome.solution, std::string(to_string(manifest.algorithm)));
        if (manifest.solution_out)
            write_file(*manifest.solution_out, solution + "\n");
        else
            out << solution << "\n";
        if (outcome.distributed && manifest.trace_out) {
            const auto& trace = outcome.distributed->trace;
            const auto ext = manifest.trace_out->extension();
            write_file(*manifest.trace_out, ext == ".jsonl" || ext == ".json" ? trace.to_jsonl() : trace.to_csv());
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code::kInputError;
    }

    out << "algorithm=" << to_string(manifest.algorithm);
    if (model) out << " model=" << to_string(manifest.model) << " regions=" << model->n_regions();
    out << " converged=" << (outcome.converged ? "true" : "false") << " iterations=" << outcome.solution.iterations
        << " wall_time_s=" << outcome.median_time_s;
    if (outcome.distributed && !outcome.distributed->trace.records.empty()) {
        const auto& last = outcome.distributed->trace.records.back();
        out << " primal_inf=" << last.primal_inf << " dual_inf=" << last.dual_inf;
    } else {
        out << " mismatch=" << outcome.solution.mismatch;
    }
    out << "\n";
    return outcome.converged ? exit_code::kOk : exit_code::kNoConvergence;
}

int cmd_dims(const fs::path& case_path, const std::optional<fs::path>& partition_path, std::ostream& out,
             std::ostream& err) {
    DimensionReport report;
    try {
        const RawCase c = load_case(case_path);
        const PartitionSpec spec = partition_path ? load_partition(*partition_path, c) : single_region(c);
        report = dimension_report(decompose(c, spec));
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code::kInputError;
    }
    out << "buses\tregions\tconnections\tmodel\tdimension\n";
    for (ModelVariant v : {ModelVariant::Original, ModelVariant::Reduced})
        out << report.n_bus << "\t" << report.n_reg << "\t" << report.n_conn << "\t" << to_string(v) << "\t"
            << report.dimension(v) << "\n";
    json doc = {{"n_bus", report.n_bus},
                {"n_reg", report.n_reg},
                {"n_conn", report.n_conn},
                {"n_core", report.n_core},
                {"n_copy", report.n_copy},
                {"dimension", {{"original", report.original}, {"reduced", report.reduced}}}};
    out << doc.dump() << "\n";
    return exit_code::kOk;
}

int cmd_bench(const std::vector<RunManifest>& runs, std::ostream& csv, std::ostream& err) {
    if (runs.empty()) {
        err << "error: no benchmark runs given\n";
        return exit_code::kInputError;
    }
    csv << "case,buses,n_reg,n_conn,model,algorithm,dimension,iterations,time_s,converged,status\n";
    bool all_ok = true;
    for (const auto& m : runs) {
        std::string row_prefix = m.case_path.filename().string();
        try {
            m.validate();
            const RawCase c = load_case(m.case_path);
            const PartitionSpec spec = m.partition_path ? load_partition(*m.partition_path, c) : single_region(c);
            std::optional<DistributedModel> model;
            if (m.algorithm != Algorithm::Centralized) model.emplace(c, spec, m.model);
            const DimensionReport dims = dimension_report(model ? model->decomposition() : decompose(c, spec));
            row_prefix += "," + std::to_string(dims.n_bus) + "," + std::to_string(dims.n_reg) + "," +
                          std::to_string(dims.n_conn) + ",";
            if (model)
                row_prefix += std::string(to_string(m.model)) + "," + std::string(to_string(m.algorithm)) + "," +
                              std::to_string(dims.dimension(m.model));
            else
                row_prefix += "," + std::string(to_string(m.algorithm)) + ",";
            const Outcome outcome = execute(m, c, model ? &*model : nullptr, nullptr);
            csv << row_prefix << "," << outcome.solution.iterations << "," << outcome.median_time_s << ","
                << (outcome.converged ? "true" : "false") << "," << (outcome.converged ? "ok" : "max-iterations")
                << "\n";
            all_ok = all_ok && outcome.converged;
        } catch (const Error& e) {
            const auto commas = std::count(row_prefix.begin(), row_prefix.end(), ',');
            for (auto k = commas; k < 7; ++k) row_prefix += ",";
            csv << row_prefix << ",,,false," << csv_safe(e.what()) << "\n";
            err << "run failed: " << m.case_path.string() << " " << to_string(m.algorithm) << ": " << e.what()
                << "\n";
            all_ok = false;
        }
    }
    return all_ok ? exit_code::kOk : exit_code::kNoConvergence;
}

int cmd_validate(const fs::path& case_path, const std::optional<fs::path>& partition_path, std::ostream& out,
                 std::ostream& err) {
    RawCase c;
    std::vector<Diagnostic> diagnostics;
    try {
        c = load_case(case_path);
    } catch (const ValidationError& e) {
        diagnostics = e.diagnostics();
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code::kInputError;
    }
    if (diagnostics.empty() && partition_path) {
        try {
            diagnostics = validate_partition(parse_partition(read_text_file(*partition_path)), c);
        } catch (const Error& e) {
            err << "error: " << e.what() << "\n";
            return exit_code::kInputError;
        }
    }
    for (const auto& d : diagnostics) out << d.rule << "\t" << d.locus << "\t" << d.message << "\n";
    if (diagnostics.empty()) out << "ok: " << c.buses.size() << " buses, " << c.branches.size() << " branches, "
                                 << c.gens.size() << " generators\n";
    return diagnostics.empty() ? exit_code::kOk : exit_code::kInputError;
}

}  // namespace dpf
