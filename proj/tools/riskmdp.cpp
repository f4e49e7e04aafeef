// Command-line front end: model validation, normalization, solving,
// oracle comparison, simulation and reduction demos. JSON reports go to
// stdout, a short human summary to stderr (suppressed by --quiet).
// Exit codes: 0 ok, 1 usage, 2 model error, 3 solver refusal, 4 budget.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include "riskmdp/errors.hpp"
#include "riskmdp/expect.hpp"
#include "riskmdp/madpe.hpp"
#include "riskmdp/measures.hpp"
#include "riskmdp/model.hpp"
#include "riskmdp/oracle.hpp"
#include "riskmdp/preprocess.hpp"
#include "riskmdp/reductions.hpp"
#include "riskmdp/tbpe.hpp"

using json = nlohmann::json;
using namespace riskmdp;

namespace {

struct Options {
    bool quiet = false;
    int decimals = -1;
    int jobs = 1;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ModelError(ModelErrorKind::syntax, "cannot open '" + path + "'");
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

json rational_json(const Rat& r, const Options& opt) {
    if (opt.decimals < 0) return rat_to_string(r);
    json j;
    j["exact"] = rat_to_string(r);
    std::ostringstream out;
    out.precision(opt.decimals);
    out << std::fixed << rat_to_double(r);
    j["approx"] = out.str();
    return j;
}

json distribution_json(const RewardDistribution& d) {
    json atoms = json::array();
    for (const auto& [v, p] : d.atoms) atoms.push_back({rat_to_string(v), rat_to_string(p)});
    json j;
    j["atoms"] = atoms;
    j["tail_mass"] = rat_to_string(d.tail_mass);
    return j;
}

Rat parse_rat_arg(const std::string& text, const std::string& what) {
    auto r = parse_rational(text);
    if (!r) throw CLI::ValidationError(what, "expected a rational like 2/5 or 0.4");
    return *r;
}

PenaltyKind parse_kind(const std::string& name) {
    if (name == "vpe") return PenaltyKind::vpe;
    if (name == "madpe") return PenaltyKind::madpe;
    if (name == "smadpe") return PenaltyKind::smadpe;
    if (name == "svpe") return PenaltyKind::svpe;
    if (name == "tbpe") return PenaltyKind::tbpe;
    throw CLI::ValidationError("objective", "one of vpe|madpe|smadpe|svpe|tbpe");
}

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    long ms() const {
        return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start)
            .count();
    }
};

void emit(const json& report, const Options& opt, const std::string& summary) {
    std::cout << report.dump(2) << "\n";
    if (!opt.quiet) std::cerr << summary << "\n";
}

Scheduler load_scheduler(const Mdp& m, const std::string& path) { return parse_scheduler(m, read_file(path)); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"exact risk-averse total-reward optimization on MDPs"};
    app.require_subcommand(1);
    app.fallthrough();
    Options opt;
    app.add_flag("--quiet", opt.quiet, "suppress the stderr summary");
    app.add_option("--decimals", opt.decimals, "add a float rendering with this many digits");
    app.add_option("--jobs", opt.jobs, "threads for sweep/grid/simulation");

    std::string model_path, chain_path, sched_path, out_path, breakpoints_path;
    std::string penalty_name = "tbp", objective_name = "madpe", lambda_text = "1/4", threshold_text = "0";
    std::string t_text = "0", delta_text = "0", epsilon_text = "0", method = "mad", class_name = "memoryless";
    long resolution = 100, bound = 0, samples = 100000;
    long budget = 20000000;
    bool want_surface = false, use_min = false, use_float = false;
    double tol = 1e-10;
    std::uint64_t seed = 0;
    bool seed_given = false;

    auto add_model = [&](CLI::App* cmd) { cmd->add_option("--model", model_path, "model file")->required(); };

    CLI::App* validate_cmd = app.add_subcommand("validate", "check model invariants");
    add_model(validate_cmd);

    CLI::App* normalize_cmd = app.add_subcommand("normalize", "collapse end components and zero-value states");
    add_model(normalize_cmd);
    normalize_cmd->add_option("--out", out_path, "write the normalized model here");

    CLI::App* expmax_cmd = app.add_subcommand("expmax", "optimal expected total reward");
    add_model(expmax_cmd);
    expmax_cmd->add_flag("--min", use_min, "minimize instead of maximize");
    expmax_cmd->add_flag("--float", use_float, "value iteration instead of the exact solver");
    expmax_cmd->add_option("--tol", tol, "value-iteration tolerance");

    CLI::App* measures_cmd = app.add_subcommand("measures", "deviation measures of a reward distribution");
    measures_cmd->add_option("--chain", chain_path, "chain file");
    measures_cmd->add_option("--model", model_path, "model file (with --scheduler)");
    measures_cmd->add_option("--scheduler", sched_path, "scheduler file");
    measures_cmd->add_option("--epsilon", epsilon_text, "tail bound; switches to interval bounds mode");

    CLI::App* tbpe_cmd = app.add_subcommand("solve-tbpe", "maximize the threshold-penalized expectation");
    add_model(tbpe_cmd);
    tbpe_cmd->add_option("--penalty", penalty_name, "tbp|crinkle2|custom");
    tbpe_cmd->add_option("--lambda", lambda_text, "penalty factor");
    tbpe_cmd->add_option("--threshold", threshold_text, "threshold t");
    tbpe_cmd->add_option("--breakpoints", breakpoints_path, "custom penalty breakpoints file");
    tbpe_cmd->add_option("--scheduler-out", out_path, "write the optimal scheduler here");

    CLI::App* madpe_cmd = app.add_subcommand("solve-madpe", "maximize the deviation-penalized expectation");
    add_model(madpe_cmd);
    madpe_cmd->add_option("--lambda", lambda_text, "penalty factor in (0, 1/2]");
    madpe_cmd->add_option("--delta", delta_text, "sweep grid step");
    madpe_cmd->add_option("--scheduler-out", out_path, "write the best scheduler here");

    CLI::App* qp_cmd = app.add_subcommand("export-qp", "write the quadratic program");
    add_model(qp_cmd);
    qp_cmd->add_option("--lambda", lambda_text, "penalty factor in (0, 1/2]");
    qp_cmd->add_option("--out", out_path, "output file (stdout JSON still reports the hash)");

    CLI::App* oracle_cmd = app.add_subcommand("oracle", "brute-force verification backstops");
    CLI::App* grid_cmd = oracle_cmd->add_subcommand("grid", "exact grid search over schedulers");
    add_model(grid_cmd);
    grid_cmd->add_option("--objective", objective_name, "vpe|madpe|smadpe|svpe|tbpe");
    grid_cmd->add_option("--lambda", lambda_text, "penalty factor");
    grid_cmd->add_option("--threshold", threshold_text, "tbpe threshold");
    grid_cmd->add_option("--resolution", resolution, "probability grid denominator");
    grid_cmd->add_option("--class", class_name, "memoryless|reward-based");
    grid_cmd->add_option("--bound", bound, "reward bound for the reward-based class");
    grid_cmd->add_option("--budget", budget, "max grid points");
    grid_cmd->add_flag("--surface", want_surface, "include every grid value in the report");

    CLI::App* sim_cmd = oracle_cmd->add_subcommand("simulate", "seeded Monte Carlo sampling");
    add_model(sim_cmd);
    sim_cmd->add_option("--scheduler", sched_path, "scheduler file")->required();
    sim_cmd->add_option("-n,--samples", samples, "number of paths");
    sim_cmd->add_option("--seed", seed, "PRNG seed (default from RISKMDP_SEED)")->each([&](const std::string&) {
        seed_given = true;
    });

    CLI::App* reduce_cmd = app.add_subcommand("reduce", "tail-probability reduction demos");
    reduce_cmd->add_option("--chain", chain_path, "acyclic chain file")->required();
    reduce_cmd->add_option("--t", t_text, "threshold")->required();
    reduce_cmd->add_option("--method", method, "mad|crinkle|search");

    CLI::App* eval_cmd = app.add_subcommand("eval-scheduler", "distribution and measures under a scheduler");
    add_model(eval_cmd);
    eval_cmd->add_option("--scheduler", sched_path, "scheduler file")->required();
    eval_cmd->add_option("--objective", objective_name, "penalized expectation to report");
    eval_cmd->add_option("--lambda", lambda_text, "penalty factor");
    eval_cmd->add_option("--threshold", threshold_text, "tbpe threshold");
    eval_cmd->add_option("--epsilon", epsilon_text, "tail bound for cyclic models");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;  // help exits clean, usage errors exit 1
    }

    json report;
    report["command"] = [&] {
        std::ostringstream echo;
        for (int i = 1; i < argc; ++i) echo << (i > 1 ? " " : "") << argv[i];
        return echo.str();
    }();
    json timings;
    int exit_code = 0;
    std::string summary;

    try {
        Timer total;
        if (validate_cmd->parsed()) {
            Mdp m = parse_model(read_file(model_path));
            report["model_hash"] = model_hash(m);
            ValidationReport rep = validate(m);
            json issues = json::array();
            for (const auto& issue : rep.issues) issues.push_back(issue.message);
            report["result"] = {{"ok", rep.ok()}, {"issues", issues}};
            summary = rep.ok() ? "model is valid" : std::to_string(rep.issues.size()) + " issue(s) found";
            if (!rep.ok()) exit_code = 2;
        } else if (normalize_cmd->parsed()) {
            Mdp m = parse_model(read_file(model_path));
            report["model_hash"] = model_hash(m);
            NormalizedMdp n = normalize(m);
            json prov;
            for (const auto& [name, members] : n.provenance) {
                json list = json::array();
                for (const auto& s : members) list.push_back(s);
                prov[name] = list;
            }
            report["result"] = {{"states", n.mdp.state_count()},
                               {"goal", n.mdp.state_names[n.goal]},
                               {"provenance", prov},
                               {"model", serialize_model(n.mdp)}};
            if (!out_path.empty()) {
                std::ofstream out(out_path);
                out << serialize_model(n.mdp);
            }
            summary = "normalized to " + std::to_string(n.mdp.state_count()) + " states";
        } else if (expmax_cmd->parsed()) {
            Mdp m = parse_model(read_file(model_path));
            report["model_hash"] = model_hash(m);
            NormalizedMdp n = ensure_normalized(m);
            Direction dir = use_min ? Direction::min : Direction::max;
            if (use_float) {
                FloatValueTable vt = value_iteration(n.mdp, dir, tol);
                report["result"] = {{"value", vt.values[n.mdp.initial]}, {"iterations", vt.iterations}};
                summary = "value " + std::to_string(vt.values[n.mdp.initial]);
            } else {
                ValueTable vt = optimal_expected_reward(n.mdp, dir);
                json values, policy;
                for (int s = 0; s < n.mdp.state_count(); ++s)
                    values[n.mdp.state_names[s]] = rational_json(vt.values[s], opt);
                for (const auto& [s, a] : vt.policy)
                    policy[n.mdp.state_names[s]] = n.mdp.action_names[a];
                report["result"] = {{"value", rational_json(vt.values[n.mdp.initial], opt)},
                                   {"values", values},
                                   {"policy", policy}};
                summary = "value " + rat_to_string(vt.values[n.mdp.initial]);
            }
        } else if (measures_cmd->parsed()) {
            RewardDistribution d;
            Rat eps = parse_rat_arg(epsilon_text, "epsilon");
            if (!chain_path.empty()) {
                Chain c = Chain::from_mdp(parse_model(read_file(chain_path)));
                report["model_hash"] = model_hash(c.mdp);
                d = eps > 0 ? truncated_distribution(c, eps) : exact_distribution(c);
            } else if (!model_path.empty() && !sched_path.empty()) {
                Mdp m = parse_model(read_file(model_path));
                report["model_hash"] = model_hash(m);
                d = distribution_of(m, load_scheduler(m, sched_path), eps);
            } else {
                throw CLI::ValidationError("measures", "need --chain or --model with --scheduler");
            }
            report["result"]["distribution"] = distribution_json(d);
            if (d.tail_mass == 0) {
                MeasureReport r = deviation_report(d);
                report["result"]["E"] = rational_json(r.expectation, opt);
                report["result"]["V"] = rational_json(r.variance, opt);
                report["result"]["MAD"] = rational_json(r.mad, opt);
                report["result"]["SMAD"] = rational_json(r.smad, opt);
                report["result"]["SV"] = rational_json(r.semivariance, opt);
                summary = "E=" + rat_to_string(r.expectation) + " MAD=" + rat_to_string(r.mad);
            } else {
                MeasureBounds b = deviation_bounds(d, Rat(1));
                auto iv = [&](const Interval& i) {
                    return json{rational_json(i.lo, opt), rational_json(i.hi, opt)};
                };
                report["result"]["bounds"] = {{"E", iv(b.expectation)},
                                             {"V", iv(b.variance)},
                                             {"MAD", iv(b.mad)},
                                             {"SMAD", iv(b.smad)},
                                             {"SV", iv(b.semivariance)}};
                summary = "interval report with tail mass " + rat_to_string(d.tail_mass);
            }
        } else if (tbpe_cmd->parsed()) {
            Mdp m = parse_model(read_file(model_path));
            report["model_hash"] = model_hash(m);
            NormalizedMdp n = ensure_normalized(m);
            PenaltyFunction pen = [&] {
                Rat t = parse_rat_arg(threshold_text, "threshold");
                if (penalty_name == "tbp")
                    return make_penalty(PenaltyShape::tbp, t, parse_rat_arg(lambda_text, "lambda"));
                if (penalty_name == "crinkle2") return make_penalty(PenaltyShape::crinkle2, t);
                if (penalty_name == "custom") {
                    std::vector<std::pair<Rat, Rat>> pts;
                    std::istringstream in(read_file(breakpoints_path));
                    std::string xs, ys;
                    while (in >> xs >> ys)
                        pts.emplace_back(parse_rat_arg(xs, "breakpoint"), parse_rat_arg(ys, "breakpoint"));
                    return make_penalty(PenaltyShape::custom, t, std::nullopt, std::move(pts));
                }
                throw CLI::ValidationError("penalty", "tbp|crinkle2|custom");
            }();
            Timer solve;
            TbpeSolution sol = solve_tbpe(n, pen);
            timings["solve_ms"] = solve.ms();
            report["result"] = {{"value", rational_json(sol.value, opt)},
                               {"scheduler", serialize_scheduler(n.mdp, sol.scheduler)}};
            if (!out_path.empty()) {
                std::ofstream out(out_path);
                out << serialize_scheduler(n.mdp, sol.scheduler);
            }
            summary = "optimal penalized value " + rat_to_string(sol.value);
        } else if (madpe_cmd->parsed()) {
            Mdp m = parse_model(read_file(model_path));
            report["model_hash"] = model_hash(m);
            NormalizedMdp n = ensure_normalized(m);
            SweepConfig cfg;
            cfg.delta = parse_rat_arg(delta_text, "delta");
            cfg.jobs = opt.jobs;
            Timer solve;
            MadpeSolution sol = solve_madpe_sweep(n, parse_rat_arg(lambda_text, "lambda"), cfg);
            timings["solve_ms"] = solve.ms();
            json sweep = json::array();
            for (const auto& [e, v] : sol.sweep_log) sweep.push_back({rat_to_string(e), rat_to_string(v)});
            report["result"] = {{"value", rational_json(sol.value, opt)},
                               {"e_star", rational_json(sol.e_star, opt)},
                               {"gap_bound", rational_json(sol.gap_bound, opt)},
                               {"skipped_infeasible", sol.skipped_infeasible},
                               {"sweep", sweep},
                               {"scheduler", serialize_scheduler(n.mdp, sol.scheduler)}};
            if (!out_path.empty()) {
                std::ofstream out(out_path);
                out << serialize_scheduler(n.mdp, sol.scheduler);
            }
            summary = "certified value " + rat_to_string(sol.value) + " (gap bound " +
                      rat_to_string(sol.gap_bound) + ")";
        } else if (qp_cmd->parsed()) {
            Mdp m = parse_model(read_file(model_path));
            report["model_hash"] = model_hash(m);
            NormalizedMdp n = ensure_normalized(m);
            UnfoldedN u = build_unfolding_n(n);
            QpModel q = build_qp(u, parse_rat_arg(lambda_text, "lambda"));
            std::string text = export_qp(q);
            if (!out_path.empty()) {
                std::ofstream out(out_path);
                out << text;
            } else {
                report["result"]["program"] = text;
            }
            report["result"]["k"] = q.k;
            report["result"]["ell"] = q.ell;
            report["result"]["variables"] =
                q.program.objective_linear.size() + q.program.objective_bilinear.size();
            summary = "quadratic program with k=" + std::to_string(q.k) + " ell=" + std::to_string(q.ell);
        } else if (grid_cmd->parsed()) {
            Mdp m = parse_model(read_file(model_path));
            report["model_hash"] = model_hash(m);
            GridSpec spec;
            spec.resolution = resolution;
            spec.budget = budget;
            spec.surface = want_surface;
            spec.objective.kind = parse_kind(objective_name);
            spec.objective.lambda = parse_rat_arg(lambda_text, "lambda");
            if (spec.objective.kind == PenaltyKind::tbpe)
                spec.objective.threshold = parse_rat_arg(threshold_text, "threshold");
            if (class_name == "reward-based") {
                spec.sched_class = GridSpec::SchedClass::reward_based;
                spec.reward_bound = bound;
            }
            Timer search;
            GridResult r = grid_search(m, spec, opt.jobs);
            timings["search_ms"] = search.ms();
            report["result"] = {{"best_value", rational_json(r.best_value, opt)},
                               {"points", r.points},
                               {"scheduler", serialize_scheduler(m, r.best)}};
            if (want_surface) {
                json surface = json::array();
                for (const auto& [probs, value] : r.surface) {
                    json pv = json::array();
                    for (const Rat& p : probs) pv.push_back(rat_to_string(p));
                    surface.push_back({pv, rat_to_string(value)});
                }
                report["result"]["surface"] = surface;
            }
            summary = "best value " + rat_to_string(r.best_value) + " over " + std::to_string(r.points) +
                      " grid points";
        } else if (sim_cmd->parsed()) {
            Mdp m = parse_model(read_file(model_path));
            report["model_hash"] = model_hash(m);
            if (!seed_given) {
                if (const char* env = std::getenv("RISKMDP_SEED")) seed = std::strtoull(env, nullptr, 10);
            }
            Timer sim;
            SimReport r = simulate(m, load_scheduler(m, sched_path), samples, seed, 1000000, 16, opt.jobs);
            timings["simulate_ms"] = sim.ms();
            json hist;
            for (const auto& [v, c] : r.histogram) hist[rat_to_string(v)] = c;
            report["result"] = {{"n", r.n},
                               {"seed", r.seed},
                               {"expectation", r.expectation},
                               {"variance", r.variance},
                               {"mad", r.mad},
                               {"smad", r.smad},
                               {"semivariance", r.semivariance},
                               {"se_expectation", r.se_expectation},
                               {"se_mad", r.se_mad},
                               {"resampled", r.resampled},
                               {"histogram", hist}};
            summary = "empirical E " + std::to_string(r.expectation) + " after " + std::to_string(r.n) +
                      " paths";
        } else if (reduce_cmd->parsed()) {
            Chain c = Chain::from_mdp(parse_model(read_file(chain_path)));
            report["model_hash"] = model_hash(c.mdp);
            Rat t_rat = parse_rat_arg(t_text, "t");
            if (!rat_is_integer(t_rat) || t_rat < 0)
                throw CLI::ValidationError("t", "expected a non-negative integer");
            long t = t_rat.get_num().get_si();
            if (method == "mad") {
                ReductionGadget g = build_gadgets(c, t);
                Rat tail = recover_tail_probability_mad(c, t);
                report["result"] = {{"method", "mad"},
                                   {"branch_t_ge_e", g.branch_t_ge_e},
                                   {"E", rat_to_string(g.expectation)},
                                   {"L", g.big_l.get_str()},
                                   {"K", g.max_reward},
                                   {"mad_m1", rat_to_string(deviation_report(exact_distribution(g.m1)).mad)},
                                   {"mad_m2", rat_to_string(deviation_report(exact_distribution(g.m2)).mad)},
                                   {"tail_probability", rational_json(tail, opt)}};
                summary = "Pr(rew > " + std::to_string(t) + ") = " + rat_to_string(tail);
            } else if (method == "crinkle") {
                Rat tail = recover_tail_probability_crinkle(c, t);
                report["result"] = {{"method", "crinkle"}, {"tail_probability", rational_json(tail, opt)}};
                summary = "Pr(rew >= " + std::to_string(t) + ") = " + rat_to_string(tail);
            } else if (method == "search") {
                Rat exact_mad = deviation_report(exact_distribution(c)).mad;
                MadSearchResult r = binary_search_mad(c, [&](const Rat& th) { return exact_mad >= th; });
                report["result"] = {{"method", "search"},
                                   {"mad", rational_json(r.mad, opt)},
                                   {"oracle_calls", r.oracle_calls}};
                summary = "MAD " + rat_to_string(r.mad) + " in " + std::to_string(r.oracle_calls) + " calls";
            } else {
                throw CLI::ValidationError("method", "mad|crinkle|search");
            }
        } else if (eval_cmd->parsed()) {
            Mdp m = parse_model(read_file(model_path));
            report["model_hash"] = model_hash(m);
            Rat eps = parse_rat_arg(epsilon_text, "epsilon");
            RewardDistribution d = distribution_of(m, load_scheduler(m, sched_path), eps);
            report["result"]["distribution"] = distribution_json(d);
            if (d.tail_mass == 0) {
                PenaltySpec spec;
                spec.kind = parse_kind(objective_name);
                spec.lambda = parse_rat_arg(lambda_text, "lambda");
                if (spec.kind == PenaltyKind::tbpe) spec.threshold = parse_rat_arg(threshold_text, "threshold");
                Rat value = penalized(d, spec);
                report["result"]["objective"] = objective_name;
                report["result"]["value"] = rational_json(value, opt);
                summary = objective_name + " = " + rat_to_string(value);
            } else {
                summary = "distribution with tail mass " + rat_to_string(d.tail_mass);
            }
        }
        timings["total_ms"] = total.ms();
    } catch (const SolverRefusal& e) {
        report["error"] = e.what();
        exit_code = 3;
        summary = std::string("refused: ") + e.what();
    } catch (const BudgetExceeded& e) {
        report["error"] = e.what();
        exit_code = 4;
        summary = std::string("budget exceeded: ") + e.what();
    } catch (const ModelError& e) {
        report["error"] = e.what();
        exit_code = 2;
        summary = std::string("model error: ") + e.what();
    } catch (const CLI::Error& e) {
        report["error"] = e.what();
        exit_code = 1;
        summary = std::string("usage: ") + e.what();
    } catch (const std::exception& e) {
        report["error"] = e.what();
        exit_code = 2;
        summary = std::string("error: ") + e.what();
    }

    report["timings_ms"] = timings;
    report["exit_code"] = exit_code;
    emit(report, opt, summary);
    return exit_code;
}
