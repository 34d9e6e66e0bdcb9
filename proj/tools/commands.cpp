#include "commands.hpp"

#include "pderm/dgp.hpp"
#include "pderm/erm.hpp"
#include "pderm/experiments.hpp"
#include "pderm/forecaster.hpp"
#include "pderm/loss.hpp"

#include "json.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>

namespace pderm::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// unit indices under the master seed
constexpr std::uint64_t kPathStream = 0, kFitStream = 1, kPilotStream = 2, kMcStream = 3, kValidateStream = 4,
                        kCondition1Stream = 5, kDiagnoseStream = 6;

struct Context {
    const RunConfig& cfg;
    std::uint64_t seed;
    fs::path out;
    std::size_t threads;
    std::ostream& log;
};

void write_file(const fs::path& file, const std::string& content) {
    std::ofstream os(file, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write '" + file.string() + "'");
    os << content;
    if (!os) throw std::runtime_error("failed writing '" + file.string() + "'");
}

void write_json(const Context& ctx, const std::string& name, const json& body) {
    json doc = body;
    doc["seed"] = ctx.seed;
    json config = json::object();
    for (const auto& [section, keys] : ctx.cfg.sections) {
        json sec = json::object();
        for (const auto& [k, v] : keys) sec[k] = v;
        config[section] = sec;
    }
    doc["config"] = config;
    write_file(ctx.out / name, doc.dump(2) + "\n");
}

json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json vec(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(number(x));
    return a;
}

DgpSpec spec_of(const RunConfig& cfg) {
    const auto name = cfg.text("dgp", "preset");
    ParamMap params;
    for (const auto& [key, value] : preset_defaults(name)) params[key] = cfg.real("dgp", key);
    return preset(name, params);
}

RuleSpaceConfig rule_config_of(const RunConfig& cfg) {
    RuleSpaceConfig rc;
    rc.k = static_cast<int>(cfg.u64("rule", "k"));
    rc.alpha0 = Bounds{cfg.real("rule", "alpha0_lo"), cfg.real("rule", "alpha0_hi")};
    rc.alpha1 = Bounds{cfg.real("rule", "alpha1_lo"), cfg.real("rule", "alpha1_hi")};
    rc.beta1_upper = cfg.real("rule", "beta1_hi");
    rc.breakpoints = cfg.reals("rule", "breakpoints");
    rc.pilot_length = cfg.size("rule", "pilot_length");
    return rc;
}

std::shared_ptr<const RuleSpace> space_of(const Context& ctx, const DgpSpec& spec) {
    return build_rule_space(spec, rule_config_of(ctx.cfg), derive_seed(ctx.seed, kPilotStream));
}

/// Rule given explicitly in [rule] alpha0/alpha1/beta1, if any.
std::optional<PredictionRule> fixed_rule(const RunConfig& cfg, const std::shared_ptr<const RuleSpace>& space) {
    auto a0 = cfg.reals("rule", "alpha0"), a1 = cfg.reals("rule", "alpha1"), b1 = cfg.reals("rule", "beta1");
    if (a0.empty() && a1.empty() && b1.empty()) return std::nullopt;
    PredictionRule rule(space, std::move(a0), std::move(a1), std::move(b1));
    if (!rule.feasible()) throw std::invalid_argument("[rule] alpha0/alpha1/beta1 lie outside the rule box");
    return rule;
}

OptimizerConfig optimizer_of(const Context& ctx) {
    OptimizerConfig o;
    o.starts = ctx.cfg.size("erm", "starts");
    o.grid_points = ctx.cfg.size("erm", "grid_points");
    o.grid_seeds = ctx.cfg.size("erm", "grid_seeds");
    o.seed = derive_seed(ctx.seed, kFitStream);
    return o;
}

json rule_json(const PredictionRule& r) {
    json j;
    j["alpha0"] = vec(r.alpha0());
    j["alpha1"] = vec(r.alpha1());
    j["beta1"] = vec(r.beta1());
    j["breakpoints"] = vec(r.space().partition().breakpoints());
    return j;
}

json trace_json(const OptimizerTrace& t) {
    json j;
    j["starts"] = t.starts;
    j["evaluations"] = t.evaluations;
    j["iterations"] = t.iterations;
    j["grid_best"] = number(t.grid_best);
    j["best_per_start"] = vec(t.best_per_start);
    return j;
}

std::string csv_number(double x) { return std::isfinite(x) ? format_double(x) : "nan"; }

SimPath head(const SimPath& p, std::size_t n) {
    SimPath out;
    out.y.assign(p.y.begin(), p.y.begin() + static_cast<std::ptrdiff_t>(n));
    out.h.assign(p.h.begin(), p.h.begin() + static_cast<std::ptrdiff_t>(n));
    out.seed = p.seed;
    out.spec_id = p.spec_id;
    return out;
}

// ---------------------------------------------------------------------------

int cmd_simulate(const Context& ctx) {
    const auto spec = spec_of(ctx.cfg);
    const std::size_t n = ctx.cfg.size("dgp", "t_total");
    if (n == 0) throw std::invalid_argument("[dgp] t_total must be >= 1");
    const auto path = simulate_stationary(spec, n + 1, derive_seed(ctx.seed, kPathStream));
    std::string csv = "t,y,h\n";
    for (std::size_t t = 0; t < path.y.size(); ++t)
        csv += std::to_string(t) + "," + format_double(path.y[t]) + "," + format_double(path.h[t]) + "\n";
    write_file(ctx.out / "path.csv", csv);
    return 0;
}

int cmd_check(const Context& ctx) {
    const auto spec = spec_of(ctx.cfg);
    const BregmanLoss loss(parse_loss_kind(ctx.cfg.text("erm", "loss")));
    const auto v = validate_assumption1(spec, ctx.cfg.size("erm", "mc_draws"), derive_seed(ctx.seed, kValidateStream));
    json a1;
    a1["stability_estimate"] = number(v.stability_estimate);
    a1["stability_std_error"] = number(v.stability_std_error);
    a1["stability_upper99"] = number(v.stability_upper99);
    a1["stability_closed_form"] = v.stability_closed_form;
    a1["stability_ok"] = v.stability_ok;
    a1["moments_ok"] = v.moments_ok;
    a1["positivity_ok"] = v.positivity_ok;
    a1["support_ok"] = v.support_ok;
    a1["growth_ok"] = v.growth_ok;
    a1["continuity_ok"] = v.continuity_ok;
    a1["max_regimes"] = v.max_regimes;
    a1["mc_draws"] = v.mc_draws;
    a1["failures"] = v.failures;
    a1["passed"] = v.passed();

    json c1;
    bool c1_ok = false;
    try {
        const auto space = space_of(ctx, spec);
        Condition1Options opt;
        opt.seed = derive_seed(ctx.seed, kCondition1Stream);
        const auto r = certify_condition1(loss, *space, spec, opt);
        c1["support_ok"] = r.support_ok;
        c1["moment_sup_seed_a"] = number(r.moment_sup_seed_a);
        c1["moment_sup_seed_b"] = number(r.moment_sup_seed_b);
        c1["moments_ok"] = r.moments_ok;
        c1["probed_rules"] = r.probed_rules;
        c1["path_length"] = r.path_length;
        c1["c_psi"] = r.c_psi ? json(*r.c_psi) : json(nullptr);
        c1["refusal"] = r.refusal;
        c1["failures"] = r.failures;
        c1_ok = r.failures.empty();
    } catch (const PairingError& e) {
        c1["failures"] = json::array({std::string("pairing: ") + e.what()});
    } catch (const std::invalid_argument& e) {
        c1["failures"] = json::array({std::string("rule space: ") + e.what()});
    }
    c1["passed"] = c1_ok;

    json doc;
    doc["command"] = "check";
    doc["passed"] = v.passed() && c1_ok;
    doc["assumption1"] = a1;
    doc["condition1"] = c1;
    write_json(ctx, "check.json", doc);
    if (!(v.passed() && c1_ok)) {
        ctx.log << error_line("check_failed", "one or more checks failed; see check.json") << "\n";
        return 1;
    }
    return 0;
}

int cmd_fit(const Context& ctx) {
    const auto spec = spec_of(ctx.cfg);
    const BregmanLoss loss(parse_loss_kind(ctx.cfg.text("erm", "loss")));
    const auto space = space_of(ctx, spec);
    const std::size_t T = ctx.cfg.size("erm", "t");
    auto path = simulate_stationary(spec, T + 1, derive_seed(ctx.seed, kPathStream));
    const auto problem = ErmProblem::create(std::move(path), space, loss, ctx.cfg.real("erm", "gamma"));
    const auto res = fit(problem, optimizer_of(ctx));

    const auto tr = run(res.theta_hat, problem.path().y, problem.f0(), problem.d0());
    std::string csv = "t,f,d\n";
    for (std::size_t t = 0; t < tr.f.size(); ++t)
        csv += std::to_string(t) + "," + format_double(tr.f[t]) + "," + format_double(tr.d[t]) + "\n";
    write_file(ctx.out / "trace.csv", csv);

    json doc;
    doc["command"] = "fit";
    doc["theta_hat"] = rule_json(res.theta_hat);
    doc["objective"] = number(res.objective);
    doc["status"] = to_string(res.status);
    doc["T"] = problem.T();
    doc["optimizer_trace"] = trace_json(res.trace);
    write_json(ctx, "fit.json", doc);
    return 0;
}

int cmd_evaluate(const Context& ctx) {
    const auto spec = spec_of(ctx.cfg);
    const BregmanLoss loss(parse_loss_kind(ctx.cfg.text("erm", "loss")));
    const auto space = space_of(ctx, spec);
    const std::size_t T = ctx.cfg.size("erm", "t");
    const double gamma = ctx.cfg.real("erm", "gamma");
    const auto m = static_cast<std::size_t>(std::ceil(gamma * static_cast<double>(T)));
    const auto full = simulate_stationary(spec, T + 1 + m, derive_seed(ctx.seed, kPathStream));
    const auto problem = ErmProblem::create(head(full, T + 1), space, loss, gamma);

    const auto fixed = fixed_rule(ctx.cfg, space);
    std::optional<FitResult> fitted;
    if (!fixed) fitted = fit(problem, optimizer_of(ctx));
    const PredictionRule& rule = fixed ? *fixed : fitted->theta_hat;

    SimPath oos;
    oos.y.assign(full.y.begin() + static_cast<std::ptrdiff_t>(T + 1), full.y.end());
    oos.h.assign(full.h.begin() + static_cast<std::ptrdiff_t>(T + 1), full.h.end());
    const auto realized = oos_risk_realized(problem, rule, oos);
    const auto tr = run(rule, problem.path().y, problem.f0(), problem.d0());
    const LatentState latent{problem.path().h[T], problem.path().y[T], tr.f[T], tr.d[T]};
    const auto mc = oos_risk_mc(problem, spec, rule, latent, ctx.cfg.size("erm", "n_mc"), m,
                                derive_seed(ctx.seed, kMcStream));

    json doc;
    doc["command"] = "evaluate";
    doc["theta_hat"] = rule_json(rule);
    doc["objective"] = number(fitted ? fitted->objective : empirical_risk(problem, rule));
    doc["status"] = fitted ? to_string(fitted->status) : "fixed";
    doc["T"] = T;
    doc["m"] = m;
    json risks;
    risks["realized"] = {{"value", number(realized.value)},
                         {"se", number(realized.std_error)},
                         {"kind", to_string(realized.kind)},
                         {"note", "se ignores serial dependence"}};
    risks["mc"] = {{"value", number(mc.value)},
                   {"se", number(mc.std_error)},
                   {"n_mc", mc.n_mc},
                   {"kind", to_string(mc.kind)}};
    doc["risks"] = risks;
    write_json(ctx, "evaluate.json", doc);
    return 0;
}

int cmd_study_rate(const Context& ctx) {
    RateStudyConfig c;
    c.t_grid = ctx.cfg.sizes("study", "t_grid");
    c.replications = ctx.cfg.size("study", "replications");
    c.smoke = ctx.cfg.flag("study", "smoke");
    c.preset = ctx.cfg.text("dgp", "preset");
    for (const auto& [key, value] : preset_defaults(c.preset)) c.params[key] = ctx.cfg.real("dgp", key);
    c.loss = parse_loss_kind(ctx.cfg.text("erm", "loss"));
    c.rule = rule_config_of(ctx.cfg);
    c.gamma = ctx.cfg.real("erm", "gamma");
    c.n_mc = ctx.cfg.size("erm", "n_mc");
    c.optimizer = optimizer_of(ctx);
    c.excess.fine_grid_points = ctx.cfg.size("erm", "fine_grid_points");
    c.excess.ref_starts = ctx.cfg.size("erm", "ref_starts");
    c.master_seed = ctx.seed;
    c.threads = ctx.threads;
    const auto rep = run_rate_study(c);

    std::size_t p = 0;
    for (const auto& row : rep.rows) p = std::max(p, row.theta_hat.size());
    const std::size_t k = p / 3;
    std::string csv = "T,replication,excess";
    for (const auto* name : {"alpha0", "alpha1", "beta1"})
        for (std::size_t r = 1; r <= k; ++r) csv += std::string(",") + name + "_" + std::to_string(r);
    csv += "\n";
    for (const auto& row : rep.rows) {
        csv += std::to_string(row.T) + "," + std::to_string(row.replication) + "," +
               (row.ok ? csv_number(row.excess) : std::string("nan"));
        for (std::size_t i = 0; i < p; ++i) csv += "," + (i < row.theta_hat.size() ? csv_number(row.theta_hat[i]) : "");
        csv += "\n";
    }
    write_file(ctx.out / "study.csv", csv);

    json levels = json::array();
    for (const auto& lv : rep.levels)
        levels.push_back({{"T", lv.T},
                          {"q25", number(lv.q25)},
                          {"q50", number(lv.q50)},
                          {"q75", number(lv.q75)},
                          {"n_ok", lv.n_ok},
                          {"n_failed", lv.n_failed},
                          {"n_boundary", lv.n_boundary}});
    json doc;
    doc["command"] = "study";
    doc["kind"] = "rate";
    doc["slope"] = number(rep.slope);
    doc["se"] = number(rep.slope_se);
    doc["intercept"] = number(rep.intercept);
    doc["degenerate"] = rep.degenerate;
    doc["inversions"] = rep.inversions;
    doc["sigma_hat"] = number(rep.sigma_hat);
    doc["quantiles"] = levels;
    write_json(ctx, "study.json", doc);
    ctx.log << "rate study finished in " << rep.runtime_seconds << " s\n";
    return 0;
}

json application_json(const Ar1KalmanReport& r) {
    json reps = json::array();
    for (const auto& x : r.reps)
        reps.push_back({{"theta_hat", vec(x.theta_hat)},
                        {"status", to_string(x.status)},
                        {"risk_hat", number(x.risk_hat)},
                        {"risk_kalman", number(x.risk_kalman)},
                        {"abs_diff", number(x.abs_diff)},
                        {"risk_perturbed", number(x.risk_perturbed)}});
    json j;
    j["kalman"] = {{"prior_variance", r.kalman.prior_variance},
                   {"gain", r.kalman.gain},
                   {"theta", r.kalman.theta},
                   {"iterations", r.kalman.iterations}};
    j["var_y"] = r.var_y;
    j["threshold"] = r.threshold;
    j["median_abs_diff"] = number(r.median_abs_diff);
    j["median_coord_diff"] = r.median_coord_diff;
    j["perturbed_worse_fraction"] = r.perturbed_worse_fraction;
    j["grid_max_advantage_z"] = number(r.grid_max_advantage_z);
    j["grid_size"] = r.grid_size;
    j["risk_ok"] = r.risk_ok;
    j["coords_ok"] = r.coords_ok;
    j["grid_ok"] = r.grid_ok;
    j["replications"] = reps;
    return j;
}

json application_json(const SvQmleReport& r) {
    json reps = json::array();
    for (const auto& x : r.reps)
        reps.push_back({{"theta_erm", vec(x.theta_erm)},
                        {"theta_qmle", vec(x.theta_qmle)},
                        {"sup_diff", number(x.sup_diff)},
                        {"erm_objective", number(x.erm_objective)},
                        {"qmle_objective", number(x.qmle_objective)},
                        {"qmle_converged", x.qmle_converged},
                        {"affinity_mean", number(x.affinity_mean)},
                        {"affinity_variance", number(x.affinity_variance)}});
    json j;
    j["agree_fraction"] = r.agree_fraction;
    j["max_affinity_ratio"] = number(r.max_affinity_ratio);
    j["affinity_ok"] = r.affinity_ok;
    j["argmin_ok"] = r.argmin_ok;
    j["replications"] = reps;
    return j;
}

json application_json(const RvLatentReport& r) {
    json grid = json::array();
    for (const auto& g : r.grid) grid.push_back(vec(g));
    json j;
    j["grid"] = grid;
    j["shift_mean"] = vec(r.shift_mean);
    j["shift_se"] = vec(r.shift_se);
    j["slope_mean"] = number(r.slope_mean);
    j["slope_se"] = number(r.slope_se);
    j["t_ratio"] = number(r.t_ratio);
    j["theta_hat"] = vec(r.theta_hat);
    j["status"] = to_string(r.status);
    j["risk_hat"] = number(r.risk_hat);
    j["risk_vol_hat"] = number(r.risk_vol_hat);
    j["excess"] = number(r.excess);
    j["excess_vol"] = number(r.excess_vol);
    j["shift_ok"] = r.shift_ok;
    return j;
}

int cmd_study_application(const Context& ctx, ApplicationKind kind) {
    ApplicationConfig c = default_application_config(kind);
    for (const auto& [key, value] : preset_defaults(application_preset(kind))) c.params[key] = ctx.cfg.real("dgp", key);
    c.loss = parse_loss_kind(ctx.cfg.text("erm", "loss"));
    c.rule = rule_config_of(ctx.cfg);
    c.t = ctx.cfg.size("erm", "t");
    c.replications = ctx.cfg.size("study", "replications");
    c.gamma = ctx.cfg.real("erm", "gamma");
    c.n_mc = ctx.cfg.size("erm", "n_mc");
    c.grid_points = ctx.cfg.size("study", "grid_points");
    c.optimizer = optimizer_of(ctx);
    c.master_seed = ctx.seed;
    c.threads = ctx.threads;
    if (c.replications == 0) throw std::invalid_argument("[study] replications must be >= 1");
    const auto started = std::chrono::steady_clock::now();
    const auto rep = run_application(c);
    json doc;
    doc["command"] = "study";
    doc["kind"] = to_string(kind);
    doc["report"] = std::visit([](const auto& r) { return application_json(r); }, rep);
    write_json(ctx, "application.json", doc);
    ctx.log << to_string(kind) << " finished in "
            << std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count() << " s\n";
    return 0;
}

int cmd_study(const Context& ctx) {
    const auto kind = ctx.cfg.text("study", "kind");
    if (kind == "rate") return cmd_study_rate(ctx);
    return cmd_study_application(ctx, parse_application_kind(kind));
}

json acf_json(const AcfSummary& a) {
    return {{"acf", vec(a.acf)},
            {"decay_slope", number(a.decay_slope)},
            {"envelope_c", number(a.envelope_c)},
            {"envelope_rho", number(a.envelope_rho)}};
}

int cmd_diagnose(const Context& ctx) {
    const auto spec = spec_of(ctx.cfg);
    const auto space = space_of(ctx, spec);
    const auto rule = fixed_rule(ctx.cfg, space);
    DiagnosticsConfig c;
    c.t_total = ctx.cfg.size("dgp", "t_total");
    c.lags = ctx.cfg.size("study", "lags");
    c.theta_grid_points = ctx.cfg.size("study", "theta_grid_points");
    c.loss = parse_loss_kind(ctx.cfg.text("erm", "loss"));
    c.seed = derive_seed(ctx.seed, kDiagnoseStream);
    if (c.t_total < 100000) throw std::invalid_argument("diagnose needs [dgp] t_total >= 100000");
    const auto rep = run_diagnostics(spec, *rule, c);

    json moments = json::array();
    for (const auto& m : rep.moments)
        moments.push_back({{"series", m.series},
                           {"order", m.order},
                           {"seed_a", number(m.seed_a)},
                           {"seed_b", number(m.seed_b)},
                           {"ratio", number(m.ratio)}});
    json doc;
    doc["command"] = "diagnose";
    doc["rule"] = rule_json(*rule);
    doc["t_total"] = rep.t_total;
    doc["moments"] = moments;
    doc["moments_ok"] = rep.moments_ok;
    doc["loss_acf"] = acf_json(rep.loss_acf);
    doc["f_acf"] = acf_json(rep.f_acf);
    doc["d_acf"] = acf_json(rep.d_acf);
    doc["band"] = rep.band;
    doc["lags_outside_band"] = rep.lags_outside_band;
    doc["decay_ok"] = rep.decay_ok;
    doc["max_lag10_acf"] = number(rep.max_lag10_acf);
    doc["grid_rules"] = rep.grid_rules;
    doc["failures"] = rep.failures;
    doc["note"] = rep.note;
    write_json(ctx, "diagnostics.json", doc);
    return 0;
}

}  // namespace

std::string error_line(const std::string& kind, const std::string& message) {
    return json{{"error", kind}, {"message", message}}.dump();
}

int run_command(const std::string& command, const RunConfig& cfg, std::size_t threads, std::ostream& log) {
    const Context ctx{cfg, cfg.u64("erm", "seed"), fs::path(cfg.text("output", "dir")), threads, log};
    fs::create_directories(ctx.out);
    write_file(ctx.out / "config.ini", cfg.to_ini());
    if (command == "simulate") return cmd_simulate(ctx);
    if (command == "check") return cmd_check(ctx);
    if (command == "fit") return cmd_fit(ctx);
    if (command == "evaluate") return cmd_evaluate(ctx);
    if (command == "study") return cmd_study(ctx);
    if (command == "diagnose") return cmd_diagnose(ctx);
    throw ConfigError("unknown command '" + command + "'");
}

}  // namespace pderm::cli
