#include "rdsys/runner.hpp"

#include "rdsys/export.hpp"
#include "rdsys/fk.hpp"
#include "rdsys/hedging.hpp"
#include "rdsys/markov_check.hpp"
#include "rdsys/validation.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

namespace rdsys {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kTagSample = 0x5a4d1eULL;
constexpr std::size_t kSampleNodes = 20;
constexpr std::size_t kBundleCsvPaths = 50;
constexpr double kResidualAllowance = 1e-5;

const std::vector<std::string>& stage_names() {
    static const std::vector<std::string> names{
        "validate",        "solve-pde",        "solve-fk",         "simulate",           "hedge",
        "check-oracle",    "check-cross",      "check-recursive",  "check-contraction",  "check-bounds",
        "check-martingale", "check-markov",    "check-construction", "check-replication"};
    return names;
}

std::vector<std::string> dependencies(const std::string& stage) {
    if (stage == "hedge" || stage == "check-oracle" || stage == "check-recursive") return {"solve-pde"};
    if (stage == "check-cross") return {"solve-pde", "solve-fk"};
    if (stage == "check-contraction") return {"solve-fk"};
    return {};
}

bool hedging_equivalent(const Scenario& sc) {
    if (sc.model.has_drift()) return false;
    return std::all_of(sc.claim.discount.begin(), sc.claim.discount.end(), [](double c) { return c == 0.0; });
}

class Pipeline {
public:
    Pipeline(const RunConfig& cfg, Scenario sc, fs::path out) : cfg_(cfg), sc_(std::move(sc)), out_(std::move(out)) {}

    void run_stage(const std::string& stage) {
        if (stage == "validate") return validate();
        if (stage == "solve-pde") return solve_pde();
        if (stage == "solve-fk") return solve_fk();
        if (stage == "simulate") return simulate();
        if (stage == "hedge") return hedge();
        if (stage == "check-oracle") return check_oracle();
        if (stage == "check-cross") return check_cross();
        if (stage == "check-recursive") return check_recursive();
        if (stage == "check-contraction") return check_contraction();
        if (stage == "check-bounds") return check_bounds();
        if (stage == "check-martingale") return check_martingale();
        if (stage == "check-markov") return check_markov();
        if (stage == "check-construction") return check_construction();
        if (stage == "check-replication") return check_replication();
        throw RunError("unknown stage '" + stage + "'", kExitUnknownStage);
    }

    bool has_solution() const { return pde_.has_value() || fk_.has_value(); }
    std::vector<CheckRecord>& checks() { return checks_; }
    std::vector<std::string>& artifacts() { return artifacts_; }
    Json& details() { return details_; }
    const Scenario& scenario() const { return sc_; }

    Json settings() const {
        return Json{{"paths", paths()},
                    {"steps", steps()},
                    {"pde_grid_x", grid_x()},
                    {"pde_grid_t", grid_t()},
                    {"fk_paths_per_node", fk_paths()},
                    {"fk_grid_x", fk_grid_x()},
                    {"fk_grid_t", fk_grid_t()},
                    {"beta", beta()},
                    {"tol", tol()},
                    {"rel_tol", rel_tol()},
                    {"min_fk_iterations", min_iter_}};
    }

    void set_min_fk_iterations(int n) { min_iter_ = n; }

private:
    std::size_t paths() const { return cfg_.paths.value_or(10000); }
    int steps() const { return cfg_.steps.value_or(100); }
    int grid_x() const { return cfg_.grid_x.value_or(sc_.axis.count); }
    int grid_t() const { return cfg_.grid_t.value_or(200); }
    std::size_t fk_paths() const { return cfg_.fk_paths.value_or(1000); }
    int fk_grid_x() const { return cfg_.fk_grid_x.value_or(30); }
    int fk_grid_t() const { return cfg_.fk_grid_t.value_or(21); }
    double beta() const { return cfg_.beta.value_or(default_beta(sc_.model, sc_.claim)); }
    double tol() const { return cfg_.tol.value_or(1e-6); }
    double rel_tol() const { return cfg_.rel_tol.value_or(sc_.tolerance.cross_rel); }
    double se_mult() const { return sc_.tolerance.se_mult; }

    void write(const std::string& name, std::string_view text) {
        write_text_file((out_ / name).string(), text);
        artifacts_.push_back(name);
    }

    void add(CheckRecord r) { checks_.push_back(std::move(r)); }

    void add_skip(const std::string& name, const std::string& stage, const std::string& identity, const std::string& why) {
        CheckRecord r{name, stage, identity, 0.0, 0.0, true, true, why};
        add(std::move(r));
    }

    PdeProblem pde_problem(PdeVariant variant) const {
        PdeProblem pb;
        pb.model = sc_.model;
        pb.claim = sc_.claim;
        pb.variant = variant;
        AxisSpec a = sc_.axis;
        a.count = grid_x();
        pb.axes.assign(static_cast<size_t>(sc_.model.dim()), a);
        pb.t_steps = grid_t();
        return pb;
    }

    MarketSimConfig sim_config() const {
        MarketSimConfig c;
        c.paths = paths();
        c.steps = steps();
        c.seed = cfg_.seed;
        c.record_brownian = true;
        return c;
    }

    std::vector<double> fk_t_grid() const { return uniform_grid(0.0, sc_.model.horizon, fk_grid_t() - 1); }
    std::vector<std::vector<double>> fk_x_grid() const {
        std::vector<std::vector<double>> xs;
        for (int i = 0; i < sc_.model.dim(); ++i) xs.push_back(make_axis(sc_.axis.lo, sc_.axis.hi, fk_grid_x(), sc_.axis.spacing == Spacing::Log));
        return xs;
    }

    // Interior nodes of the Feynman-Kac grid within a factor 1.5 of s0, drawn with a fixed stream.
    std::vector<NodeRef> sample_nodes() const {
        const ValueField shape(fk_t_grid(), fk_x_grid(), sc_.model.regimes);
        std::vector<std::size_t> candidates;
        for (std::size_t flat = 0; flat < shape.space_count(); ++flat) {
            const Vec x = shape.node(flat);
            bool ok = true;
            for (int i = 0; i < x.size(); ++i) ok = ok && x[i] >= sc_.s0[i] / 1.5 && x[i] <= 1.5 * sc_.s0[i];
            if (ok) candidates.push_back(flat);
        }
        if (candidates.empty()) throw ConfigurationError("no grid nodes within a factor 1.5 of s0 for sampling");
        Rng rng = make_stream(cfg_.seed, kTagSample);
        std::uniform_int_distribution<std::size_t> pick_t(0, shape.time_count() - 2);
        std::uniform_int_distribution<std::size_t> pick_x(0, candidates.size() - 1);
        std::uniform_int_distribution<int> pick_k(0, sc_.model.regimes - 1);
        std::vector<NodeRef> out;
        for (std::size_t i = 0; i < kSampleNodes; ++i) {
            const std::size_t ti = pick_t(rng);
            const std::size_t flat = candidates[pick_x(rng)];
            out.push_back({ti, pick_k(rng), flat});
        }
        return out;
    }

    void validate() {
        const auto probes = make_probe_grid(sc_.model, sc_.axis.lo, sc_.axis.hi, 5, 9);
        const ValidationReport rep = validate_model(sc_.model, sc_.claim, probes);
        Json items = Json::array();
        for (const auto& c : rep.checks) {
            items.push_back(Json{{"name", c.name}, {"condition", c.condition}, {"passed", c.passed}, {"worst", c.worst},
                                 {"threshold", c.threshold}});
        }
        details_["validate"] = Json{{"probe_nodes", rep.probe_nodes}, {"assumption_relaxed", rep.assumption_relaxed}, {"checks", items}};
        for (const auto& c : rep.checks) {
            add({"assumption:" + c.name, "validate", c.condition, c.worst, c.threshold, c.passed, false, ""});
        }
    }

    void solve_pde() {
        PdeProblem pb = pde_problem(sc_.variant);
        pde_ = solve_system(pb);
        write("value_pde.csv", value_field_csv(pde_->value));
        details_["solve-pde"] = Json{{"variant", to_string(sc_.variant)}, {"diagnostics", to_json(pde_->diagnostics)}};
    }

    FkConfig fk_config() const {
        FkConfig c;
        c.paths_per_node = fk_paths();
        c.seed = cfg_.seed;
        return c;
    }

    void solve_fk() {
        const ValueField v0 = terminal_field(sc_.model, sc_.claim, fk_t_grid(), fk_x_grid());
        try {
            fk_ = iterate_to_fixed_point(sc_.model, sc_.claim, v0, beta(), tol(), 60, fk_config(), min_iter_);
        } catch (const ConvergenceError& e) {
            write("trace.csv", contraction_trace_csv(e.trace()));
            throw;
        }
        write("value_fk.csv", value_field_csv(fk_->value));
        write("trace.csv", contraction_trace_csv(fk_->trace));
        details_["solve-fk"] = Json{{"iterations", fk_->trace.steps.size()},
                                    {"beta", fk_->trace.beta},
                                    {"theoretical_rate", fk_->trace.theoretical_rate},
                                    {"extrapolation_hits", fk_->extrapolation_hits},
                                    {"warnings", fk_->trace.warnings}};
    }

    void simulate() {
        const PathBundle b = simulate_market_pasting(sc_.model, sc_.s0, sc_.k0, sim_config());
        write("paths.csv", path_bundle_csv(b, kBundleCsvPaths));
        details_["simulate"] = Json{{"construction", to_string(b.construction)},
                                    {"paths", b.paths.size()},
                                    {"steps", b.time_grid.size() - 1},
                                    {"exited", b.exited},
                                    {"exclusion_fraction", b.exclusion_fraction()},
                                    {"seed", b.seed}};
        add({"domain_exit_fraction", "simulate", "paths leaving D / paths <= 0.1%", b.exclusion_fraction(), 1e-3,
             b.exclusion_fraction() <= 1e-3, false, ""});
    }

    const ValueField& hedging_field() {
        if (hedging_equivalent(sc_) && sc_.variant == PdeVariant::General) return pde_->value;
        if (!hedge_field_) hedge_field_ = solve_system(pde_problem(PdeVariant::Hedging)).value;
        return *hedge_field_;
    }

    void hedge() {
        const ValueField& field = hedging_field();
        MarketSimConfig c = sim_config();
        c.record_brownian = false;
        const PathBundle b = simulate_minimal_elmm(sc_.model, sc_.s0, sc_.k0, c);
        const HedgeReport rep = build_hedge(field, sc_.model, sc_.claim, b);
        write("hedge_paths.csv", hedge_paths_csv(rep));
        write("hedge_steps.csv", hedge_steps_csv(rep));
        write("hedge_series.csv", hedge_series_csv(rep, sc_.model.dim()));
        const OrthogonalityResult orth = orthogonality_check(rep, se_mult());
        details_["hedge"] = Json{{"H0", rep.H0},
                                 {"residual", to_json(rep.residual)},
                                 {"residual_rms", rep.residual_rms},
                                 {"residual_left_point", to_json(rep.residual_left)},
                                 {"residual_left_point_rms", rep.residual_left_rms},
                                 {"L_T", to_json(rep.L_terminal)},
                                 {"covariation", to_json(rep.covariation)},
                                 {"cost_increment", to_json(rep.cost_increment)},
                                 {"cost_gain_correlation", rep.cost_gain_correlation},
                                 {"flagged_paths", rep.flagged}};
        const double s = se_mult();
        const std::string residual_id = "E[H - (H0 + int theta dS + L_T)] = 0";
        if (sc_.claim.family != InteractionFamily::Linear) {
            add_skip("hedge_residual_mean", "hedge", residual_id, "martingale decomposition needs the linear interaction family");
        } else {
            const double allow = s * rep.residual.se + kResidualAllowance;
            add({"hedge_residual_mean", "hedge", residual_id, std::abs(rep.residual.mean), allow, std::abs(rep.residual.mean) <= allow,
                 false, fmt::format("tolerance: 3 SE plus {} discretization allowance", kResidualAllowance)});
        }
        add({"hedge_orthogonality", "hedge", "[L, int theta dS]_T has mean 0", std::abs(orth.covariation.mean),
             s * orth.covariation.se, orth.covariation_zero || (orth.covariation.mean == 0.0 && orth.covariation.se == 0.0), false, ""});
        add({"hedge_L_martingale", "hedge", "E[L_T] = 0", std::abs(orth.L_terminal.mean), s * orth.L_terminal.se,
             orth.L_martingale || (orth.L_terminal.mean == 0.0 && orth.L_terminal.se == 0.0), false, ""});
    }

    void check_oracle() {
        const std::string id = sc_.oracle_formula.empty() ? "no oracle" : sc_.oracle_formula;
        if (!sc_.has_oracle()) return add_skip("oracle", "check-oracle", id, "scenario has no independent oracle");
        const ValueField& v = pde_->value;
        double worst = 0.0, worst_tol = 0.0;
        bool ok = true;
        // Interior region: middle third of every axis, first nine tenths of the horizon.
        const double t_last = v.t_grid().front() + 0.9 * (v.t_grid().back() - v.t_grid().front());
        for (std::size_t ti = 0; ti < v.time_count() && v.t_grid()[ti] <= t_last + 1e-12; ++ti) {
            for (std::size_t flat = 0; flat < v.space_count(); ++flat) {
                std::vector<int> idx(static_cast<size_t>(v.dim()));
                v.unflatten(flat, idx);
                bool interior = true;
                for (int i = 0; i < v.dim(); ++i) {
                    const auto n = static_cast<int>(v.axis(i).size());
                    interior = interior && idx[static_cast<size_t>(i)] >= n / 3 && idx[static_cast<size_t>(i)] <= 2 * n / 3;
                }
                if (!interior) continue;
                const Vec x = v.node(flat);
                for (int k = 0; k < v.regimes(); ++k) {
                    const double o = sc_.oracle(v.t_grid()[ti], x, k);
                    const double err = std::abs(v.at(ti, k, flat) - o);
                    const double allow = std::max(sc_.tolerance.oracle_abs, sc_.tolerance.oracle_rel * std::abs(o));
                    if (err > allow) ok = false;
                    if (err / std::max(allow, 1e-300) > worst / std::max(worst_tol, 1e-300) || worst_tol == 0.0) {
                        worst = err;
                        worst_tol = allow;
                    }
                }
            }
        }
        add({"oracle", "check-oracle", id, worst, worst_tol, ok, false, to_string(sc_.oracle_kind)});
    }

    void check_cross() {
        const auto nodes = sample_nodes();
        const ValueField& f = fk_->value;
        Json rows = Json::array();
        bool ok = true;
        double worst = 0.0, worst_tol = 0.0;
        for (const auto& n : nodes) {
            const double t = f.t_grid()[n.ti];
            const Vec x = f.node(n.flat);
            const double pv = pde_->value.interpolate(t, x, n.k);
            const double fv = f.at(n.ti, n.k, n.flat);
            const double se = fk_->se.at(n.ti, n.k, n.flat);
            const double allow = std::max({rel_tol() * std::abs(pv), se_mult() * se, sc_.tolerance.abs_floor});
            const bool pass = std::abs(pv - fv) <= allow;
            ok = ok && pass;
            if (worst_tol == 0.0 || std::abs(pv - fv) / std::max(allow, 1e-300) > worst / std::max(worst_tol, 1e-300)) {
                worst = std::abs(pv - fv);
                worst_tol = allow;
            }
            rows.push_back(Json{{"t", t}, {"x", x[0]}, {"k", n.k}, {"pde", pv}, {"fk", fv}, {"fk_se", se}, {"passed", pass}});
        }
        details_["check-cross"] = rows;
        add({"cross_pde_fk", "check-cross", "PDE solution = Feynman-Kac fixed point within max(rel tol, 3 SE)", worst, worst_tol, ok,
             false, ""});
    }

    void check_recursive() {
        const std::string id = "v(t,S,eta) = E[h + int delta(v) du + sum f(v)] along the valuation dynamics";
        if (sc_.claim.family != InteractionFamily::Linear) {
            return add_skip("recursive_identity", "check-recursive", id,
                            "direct representation needs the linear interaction family");
        }
        const auto nodes = sample_nodes();
        const ValueField shape(fk_t_grid(), fk_x_grid(), sc_.model.regimes);
        std::vector<ProbeNode> probes;
        for (const auto& n : nodes) probes.push_back({shape.t_grid()[n.ti], shape.node(n.flat), n.k});
        RecursiveCheckConfig rc;
        rc.paths = std::max<std::size_t>(paths() / 5, 100);
        rc.seed = cfg_.seed;
        rc.rel_tol = rel_tol();
        rc.se_mult = se_mult();
        rc.abs_floor = sc_.tolerance.abs_floor;
        const bool minimal = sc_.variant == PdeVariant::Hedging;
        const ModelSpec dyn = minimal ? sc_.model.without_drift() : sc_.model;
        const RecursiveCheckReport rep = recursive_value_check(pde_->value, dyn, sc_.claim, !minimal, probes, rc);
        Json rows = Json::array();
        double worst = 0.0, worst_tol = 0.0;
        for (const auto& s : rep.samples) {
            const double err = std::abs(s.mc.mean - s.field_value);
            if (worst_tol == 0.0 || err / std::max(s.tolerance, 1e-300) > worst / std::max(worst_tol, 1e-300)) {
                worst = err;
                worst_tol = s.tolerance;
            }
            rows.push_back(Json{{"t", s.t}, {"x", s.x[0]}, {"k", s.k}, {"field", s.field_value}, {"mc", s.mc.mean}, {"mc_se", s.mc.se},
                                {"passed", s.passed}});
        }
        details_["check-recursive"] = rows;
        add({"recursive_identity", "check-recursive", id, worst, worst_tol, rep.passed, false, ""});
    }

    void check_contraction() {
        const auto& tr = fk_->trace;
        bool ok = tr.steps.size() >= 6;
        double worst = 0.0;
        for (std::size_t i = 1; i < tr.steps.size(); ++i) {
            const double prev = tr.steps[i - 1].beta_dist;
            if (prev <= 0.0) continue;
            const double excess = tr.steps[i].beta_dist / prev - tr.theoretical_rate;
            const double allow = 3.0 * tr.steps[i].se / prev + 1e-12 / prev;
            worst = std::max(worst, excess - allow);
            if (excess > allow) ok = false;
        }
        add({"contraction", "check-contraction",
             "|v_{n+1} - v_n|_beta <= (L e^{K T} / beta) |v_n - v_{n-1}|_beta + 3 SE over >= 6 iterations", worst, 0.0, ok, false,
             fmt::format("{} iterations", tr.steps.size())});
    }

    void check_bounds() {
        if (!has_solution()) throw RunError("check-bounds needs solve-pde or solve-fk earlier in the stage list", kExitMissingDependency);
        auto check_field = [&](const ValueField& v, const std::string& name) {
            double worst = -1e300;
            for (std::size_t ti = 0; ti < v.time_count(); ++ti) {
                const double kap = kappa_bound(sc_.claim, sc_.model.horizon, v.t_grid()[ti]);
                for (int k = 0; k < v.regimes(); ++k)
                    for (double x : v.layer(ti, k)) worst = std::max(worst, std::abs(x) - kap);
            }
            add({"kappa_bound_" + name, "check-bounds", "|v(t,x,k)| <= kappa(t) + 1e-6 at every node", worst, 1e-6, worst <= 1e-6, false,
                 ""});
        };
        if (pde_) check_field(pde_->value, "pde");
        if (fk_) check_field(fk_->value, "fk");
    }

    void check_martingale() {
        MartingaleCheckConfig mc;
        mc.paths = paths();
        mc.steps = steps();
        mc.seed = cfg_.seed;
        mc.se_mult = se_mult();
        const MartingaleReport rep = martingale_check(sc_.model, sc_.s0, sc_.k0, default_test_functions(sc_.model, sc_.s0), mc);
        Json rows = Json::array();
        for (const auto* group : {&rep.generator, &rep.counters}) {
            for (const auto& p : *group) {
                rows.push_back(Json{{"name", p.name}, {"t", p.t}, {"estimate", to_json(p.estimate)}, {"passed", p.passed}});
                add({"martingale:" + p.name + fmt::format("@{}", p.t), "check-martingale",
                     group == &rep.generator ? "E[f(S_t,eta_t) - f(S_0,eta_0) - int A f ds] = 0" : "E[N^{kj}_T - int lambda^{kj} ds] = 0",
                     std::abs(p.estimate.mean), se_mult() * p.estimate.se, p.passed, false, ""});
            }
        }
        details_["check-martingale"] = rows;
        if (sc_.model.crash) {
            const auto cr = crash_martingale_check(sc_.model, sc_.s0, paths(), steps(), cfg_.seed, se_mult());
            add({"crash_martingale", "check-martingale", "E[S-bar_T] = S-bar_0 with S-bar = S (alive), R S (defaulted)",
                 std::abs(cr.gap.mean), se_mult() * cr.gap.se, cr.passed, false, ""});
        }
    }

    void check_markov() {
        MarkovCheckConfig mc;
        mc.axis = sc_.axis;
        mc.seed = cfg_.seed;
        mc.steps = steps();
        mc.se_mult = se_mult();
        const MarkovReport rep = markov_property_check(sc_.model, sc_.claim, sc_.model.horizon, sc_.s0, sc_.k0, mc);
        for (const auto& p : rep.points) {
            add({fmt::format("markov@{}", p.t), "check-markov", "E[h(S_T,eta_T) | S_t, eta_t] = v(t, S_t, eta_t)",
                 std::abs(p.restart_gap.mean), se_mult() * p.restart_gap.se, p.passed, false,
                 fmt::format("increment mean {} (se {})", p.increment.mean, p.increment.se)});
        }
    }

    void check_construction() {
        MarketSimConfig c = sim_config();
        c.record_brownian = false;
        const PathBundle a = simulate_market_pasting(sc_.model, sc_.s0, sc_.k0, c);
        const PathBundle b = simulate_market_reweight(sc_.model, sc_.s0, sc_.k0, c);
        const auto tests = default_test_functions(sc_.model, sc_.s0);
        const int d = sc_.model.dim();
        for (const auto& f : tests) {
            auto phi = [&](const MarketPath& p) { return f(p.s_at(p.regime.size() - 1, d), p.regime.back()); };
            const Estimate ea = weighted_estimate(a, phi);
            const Estimate eb = weighted_estimate(b, phi);
            const double gap = std::abs(ea.mean - eb.mean);
            const double allow = se_mult() * std::hypot(ea.se, eb.se);
            add({"construction:" + f.name, "check-construction", "E[phi(S_T,eta_T)] pasting = reweighted reference measure", gap, allow,
                 gap <= allow, false, ""});
        }
    }

    void check_replication() {
        const std::string id = "X_T = H for the completed-market strategy in stock, defaultable bond and cash";
        const auto& m = sc_.model;
        if (sc_.claim.family != InteractionFamily::Linear) {
            return add_skip("replication", "check-replication", id, "replication of the claim needs the linear interaction family");
        }
        if (m.regimes != 2 || m.has_drift() || !m.intensities.channels_from(1).empty() || m.dim() != 1) {
            return add_skip("replication", "check-replication", id, "needs a drift-free two-state default model in one dimension");
        }
        ClaimSpec bond = ClaimSpec::zero(2);
        bond.terminal = TerminalPayoff::constant({1.0, 0.0});
        bond.bounds = derive_bounds(m, bond);
        ReplicationConfig rc;
        rc.axis = sc_.axis;
        rc.axis.count = grid_x();
        rc.t_steps = grid_t();
        rc.path_steps = steps();
        rc.paths = std::max<std::size_t>(paths() / 5, 100);
        rc.seed = cfg_.seed;
        rc.s0 = sc_.s0[0];
        const ReplicationReport self = replicate_completed_market(m, bond, bond, rc);
        add({"self_replication", "check-replication", "traded bond replicates itself with zero error", self.max_abs, 0.0,
             self.max_abs == 0.0, false, ""});
        const ReplicationReport gen = replicate_completed_market(m, sc_.claim, bond, rc);
        details_["check-replication"] = Json{{"claim_rms", gen.rms},
                                             {"claim_error", to_json(gen.error)},
                                             {"psi_range", Json::array({gen.psi_min, gen.psi_max})},
                                             {"max_abs_stock_position", gen.max_abs_stock_position}};
        add({"replication_error_mean", "check-replication", id, std::abs(gen.error.mean), se_mult() * gen.error.se + 1e-3,
             std::abs(gen.error.mean) <= se_mult() * gen.error.se + 1e-3, false, "tolerance: 3 SE plus 1e-3 discretization allowance"});
    }

    const RunConfig& cfg_;
    Scenario sc_;
    fs::path out_;
    std::optional<PdeResult> pde_;
    std::optional<FixedPointResult> fk_;
    std::optional<ValueField> hedge_field_;
    std::vector<CheckRecord> checks_;
    std::vector<std::string> artifacts_;
    Json details_ = Json::object();
    int min_iter_ = 0;
};

fs::path prepare_out_dir(const RunConfig& cfg) {
    std::string dir = cfg.out_dir;
    if (dir.empty()) {
        if (const char* env = std::getenv("RDSYS_OUT_DIR"); env && *env) dir = env;
    }
    if (dir.empty()) dir = "rdsys_out";
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw RunError("cannot create output directory '" + dir + "'", kExitOutputDir);
    const fs::path probe = fs::path(dir) / ".rdsys_write_probe";
    try {
        write_text_file(probe.string(), "");
    } catch (const UsageError&) {
        throw RunError("output directory '" + dir + "' is not writable", kExitOutputDir);
    }
    fs::remove(probe, ec);
    return dir;
}

}  // namespace

std::vector<std::string> known_stages() { return stage_names(); }

std::vector<std::string> parse_stage_list(const std::string& csv) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= csv.size()) {
        const std::size_t end = std::min(csv.find(',', start), csv.size());
        std::string s = csv.substr(start, end - start);
        s.erase(0, s.find_first_not_of(" \t"));
        s.erase(s.find_last_not_of(" \t") + 1);
        if (!s.empty()) out.push_back(s);
        start = end + 1;
    }
    return out;
}

RunResult run(const RunConfig& config) {
    if (config.scenario.empty() == config.config_path.empty()) {
        throw UsageError("give exactly one of --scenario or --config");
    }
    if (config.stages.empty()) throw UsageError("no stages requested");
    const auto& names = stage_names();
    for (const auto& s : config.stages) {
        if (std::find(names.begin(), names.end(), s) == names.end()) throw RunError("unknown stage '" + s + "'", kExitUnknownStage);
    }
    std::set<std::string> seen;
    for (const auto& s : config.stages) {
        for (const auto& dep : dependencies(s)) {
            if (!seen.count(dep)) {
                throw RunError(fmt::format("stage '{}' needs '{}' earlier in the stage list", s, dep), kExitMissingDependency);
            }
        }
        if (s == "check-bounds" && !seen.count("solve-pde") && !seen.count("solve-fk")) {
            throw RunError("stage 'check-bounds' needs 'solve-pde' or 'solve-fk' earlier in the stage list", kExitMissingDependency);
        }
        seen.insert(s);
    }

    Scenario sc = config.scenario.empty() ? scenario_from_json(parse_json_file(config.config_path)) : scenario_by_name(config.scenario);
    const fs::path out = prepare_out_dir(config);

    Pipeline pipe(config, std::move(sc), out);
    if (seen.count("check-contraction")) pipe.set_min_fk_iterations(6);
    const Json scenario_doc = scenario_to_json(pipe.scenario());
    const std::string scenario_text = scenario_doc.dump(2) + "\n";
    write_text_file((out / "scenario.json").string(), scenario_text);
    pipe.artifacts().push_back("scenario.json");

    for (const auto& s : config.stages) pipe.run_stage(s);

    RunResult res;
    res.checks = pipe.checks();
    res.artifacts = pipe.artifacts();
    bool all = true;
    Json checks = Json::array();
    for (const auto& c : res.checks) {
        all = all && (c.passed || c.skipped);
        checks.push_back(Json{{"name", c.name},
                              {"stage", c.stage},
                              {"identity", c.identity},
                              {"statistic", c.statistic},
                              {"threshold", c.threshold},
                              {"verdict", c.skipped ? "skipped" : (c.passed ? "pass" : "fail")},
                              {"note", c.note}});
    }
    Json settings = pipe.settings();
    const std::string inputs = scenario_text + settings.dump() + fmt::format("seed={};stages=", config.seed) +
                               fmt::format("{}", fmt::join(config.stages, ","));
    std::vector<std::string> artifacts = res.artifacts;
    artifacts.push_back("summary.json");
    res.summary = Json{{"tool", "rdsys"},
                       {"version", kVersion},
                       {"scenario", pipe.scenario().name},
                       {"oracle", to_string(pipe.scenario().oracle_kind)},
                       {"oracle_formula", pipe.scenario().oracle_formula},
                       {"inputs_hash", fnv1a_hex(inputs)},
                       {"seed", config.seed},
                       {"stages", config.stages},
                       {"settings", settings},
                       {"checks", checks},
                       {"all_passed", all},
                       {"details", pipe.details()},
                       {"artifacts", artifacts}};
    write_text_file((out / "summary.json").string(), res.summary.dump(2) + "\n");
    res.artifacts = artifacts;
    res.exit_code = all ? kExitOk : kExitChecksFailed;
    return res;
}

int exit_code_for(const std::exception& e) {
    if (const auto* r = dynamic_cast<const RunError*>(&e)) return r->code();
    if (dynamic_cast<const UsageError*>(&e)) return kExitUsage;
    if (dynamic_cast<const ConfigurationError*>(&e) || dynamic_cast<const ModelDefinitionError*>(&e)) return kExitModel;
    if (dynamic_cast<const Error*>(&e)) return kExitNumerical;
    return kExitNumerical;
}

}  // namespace rdsys
