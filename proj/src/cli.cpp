#include "robgxe/cli.hpp"

#include "robgxe/errors.hpp"
#include "robgxe/evaluation.hpp"
#include "robgxe/loss.hpp"
#include "robgxe/penalty.hpp"
#include "robgxe/simulation.hpp"
#include "robgxe/solver.hpp"
#include "robgxe/survival_data.hpp"
#include "robgxe/tuning.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace robgxe {

namespace {

using json = nlohmann::ordered_json;

// ---- configuration --------------------------------------------------------

struct LossConfig {
    std::string kind = "exp_squared";
    std::optional<double> theta;  // default: residual_scale^2
    double tau = 0.5;
    std::optional<double> epsilon;  // default: default_check_epsilon(y)
};

struct GridConfig {
    GridOptions options;
    std::vector<double> thetas;     // explicit values override the multipliers
    std::vector<double> lambda1s;   // explicit lists override the automatic path
    std::vector<double> lambda2s;
};

struct RunConfig {
    LossConfig loss;
    std::optional<double> lambda1;
    std::optional<double> lambda2;
    double s = 6.0;
    SScale s_scale = SScale::Theta;
    FitConfig fit;
    GridConfig grid;
    SimulationScenario scenario;
    std::vector<SimulationScenario> scenarios;  // bench; falls back to `scenario`
    BenchConfig bench;
    int stability_B = 200;
    double stability_fraction = 0.75;
    double p_cut = 0.05;
    bool use_iqr = false;
    std::uint64_t seed = 1;
    int threads = 1;
    std::string out_dir = ".";
};

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where)
{
    if (!obj.is_object()) throw ValidationError("config section '" + where + "' must be an object");
    for (const auto& item : obj.items()) {
        if (!allowed.count(item.key())) {
            throw ValidationError("unknown config key '" + (where.empty() ? "" : where + ".") + item.key() + "'");
        }
    }
}

template <class T>
void read(const json& obj, const char* key, T& out)
{
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

template <class T>
void read(const json& obj, const char* key, std::optional<T>& out)
{
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

CovariateKind parse_covariates(const std::string& s)
{
    if (s == "continuous") return CovariateKind::Continuous;
    if (s == "categorical") return CovariateKind::Categorical;
    throw ValidationError("covariates must be 'continuous' or 'categorical', got '" + s + "'");
}

std::string covariates_name(CovariateKind k)
{
    return k == CovariateKind::Continuous ? "continuous" : "categorical";
}

SimulationScenario parse_scenario(const json& j, SimulationScenario sc, const std::string& where)
{
    reject_unknown(j, {"name", "n", "q", "p", "corr", "covariates", "xi", "n_main_E", "n_main_G", "n_inter",
                       "coef_low", "coef_high", "censor_target", "weibull_shape"},
                   where);
    read(j, "name", sc.name);
    read(j, "n", sc.n);
    read(j, "q", sc.q);
    read(j, "p", sc.p);
    if (j.contains("corr")) sc.corr = CorrStructure::parse(j.at("corr").get<std::string>());
    if (j.contains("covariates")) sc.covariate_kind = parse_covariates(j.at("covariates").get<std::string>());
    read(j, "xi", sc.xi);
    read(j, "n_main_E", sc.n_main_E);
    read(j, "n_main_G", sc.n_main_G);
    read(j, "n_inter", sc.n_inter);
    read(j, "coef_low", sc.coef_low);
    read(j, "coef_high", sc.coef_high);
    read(j, "censor_target", sc.censor_target);
    read(j, "weibull_shape", sc.weibull_shape);
    return sc;
}

json scenario_json(const SimulationScenario& sc)
{
    return json{{"name", sc.name},
                {"n", sc.n},
                {"q", sc.q},
                {"p", sc.p},
                {"corr", sc.corr.label()},
                {"covariates", covariates_name(sc.covariate_kind)},
                {"xi", sc.xi},
                {"n_main_E", sc.n_main_E},
                {"n_main_G", sc.n_main_G},
                {"n_inter", sc.n_inter},
                {"coef_low", sc.coef_low},
                {"coef_high", sc.coef_high},
                {"censor_target", sc.censor_target},
                {"weibull_shape", sc.weibull_shape},
                {"seed", sc.seed}};
}

void parse_fit_config(const json& j, FitConfig& f)
{
    reject_unknown(j, {"mm_tol", "cd_tol", "mm_max_iter", "cd_max_sweeps", "ascent_slack", "zero_eps",
                       "max_halvings"},
                   "fit");
    read(j, "mm_tol", f.mm_tol);
    read(j, "cd_tol", f.cd_tol);
    read(j, "mm_max_iter", f.mm_max_iter);
    read(j, "cd_max_sweeps", f.cd_max_sweeps);
    read(j, "ascent_slack", f.ascent_slack);
    read(j, "zero_eps", f.zero_eps);
    read(j, "max_halvings", f.max_halvings);
}

RunConfig parse_config(const json& root)
{
    RunConfig c;
    reject_unknown(root, {"loss", "penalty", "fit", "grid", "scenario", "scenarios", "bench", "stability",
                          "prescreen", "seed", "threads", "out_dir"},
                   "");
    if (root.contains("loss")) {
        const json& j = root.at("loss");
        reject_unknown(j, {"kind", "theta", "tau", "epsilon"}, "loss");
        read(j, "kind", c.loss.kind);
        read(j, "theta", c.loss.theta);
        read(j, "tau", c.loss.tau);
        read(j, "epsilon", c.loss.epsilon);
    }
    if (root.contains("penalty")) {
        const json& j = root.at("penalty");
        reject_unknown(j, {"lambda1", "lambda2", "s", "s_scale"}, "penalty");
        read(j, "lambda1", c.lambda1);
        read(j, "lambda2", c.lambda2);
        read(j, "s", c.s);
        if (j.contains("s_scale")) c.s_scale = parse_s_scale(j.at("s_scale").get<std::string>());
    }
    if (root.contains("fit")) parse_fit_config(root.at("fit"), c.fit);
    if (root.contains("grid")) {
        const json& j = root.at("grid");
        reject_unknown(j, {"theta_multipliers", "thetas", "lambda1s", "lambda2s", "n_lambda", "lambda_min_ratio",
                           "folds"},
                       "grid");
        read(j, "theta_multipliers", c.grid.options.theta_multipliers);
        read(j, "thetas", c.grid.thetas);
        read(j, "lambda1s", c.grid.lambda1s);
        read(j, "lambda2s", c.grid.lambda2s);
        read(j, "n_lambda", c.grid.options.n_lambda);
        read(j, "lambda_min_ratio", c.grid.options.lambda_min_ratio);
        read(j, "folds", c.grid.options.fold_count);
    }
    if (root.contains("scenario")) c.scenario = parse_scenario(root.at("scenario"), c.scenario, "scenario");
    if (root.contains("scenarios")) {
        const json& arr = root.at("scenarios");
        if (!arr.is_array()) throw ValidationError("config key 'scenarios' must be an array");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            c.scenarios.push_back(parse_scenario(arr[i], c.scenario, "scenarios[" + std::to_string(i) + "]"));
        }
    }
    if (root.contains("bench")) {
        const json& j = root.at("bench");
        reject_unknown(j, {"replicates", "n_lambda", "lambda_min_ratio", "ratio", "theta_multipliers",
                           "pilot_folds", "check_tau"},
                       "bench");
        read(j, "replicates", c.bench.replicates);
        read(j, "n_lambda", c.bench.n_lambda);
        read(j, "lambda_min_ratio", c.bench.lambda_min_ratio);
        read(j, "ratio", c.bench.ratio);
        read(j, "theta_multipliers", c.bench.theta_multipliers);
        read(j, "pilot_folds", c.bench.pilot_folds);
        read(j, "check_tau", c.bench.check_tau);
    }
    if (root.contains("stability")) {
        const json& j = root.at("stability");
        reject_unknown(j, {"B", "fraction"}, "stability");
        read(j, "B", c.stability_B);
        read(j, "fraction", c.stability_fraction);
    }
    if (root.contains("prescreen")) {
        const json& j = root.at("prescreen");
        reject_unknown(j, {"p_cut", "use_iqr"}, "prescreen");
        read(j, "p_cut", c.p_cut);
        read(j, "use_iqr", c.use_iqr);
    }
    read(root, "seed", c.seed);
    read(root, "threads", c.threads);
    read(root, "out_dir", c.out_dir);
    return c;
}

RunConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file '" + path + "'");
    json root;
    try {
        root = json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError("config file '" + path + "': " + e.what());
    }
    try {
        return parse_config(root);
    } catch (const json::exception& e) {
        throw ValidationError("config file '" + path + "': " + e.what());
    }
}

// Command-line overrides; unset fields leave the config value alone.
struct Overrides {
    std::optional<std::string> loss;
    std::optional<double> theta, tau, epsilon, lambda1, lambda2, s;
    std::optional<std::string> s_scale;
    std::optional<double> mm_tol, cd_tol;
    std::optional<int> mm_max_iter, cd_max_sweeps;
    std::optional<int> folds, n_lambda;
    std::optional<double> lambda_min_ratio;
    std::optional<int> n, q, p, n_main_E, n_main_G, n_inter;
    std::optional<std::string> corr, covariates, name;
    std::optional<double> xi, censor_target;
    std::optional<int> replicates;
    std::optional<int> B;
    std::optional<double> fraction;
    std::optional<double> p_cut;
    bool use_iqr = false;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<std::string> out_dir;
};

void apply_scenario_overrides(const Overrides& o, SimulationScenario& sc)
{
    if (o.name) sc.name = *o.name;
    if (o.n) sc.n = *o.n;
    if (o.q) sc.q = *o.q;
    if (o.p) sc.p = *o.p;
    if (o.n_main_E) sc.n_main_E = *o.n_main_E;
    if (o.n_main_G) sc.n_main_G = *o.n_main_G;
    if (o.n_inter) sc.n_inter = *o.n_inter;
    if (o.corr) sc.corr = CorrStructure::parse(*o.corr);
    if (o.covariates) sc.covariate_kind = parse_covariates(*o.covariates);
    if (o.xi) sc.xi = *o.xi;
    if (o.censor_target) sc.censor_target = *o.censor_target;
}

void apply(const Overrides& o, RunConfig& c)
{
    if (o.loss) c.loss.kind = *o.loss;
    if (o.theta) c.loss.theta = *o.theta;
    if (o.tau) c.loss.tau = *o.tau;
    if (o.epsilon) c.loss.epsilon = *o.epsilon;
    if (o.lambda1) c.lambda1 = *o.lambda1;
    if (o.lambda2) c.lambda2 = *o.lambda2;
    if (o.s) c.s = *o.s;
    if (o.s_scale) c.s_scale = parse_s_scale(*o.s_scale);
    if (o.mm_tol) c.fit.mm_tol = *o.mm_tol;
    if (o.cd_tol) c.fit.cd_tol = *o.cd_tol;
    if (o.mm_max_iter) c.fit.mm_max_iter = *o.mm_max_iter;
    if (o.cd_max_sweeps) c.fit.cd_max_sweeps = *o.cd_max_sweeps;
    if (o.folds) c.grid.options.fold_count = *o.folds;
    if (o.n_lambda) {
        c.grid.options.n_lambda = *o.n_lambda;
        c.bench.n_lambda = *o.n_lambda;
    }
    if (o.lambda_min_ratio) {
        c.grid.options.lambda_min_ratio = *o.lambda_min_ratio;
        c.bench.lambda_min_ratio = *o.lambda_min_ratio;
    }
    apply_scenario_overrides(o, c.scenario);
    for (auto& sc : c.scenarios) apply_scenario_overrides(o, sc);
    if (o.replicates) c.bench.replicates = *o.replicates;
    if (o.B) c.stability_B = *o.B;
    if (o.fraction) c.stability_fraction = *o.fraction;
    if (o.p_cut) c.p_cut = *o.p_cut;
    if (o.use_iqr) c.use_iqr = true;
    if (o.seed) c.seed = *o.seed;
    if (o.threads) c.threads = *o.threads;
    if (o.out_dir) c.out_dir = *o.out_dir;
}

void validate_common(const RunConfig& c)
{
    if (c.threads < 1) throw ValidationError("threads must be at least 1");
    if (c.loss.kind != "exp_squared" && c.loss.kind != "weighted_ls" && c.loss.kind != "weighted_check") {
        throw ValidationError("loss kind must be exp_squared, weighted_ls or weighted_check, got '" +
                              c.loss.kind + "'");
    }
    if (c.loss.theta && !(*c.loss.theta > 0.0)) throw ValidationError("theta must be positive");
    if (!(c.loss.tau > 0.0 && c.loss.tau < 1.0)) throw ValidationError("tau must lie in (0, 1)");
    if (c.loss.epsilon && !(*c.loss.epsilon > 0.0)) throw ValidationError("epsilon must be positive");
    if (!(c.s > 1.0)) throw ValidationError("MCP parameter s must exceed 1");
    if (c.lambda1 && !(*c.lambda1 >= 0.0)) throw ValidationError("lambda1 must be non-negative");
    if (c.lambda2 && !(*c.lambda2 >= 0.0)) throw ValidationError("lambda2 must be non-negative");
    c.fit.validate();
}

// ---- helpers --------------------------------------------------------------

LossKind make_loss(const RunConfig& c, const PreparedCohort& cohort, double theta_default)
{
    if (c.loss.kind == "weighted_ls") return WeightedLS{};
    if (c.loss.kind == "weighted_check") {
        return WeightedCheck{c.loss.tau, c.loss.epsilon.value_or(default_check_epsilon(cohort.sample.y()))};
    }
    return ExpSquared{c.loss.theta.value_or(theta_default)};
}

double default_theta(const PreparedCohort& cohort)
{
    const double sigma = residual_scale(cohort);
    if (!(sigma > 0.0)) throw NumericalError("no residual scale");
    return sigma * sigma;
}

json loss_json(const LossKind& kind)
{
    json j{{"kind", loss_name(kind)}};
    if (const auto* e = std::get_if<ExpSquared>(&kind)) j["theta"] = e->theta;
    if (const auto* q = std::get_if<WeightedCheck>(&kind)) {
        j["tau"] = q->tau;
        j["epsilon"] = q->eps;
    }
    return j;
}

json penalty_json(const PenaltySpec& spec, const RunConfig& c)
{
    return json{{"lambda1", spec.lambda1},
                {"lambda2", spec.lambda2},
                {"s", c.s},
                {"s_scale", s_scale_name(c.s_scale)},
                {"s_effective", spec.s}};
}

PenaltySpec make_penalty(const RunConfig& c, const LossKind& kind, double lambda1, double lambda2)
{
    return PenaltySpec{lambda1, lambda2, effective_s(kind, c.s, c.s_scale)};
}

json fit_json(const FitResult& fr, const SurvivalSample& sample, const LossKind& kind, const PenaltySpec& spec,
              const RunConfig& c)
{
    const Coefficients& z = fr.zeta_hat;
    json coef;
    coef["alpha0"] = z.intercept();
    for (int j = 0; j < z.q(); ++j) coef["alpha." + std::to_string(j + 1)] = z.env(j);
    for (int k = 0; k < z.p(); ++k) {
        coef["beta." + std::to_string(k + 1)] = z.beta(k);
        for (int j = 0; j < z.q(); ++j) {
            coef["gamma." + std::to_string(j + 1) + "." + std::to_string(k + 1)] = z.gamma(j, k);
        }
    }
    json genes = json::array();
    for (int k : fr.active_genes) genes.push_back(k + 1);
    json mains = json::array();
    for (int k : fr.main_effects) mains.push_back(k + 1);
    json inter = json::array();
    for (const auto& [j, k] : fr.active_interactions) inter.push_back(json::array({j + 1, k + 1}));
    return json{{"n", sample.n()},
                {"events", sample.event_count()},
                {"q", sample.q()},
                {"p", sample.p()},
                {"env_names", sample.env_names()},
                {"gene_names", sample.gene_names()},
                {"loss", loss_json(kind)},
                {"penalty", penalty_json(spec, c)},
                {"coefficients", coef},
                {"active_genes", genes},
                {"main_effects", mains},
                {"active_interactions", inter},
                {"objective_trace", fr.objective_trace},
                {"mm_iters", fr.mm_iters},
                {"converged", fr.converged},
                {"ascent_stalled", fr.ascent_stalled},
                {"halvings", fr.halvings},
                {"cd_unconverged", fr.cd_unconverged},
                {"kkt_residual", fr.kkt_residual}};
}

std::filesystem::path out_path(const RunConfig& c, const std::string& file)
{
    std::filesystem::path dir(c.out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ValidationError("cannot create output directory '" + c.out_dir + "': " + ec.message());
    return dir / file;
}

std::ofstream open_out(const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + path.string() + "'");
    return out;
}

void write_json(const std::filesystem::path& path, const json& j)
{
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

TuningGrid make_grid(const RunConfig& c, const PreparedCohort& cohort)
{
    GridOptions opt = c.grid.options;
    opt.seed = c.seed;
    opt.s = c.s;
    opt.s_scale = c.s_scale;
    TuningGrid grid;
    const bool explicit_lambdas = !c.grid.lambda1s.empty();
    if (c.grid.thetas.empty() || !explicit_lambdas) {
        if (!c.grid.thetas.empty()) {
            // explicit thetas, automatic lambdas topped by their largest lambda_max
            grid.fold_count = opt.fold_count;
            grid.seed = opt.seed;
            grid.s = opt.s;
            grid.s_scale = opt.s_scale;
            grid.thetas = c.grid.thetas;
            double top = 0.0;
            for (double t : grid.thetas) {
                top = std::max(top, lambda_max(cohort.design, cohort.weights, ExpSquared{t}, 1.0, c.fit));
            }
            if (!(top > 0.0)) throw NumericalError("lambda_max is zero; no gene signal to penalize");
            grid.lambda1s = log_spaced_lambdas(top, opt.lambda_min_ratio, opt.n_lambda);
            grid.lambda2s = grid.lambda1s;
        } else {
            grid = default_grid(cohort, opt);
        }
    } else {
        grid.fold_count = opt.fold_count;
        grid.seed = opt.seed;
        grid.s = opt.s;
        grid.s_scale = opt.s_scale;
        grid.thetas = c.grid.thetas;
    }
    if (explicit_lambdas) {
        grid.lambda1s = c.grid.lambda1s;
        grid.lambda2s = c.grid.lambda2s.empty() ? c.grid.lambda1s : c.grid.lambda2s;
    }
    grid.validate();
    return grid;
}

json surface_json(const CvSurface& s, const TuningGrid& grid)
{
    json err = json::array();
    for (std::size_t t = 0; t < s.thetas.size(); ++t) {
        json slab = json::array();
        for (std::size_t i = 0; i < s.lambda1s.size(); ++i) {
            json row = json::array();
            for (std::size_t j = 0; j < s.lambda2s.size(); ++j) row.push_back(s.at(t, i, j));
            slab.push_back(row);
        }
        err.push_back(slab);
    }
    return json{{"folds", grid.fold_count},
                {"seed", grid.seed},
                {"thetas", s.thetas},
                {"lambda1s", s.lambda1s},
                {"lambda2s", s.lambda2s},
                {"error", err},
                {"flagged_folds", s.flagged_folds},
                {"selected",
                 {{"theta", s.selected_theta()},
                  {"lambda1", s.selected_lambda1()},
                  {"lambda2", s.selected_lambda2()},
                  {"theta_index", s.theta_star},
                  {"lambda1_index", s.lambda1_star},
                  {"lambda2_index", s.lambda2_star}}}};
}

// ---- commands -------------------------------------------------------------

int cmd_fit(const RunConfig& c, const std::string& data)
{
    if (!c.lambda1 || !c.lambda2) throw ValidationError("fit needs lambda1 and lambda2 (--lambda1/--lambda2)");
    const PreparedCohort cohort = prepare_cohort(load_csv(data));
    const bool need_theta = c.loss.kind == "exp_squared" && !c.loss.theta;
    const LossKind kind = make_loss(c, cohort, need_theta ? default_theta(cohort) : 1.0);
    const PenaltySpec spec = make_penalty(c, kind, *c.lambda1, *c.lambda2);
    const FitResult fr = fit(cohort.design, cohort.weights, kind, spec, c.fit);
    const auto path = out_path(c, "fit.json");
    write_json(path, fit_json(fr, cohort.sample, kind, spec, c));
    std::cout << "wrote " << path.string() << '\n';
    return 0;
}

struct CvOutcome {
    CvSurface surface;
    TuningGrid grid;
};

CvOutcome run_cv(const RunConfig& c, const SurvivalSample& sample, const PreparedCohort& cohort)
{
    CvOutcome out;
    out.grid = make_grid(c, cohort);
    out.surface = build_cv_surface(sample, out.grid, c.fit, c.threads);
    return out;
}

int cmd_cv(const RunConfig& c, const std::string& data)
{
    if (c.loss.kind != "exp_squared") throw ValidationError("cv tunes the exp_squared loss only");
    const SurvivalSample sample = load_csv(data);
    const PreparedCohort cohort = prepare_cohort(sample);
    const CvOutcome cv = run_cv(c, sample, cohort);
    const LossKind kind = ExpSquared{cv.surface.selected_theta()};
    const PenaltySpec spec = make_penalty(c, kind, cv.surface.selected_lambda1(), cv.surface.selected_lambda2());
    const FitResult fr = fit(cohort.design, cohort.weights, kind, spec, c.fit);
    const auto cv_file = out_path(c, "cv.json");
    const auto fit_file = out_path(c, "fit.json");
    write_json(cv_file, surface_json(cv.surface, cv.grid));
    write_json(fit_file, fit_json(fr, cohort.sample, kind, spec, c));
    std::cout << "wrote " << cv_file.string() << " and " << fit_file.string() << '\n';
    return 0;
}

int cmd_simulate(const RunConfig& c)
{
    SimulationScenario sc = c.scenario;
    sc.seed = c.seed;
    sc.validate();
    const SimulatedCohort sim = simulate(sc);
    const auto csv = out_path(c, "cohort.csv");
    const auto truth = out_path(c, "truth.json");
    {
        auto out = open_out(csv);
        write_csv(sim.sample, out);
    }
    const Coefficients& z = sim.truth.zeta_star;
    json coef;
    coef["alpha0"] = z.intercept();
    for (int j = 0; j < z.q(); ++j) {
        if (z.env(j) != 0.0) coef["alpha." + std::to_string(j + 1)] = z.env(j);
    }
    for (int k : sim.truth.true_main_G) coef["beta." + std::to_string(k + 1)] = z.beta(k);
    for (const auto& [j, k] : sim.truth.true_inter) {
        coef["gamma." + std::to_string(j + 1) + "." + std::to_string(k + 1)] = z.gamma(j, k);
    }
    json mains = json::array();
    for (int k : sim.truth.true_main_G) mains.push_back(k + 1);
    json inter = json::array();
    for (const auto& [j, k] : sim.truth.true_inter) inter.push_back(json::array({j + 1, k + 1}));
    write_json(truth, json{{"scenario", scenario_json(sc)},
                           {"seed", sc.seed},
                           {"weibull_scale", sim.weibull_scale},
                           {"censoring_rate", sim.censoring_rate},
                           {"nonzero_coefficients", coef},
                           {"true_main_G", mains},
                           {"true_interactions", inter}});
    std::cout << "wrote " << csv.string() << " and " << truth.string() << '\n';
    return 0;
}

int cmd_bench(const RunConfig& c)
{
    BenchConfig bc = c.bench;
    bc.fit = c.fit;
    bc.s = c.s;
    bc.s_scale = c.s_scale;
    bc.threads = c.threads;
    bc.validate();
    std::vector<SimulationScenario> scenarios = c.scenarios.empty() ? std::vector{c.scenario} : c.scenarios;
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
        if (scenarios[i].name.empty()) scenarios[i].name = "scenario" + std::to_string(i + 1);
        scenarios[i].seed = c.seed;
        scenarios[i].validate();
    }

    std::vector<Comparison> results;
    json summary = json::array();
    for (const auto& sc : scenarios) {
        results.push_back(compare_methods(sc, bc));
        const Comparison& cmp = results.back();
        json tests;
        for (Scope scope : {Scope::Interactions, Scope::Mains, Scope::Both}) {
            const SignTest t = sign_test(cmp.aucs(Method::ExpSquared, scope), cmp.aucs(Method::WeightedLS, scope));
            tests[scope_name(scope)] = {{"positive", t.positive}, {"negative", t.negative}, {"ties", t.ties},
                                        {"p_value", t.p_value}};
        }
        summary.push_back({{"scenario", scenario_json(sc)},
                           {"theta_multiplier", cmp.theta_multiplier},
                           {"s", bc.s},
                           {"s_scale", s_scale_name(bc.s_scale)},
                           {"mean_censoring", cmp.mean_censoring()},
                           {"censoring", cmp.censoring},
                           {"sign_test_exp_squared_vs_weighted_ls", tests}});
        std::cerr << "finished scenario " << sc.name << '\n';
    }
    const auto cmp_file = out_path(c, "comparison.csv");
    const auto roc_file = out_path(c, "roc.csv");
    const auto sum_file = out_path(c, "bench.json");
    {
        auto out = open_out(cmp_file);
        write_comparison_csv(results, out);
    }
    {
        auto out = open_out(roc_file);
        write_roc_csv(results, out);
    }
    write_json(sum_file, summary);
    std::cout << "wrote " << cmp_file.string() << ", " << roc_file.string() << " and " << sum_file.string()
              << '\n';
    return 0;
}

int cmd_stability(const RunConfig& c, const std::string& data)
{
    if (c.stability_B < 1) throw ValidationError("stability needs B >= 1");
    if (!(c.stability_fraction > 0.0 && c.stability_fraction <= 1.0)) {
        throw ValidationError("subsample fraction must lie in (0, 1]");
    }
    const SurvivalSample sample = load_csv(data);
    const PreparedCohort cohort = prepare_cohort(sample);
    LossKind kind;
    PenaltySpec spec;
    json tuning_source;
    if (c.lambda1 && c.lambda2) {
        const bool need_theta = c.loss.kind == "exp_squared" && !c.loss.theta;
        kind = make_loss(c, cohort, need_theta ? default_theta(cohort) : 1.0);
        spec = make_penalty(c, kind, *c.lambda1, *c.lambda2);
        tuning_source = "given";
    } else {
        if (c.loss.kind != "exp_squared") {
            throw ValidationError("stability without lambda1/lambda2 selects tunings by cv (exp_squared only)");
        }
        const CvOutcome cv = run_cv(c, sample, cohort);
        kind = ExpSquared{cv.surface.selected_theta()};
        spec = make_penalty(c, kind, cv.surface.selected_lambda1(), cv.surface.selected_lambda2());
        tuning_source = "cv";
    }
    const StabilityReport rep =
        stability(sample, kind, spec, c.stability_B, c.stability_fraction, c.seed, c.fit, c.threads);
    const auto csv = out_path(c, "stability.csv");
    const auto js = out_path(c, "stability.json");
    {
        auto out = open_out(csv);
        write_stability_csv(rep, out);
    }
    write_json(js, json{{"B", rep.B},
                        {"fraction", rep.fraction},
                        {"skipped", rep.skipped},
                        {"seed", c.seed},
                        {"tunings", tuning_source},
                        {"loss", loss_json(kind)},
                        {"penalty", penalty_json(spec, c)}});
    std::cout << "wrote " << csv.string() << " and " << js.string() << '\n';
    return 0;
}

int cmd_prescreen(const RunConfig& c, const std::string& data)
{
    if (!(c.p_cut > 0.0 && c.p_cut <= 1.0)) throw ValidationError("p_cut must lie in (0, 1]");
    const SurvivalSample sorted = sort_by_time(load_csv(data));
    const StuteWeights w = compute_stute_weights(sorted);
    const PrescreenResult res = prescreen(sorted, w, c.p_cut, c.use_iqr);

    const auto csv = out_path(c, "prescreen.csv");
    const auto kept = out_path(c, "prescreened.csv");
    {
        auto out = open_out(csv);
        out << "gene,p_value,iqr,retained\n";
        const std::set<int> keep(res.retained.begin(), res.retained.end());
        for (int k = 0; k < sorted.p(); ++k) {
            out << sorted.gene_names()[static_cast<std::size_t>(k)] << ',' << res.p_values[k] << ','
                << res.iqr[k] << ',' << (keep.count(k) ? 1 : 0) << '\n';
        }
    }
    if (res.retained.empty()) {
        std::cerr << "no gene passed the prescreen; " << kept.string() << " not written\n";
    } else {
        Eigen::MatrixXd G(sorted.n(), static_cast<Index>(res.retained.size()));
        std::vector<std::string> names;
        for (std::size_t c2 = 0; c2 < res.retained.size(); ++c2) {
            G.col(static_cast<Index>(c2)) = sorted.G().col(res.retained[c2]);
            names.push_back(sorted.gene_names()[static_cast<std::size_t>(res.retained[c2])]);
        }
        const SurvivalSample sub(sorted.y(), sorted.delta(), sorted.E(), G, sorted.env_names(), names);
        auto out = open_out(kept);
        write_csv(sub, out);
    }
    std::cout << "retained " << res.retained.size() << " of " << sorted.p() << " genes; wrote " << csv.string()
              << '\n';
    return 0;
}

} // namespace

int run_cli(int argc, char** argv)
{
    CLI::App app{"Robust identification of gene-environment interactions in censored survival data"};
    app.require_subcommand(1);
    app.fallthrough();

    Overrides o;
    std::string config_path;
    app.add_option("--config", config_path, "JSON run configuration");
    app.add_option("--seed", o.seed, "Random seed");
    app.add_option("--threads", o.threads, "Worker threads (results do not depend on it)");
    app.add_option("--out-dir,-o", o.out_dir, "Directory for output files");

    std::string data;
    auto add_loss = [&](CLI::App* sub) {
        sub->add_option("--loss", o.loss, "exp_squared | weighted_ls | weighted_check");
        sub->add_option("--theta", o.theta, "Exp-squared scale (default: squared residual scale)");
        sub->add_option("--tau", o.tau, "Check-loss quantile level");
        sub->add_option("--epsilon", o.epsilon, "Check-loss smoothing half-width");
    };
    auto add_penalty = [&](CLI::App* sub) {
        sub->add_option("--lambda1", o.lambda1, "Group penalty level");
        sub->add_option("--lambda2", o.lambda2, "Interaction penalty level");
        sub->add_option("--s", o.s, "MCP regularization parameter");
        sub->add_option("--s-scale", o.s_scale, "theta (s times theta for exp_squared) | fixed");
    };
    auto add_solver = [&](CLI::App* sub) {
        sub->add_option("--mm-tol", o.mm_tol);
        sub->add_option("--cd-tol", o.cd_tol);
        sub->add_option("--mm-max-iter", o.mm_max_iter);
        sub->add_option("--cd-max-sweeps", o.cd_max_sweeps);
    };
    auto add_grid = [&](CLI::App* sub) {
        sub->add_option("--folds", o.folds, "Cross-validation folds");
        sub->add_option("--n-lambda", o.n_lambda, "Points on each lambda path");
        sub->add_option("--lambda-min-ratio", o.lambda_min_ratio, "Smallest lambda as a fraction of lambda_max");
    };
    auto add_scenario = [&](CLI::App* sub) {
        sub->add_option("--name", o.name);
        sub->add_option("--n", o.n);
        sub->add_option("--q", o.q);
        sub->add_option("--p", o.p);
        sub->add_option("--n-main-E", o.n_main_E);
        sub->add_option("--n-main-G", o.n_main_G);
        sub->add_option("--n-inter", o.n_inter);
        sub->add_option("--corr", o.corr, "Independent, AR(r), Band(r) or CS(r)");
        sub->add_option("--covariates", o.covariates, "continuous | categorical");
        sub->add_option("--xi", o.xi, "Cauchy contamination probability");
        sub->add_option("--censor-target", o.censor_target);
    };

    auto* fit_cmd = app.add_subcommand("fit", "Fit at fixed tunings; writes fit.json");
    fit_cmd->add_option("data", data, "Cohort CSV (time,status,E...,G...)")->required();
    add_loss(fit_cmd);
    add_penalty(fit_cmd);
    add_solver(fit_cmd);

    auto* cv_cmd = app.add_subcommand("cv", "Cross-validate (theta, lambda1, lambda2); writes cv.json and fit.json");
    cv_cmd->add_option("data", data, "Cohort CSV")->required();
    cv_cmd->add_option("--s", o.s, "MCP regularization parameter");
    cv_cmd->add_option("--s-scale", o.s_scale, "theta | fixed");
    add_grid(cv_cmd);
    add_solver(cv_cmd);

    auto* sim_cmd = app.add_subcommand("simulate", "Simulate a cohort; writes cohort.csv and truth.json");
    add_scenario(sim_cmd);

    auto* bench_cmd = app.add_subcommand("bench", "Path-AUC comparison of the three losses");
    add_scenario(bench_cmd);
    bench_cmd->add_option("--replicates", o.replicates);
    bench_cmd->add_option("--n-lambda", o.n_lambda);
    bench_cmd->add_option("--lambda-min-ratio", o.lambda_min_ratio);
    bench_cmd->add_option("--s", o.s);
    bench_cmd->add_option("--s-scale", o.s_scale, "theta | fixed");
    add_solver(bench_cmd);

    auto* stab_cmd = app.add_subcommand("stability", "Subsampling selection frequencies; writes stability.csv");
    stab_cmd->add_option("data", data, "Cohort CSV")->required();
    add_loss(stab_cmd);
    add_penalty(stab_cmd);
    add_grid(stab_cmd);
    add_solver(stab_cmd);
    stab_cmd->add_option("--B", o.B, "Number of subsamples");
    stab_cmd->add_option("--fraction", o.fraction, "Subsample fraction");

    auto* pre_cmd = app.add_subcommand("prescreen", "Marginal gene prescreen; writes prescreen.csv");
    pre_cmd->add_option("data", data, "Cohort CSV")->required();
    pre_cmd->add_option("--p-cut", o.p_cut, "Largest retained marginal p-value");
    pre_cmd->add_flag("--use-iqr", o.use_iqr, "Also require IQR above the median IQR");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
        apply(o, cfg);
        validate_common(cfg);
        if (*fit_cmd) return cmd_fit(cfg, data);
        if (*cv_cmd) return cmd_cv(cfg, data);
        if (*sim_cmd) return cmd_simulate(cfg);
        if (*bench_cmd) return cmd_bench(cfg);
        if (*stab_cmd) return cmd_stability(cfg, data);
        if (*pre_cmd) return cmd_prescreen(cfg, data);
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

} // namespace robgxe
