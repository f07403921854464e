#include "robgxe/solver.hpp"

#include "robgxe/errors.hpp"
#include "robgxe/stats.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace robgxe {

void FitConfig::validate() const
{
    if (!(mm_tol > 0.0)) throw ValidationError("mm_tol must be positive");
    if (!(cd_tol > 0.0)) throw ValidationError("cd_tol must be positive");
    if (!(ascent_slack > 0.0)) throw ValidationError("ascent_slack must be positive");
    if (!(zero_eps > 0.0)) throw ValidationError("zero_eps must be positive");
    if (mm_max_iter < 1) throw ValidationError("mm_max_iter must be at least 1");
    if (cd_max_sweeps < 1) throw ValidationError("cd_max_sweeps must be at least 1");
    if (max_halvings < 0) throw ValidationError("max_halvings must be non-negative");
}

double coordinate_update(double a, double z, double pen)
{
    if (!(a > 0.0)) return 0.0;
    const double mag = std::abs(z) - pen;
    if (mag <= 0.0) return 0.0;
    return std::copysign(mag, z) / a;
}

namespace {

// Coordinates [0, limit) are updated; the rest stay at zeta_m. prox adds
// -prox_j/2 (zeta_j - zeta_m_j)^2 to the surrogate; it vanishes at a fixed point.
CdOutcome run_cd(const ExpandedDesign& design, const SurrogateState& st, const Coefficients& zeta_m,
                 const Eigen::VectorXd& pen, const Eigen::VectorXd& prox, Index limit,
                 const FitConfig& config)
{
    const auto& U = design.U;
    const Eigen::ArrayXd W = st.W_diag.array();
    Eigen::VectorXd zeta = zeta_m.vector();
    // W .* (working residual at the current iterate)
    Eigen::VectorXd wr = (W * st.working_residual.array()).matrix();

    Eigen::VectorXd curv(limit);
    for (Index j = 0; j < limit; ++j) curv[j] = (U.col(j).array().square() * W).sum();

    const auto update = [&](Index j) {
        const double a = curv[j] + prox[j];
        const double old = zeta[j];
        double updated = 0.0;
        if (a > 0.0) {
            updated = coordinate_update(a, U.col(j).dot(wr) + curv[j] * old + prox[j] * zeta_m[j], pen[j]);
        }
        const double delta = updated - old;
        if (delta != 0.0) {
            wr.array() -= delta * W * U.col(j).array();
            zeta[j] = updated;
        }
        return std::abs(delta);
    };

    // Full sweeps alternate with sweeps over the current nonzero set; only a
    // quiet full sweep ends the loop, so the fixed point is the same as plain
    // cyclic descent.
    CdOutcome out;
    std::vector<Index> active;
    while (out.sweeps < config.cd_max_sweeps) {
        double max_change = 0.0;
        for (Index j = 0; j < limit; ++j) max_change = std::max(max_change, update(j));
        ++out.sweeps;
        if (max_change < config.cd_tol) {
            out.converged = true;
            break;
        }
        active.clear();
        for (Index j = 0; j < limit; ++j) {
            if (zeta[j] != 0.0 || pen[j] == 0.0) active.push_back(j);
        }
        while (out.sweeps < config.cd_max_sweeps) {
            double inner = 0.0;
            for (Index j : active) inner = std::max(inner, update(j));
            ++out.sweeps;
            if (inner < config.cd_tol) break;
        }
    }
    out.zeta = Coefficients(zeta_m.layout(), std::move(zeta));
    return out;
}

void check_inputs(const ExpandedDesign& design, const StuteWeights& weights, const LossKind& kind,
                  const PenaltySpec& spec, const FitConfig& config)
{
    validate(kind);
    spec.validate();
    config.validate();
    if (weights.w.size() != design.rows()) {
        throw ValidationError("weights do not match the design rows");
    }
    if (design.cols() != design.layout.width()) {
        throw ValidationError("design width does not match its layout");
    }
}

// The linearized group term sum_j |b_j^m| |b_j| / ||b^m|| is tangent to ||b|| but
// lies below it. Adding ||b - b^m||^2 / (2 ||b^m||) restores an upper bound, so the
// penalty surrogate majorizes. Used only when the plain step fails to ascend,
// since the extra curvature slows groups that sit near zero.
Eigen::VectorXd group_curvature(const Coefficients& zeta, const PenaltySpec& spec)
{
    const Layout& layout = zeta.layout();
    Eigen::VectorXd c = Eigen::VectorXd::Zero(layout.width());
    for (int k = 0; k < layout.p; ++k) {
        const double norm = zeta.block(k).norm();
        if (norm == 0.0) continue;
        const double slope = spec.lambda1 > 0.0 ? mcp_derivative(norm, spec.lambda1, spec.s) : 0.0;
        c.segment(layout.block_start(k), layout.block_size()).setConstant(slope / norm);
    }
    return c;
}

struct MmState {
    Coefficients zeta;
    std::vector<double> trace;
    int iters = 0;
    bool converged = false;
    bool stalled = false;
    int halvings = 0;
    int damped = 0;
    int cd_unconverged = 0;
};

MmState run_mm(const ExpandedDesign& design, const StuteWeights& weights, const LossKind& kind,
               const PenaltySpec& spec, const FitConfig& config, Coefficients zeta, Index limit)
{
    const Layout& layout = design.layout;
    MmState s;
    double current = penalized_objective(design, weights, zeta, kind, spec);
    if (!std::isfinite(current)) throw NumericalError("non-finite objective at MM iteration 0");
    s.trace.push_back(current);

    for (int m = 1; m <= config.mm_max_iter; ++m) {
        s.iters = m;
        const SurrogateState st = surrogate_from_residuals(residuals(design, zeta), weights.w, kind);
        const Eigen::VectorXd pen = lla_multipliers(zeta, spec).per_coordinate(layout);
        const Eigen::VectorXd no_prox = Eigen::VectorXd::Zero(layout.width());
        CdOutcome cd = run_cd(design, st, zeta, pen, no_prox, limit, config);
        if (!cd.converged) ++s.cd_unconverged;

        Coefficients candidate = std::move(cd.zeta);
        double value = penalized_objective(design, weights, candidate, kind, spec);
        if (!std::isfinite(value)) {
            throw NumericalError("non-finite objective at MM iteration " + std::to_string(m));
        }
        const double slack = config.ascent_slack * (1.0 + std::abs(current));
        if (value < current) {
            // plain linearized step overshot; retry on the majorizing surrogate
            ++s.damped;
            CdOutcome retry = run_cd(design, st, zeta, pen, group_curvature(zeta, spec), limit, config);
            if (!retry.converged) ++s.cd_unconverged;
            const double v = penalized_objective(design, weights, retry.zeta, kind, spec);
            if (std::isfinite(v) && v > value) {
                candidate = std::move(retry.zeta);
                value = v;
            }
        }
        if (value < current - slack) {
            ++s.halvings;
            bool restored = false;
            const Eigen::VectorXd step = candidate.vector() - zeta.vector();
            double t = 1.0;
            for (int h = 0; h < config.max_halvings; ++h) {
                t *= 0.5;
                Coefficients trial(layout, zeta.vector() + t * step);
                const double v = penalized_objective(design, weights, trial, kind, spec);
                if (std::isfinite(v) && v >= current - slack) {
                    candidate = std::move(trial);
                    value = v;
                    restored = true;
                    break;
                }
            }
            if (!restored) {
                s.stalled = true;
                break;
            }
        }
        const double change = (candidate.vector() - zeta.vector()).lpNorm<Eigen::Infinity>();
        zeta = std::move(candidate);
        current = value;
        s.trace.push_back(current);
        if (change < config.mm_tol) {
            s.converged = true;
            break;
        }
    }
    s.zeta = std::move(zeta);
    return s;
}

// Only 1 + q coordinates move, so the null fit is always solved tightly; a
// loose one would let lambda_max miss the first entering gene.
FitConfig null_config(const FitConfig& config)
{
    FitConfig c = config;
    c.mm_tol = std::min(config.mm_tol, 1e-10);
    c.cd_tol = std::min(config.cd_tol, 1e-12);
    c.mm_max_iter = std::max(config.mm_max_iter, 5000);
    c.cd_max_sweeps = std::max(config.cd_max_sweeps, 10000);
    return c;
}

Coefficients null_start(const ExpandedDesign& design, const StuteWeights& weights)
{
    Coefficients zeta(design.layout.q, design.layout.p);
    zeta[0] = stats::weighted_median(std::span<const double>(design.y.data(), design.y.size()),
                                     std::span<const double>(weights.w.data(), weights.w.size()));
    return zeta;
}

} // namespace

CdOutcome cd_maximize_surrogate(const ExpandedDesign& design, const SurrogateState& surrogate,
                                const Coefficients& zeta_m, const LlaMultipliers& multipliers,
                                const FitConfig& config)
{
    config.validate();
    if (zeta_m.size() != design.cols() || surrogate.W_diag.size() != design.rows()) {
        throw ValidationError("surrogate dimensions do not match the design");
    }
    return run_cd(design, surrogate, zeta_m, multipliers.per_coordinate(design.layout),
                  Eigen::VectorXd::Zero(design.cols()), design.cols(), config);
}

double penalized_objective(const ExpandedDesign& design, const StuteWeights& weights,
                           const Coefficients& zeta, const LossKind& kind, const PenaltySpec& spec)
{
    return objective(design, weights, zeta, kind) - sparse_group_value(zeta, spec);
}

double surrogate_kkt_residual(const ExpandedDesign& design, const StuteWeights& weights,
                              const Coefficients& zeta, const LossKind& kind,
                              const PenaltySpec& spec)
{
    // On the surrogate built at zeta, z_j - a_j zeta_j is the loss gradient.
    const Eigen::VectorXd g = gradient(design, weights, zeta, kind);
    const Eigen::VectorXd pen = lla_multipliers(zeta, spec).per_coordinate(design.layout);
    double worst = 0.0;
    for (Index j = 0; j < g.size(); ++j) worst = std::max(worst, std::abs(g[j]) - pen[j]);
    return worst;
}

Coefficients null_fit(const ExpandedDesign& design, const StuteWeights& weights, const LossKind& kind,
                      const FitConfig& config)
{
    const PenaltySpec none{};
    check_inputs(design, weights, kind, none, config);
    return run_mm(design, weights, kind, none, null_config(config), null_start(design, weights),
                  design.layout.first_penalized())
        .zeta;
}

double lambda_max(const ExpandedDesign& design, const StuteWeights& weights, const LossKind& kind,
                  double ratio, const FitConfig& config)
{
    if (!(ratio >= 0.0)) throw ValidationError("lambda ratio must be non-negative");
    const Coefficients base = null_fit(design, weights, kind, config);
    const Eigen::VectorXd g = gradient(design, weights, base, kind);
    const Layout& layout = design.layout;
    double lam = 0.0;
    for (int k = 0; k < layout.p; ++k) {
        lam = std::max(lam, std::abs(g[layout.beta_index(k)]));
        for (int j = 0; j < layout.q; ++j) {
            lam = std::max(lam, std::abs(g[layout.gamma_index(j, k)]) / (1.0 + ratio));
        }
    }
    // keeps the soft threshold strict against rounding in the inner products
    return lam * (1.0 + 1e-9);
}

FitResult fit(const ExpandedDesign& design, const StuteWeights& weights, const LossKind& kind,
              const PenaltySpec& spec, const FitConfig& config,
              const std::optional<Coefficients>& warm_start)
{
    check_inputs(design, weights, kind, spec, config);
    const Layout& layout = design.layout;

    Coefficients start;
    if (warm_start) {
        if (!(warm_start->layout() == layout)) throw ValidationError("warm start layout mismatch");
        start = *warm_start;
    } else {
        start = null_fit(design, weights, kind, config);
    }

    MmState mm = run_mm(design, weights, kind, spec, config, std::move(start), layout.width());

    Eigen::VectorXd& z = mm.zeta.vector();
    for (Index j = 0; j < z.size(); ++j) {
        if (std::abs(z[j]) < config.zero_eps) z[j] = 0.0;
    }

    FitResult res;
    res.zeta_standardized = mm.zeta;
    res.zeta_hat = design.destandardize(mm.zeta);
    res.objective_trace = std::move(mm.trace);
    res.mm_iters = mm.iters;
    res.converged = mm.converged;
    res.ascent_stalled = mm.stalled;
    res.halvings = mm.halvings;
    res.damped_steps = mm.damped;
    res.cd_unconverged = mm.cd_unconverged;
    res.kkt_residual = surrogate_kkt_residual(design, weights, mm.zeta, kind, spec);

    for (int k = 0; k < layout.p; ++k) {
        const auto b = mm.zeta.block(k);
        if ((b.array() != 0.0).any()) res.active_genes.push_back(k);
        if (mm.zeta.beta(k) != 0.0) res.main_effects.push_back(k);
        for (int j = 0; j < layout.q; ++j) {
            if (mm.zeta.gamma(j, k) != 0.0) res.active_interactions.emplace_back(j, k);
        }
    }
    return res;
}

} // namespace robgxe
