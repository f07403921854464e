#include "robgxe/loss.hpp"

#include "robgxe/errors.hpp"

#include <cmath>

namespace robgxe {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// exp(-r^2/theta) with the exponent clamped at -700 and underflow flushed to 0
double exp_kernel(double r, double theta)
{
    const double e = std::max(-r * r / theta, -700.0);
    const double v = std::exp(e);
    return v < 1e-300 ? 0.0 : v;
}

double smoothed_check(double r, double tau, double eps)
{
    if (r > eps) return tau * r;
    if (r < -eps) return (tau - 1.0) * r;
    return r * r / (4.0 * eps) + (tau - 0.5) * r + eps / 4.0;
}

double smoothed_check_derivative(double r, double tau, double eps)
{
    if (r > eps) return tau;
    if (r < -eps) return tau - 1.0;
    return r / (2.0 * eps) + tau - 0.5;
}

void check_dims(const ExpandedDesign& design, const StuteWeights& weights, const Coefficients& zeta)
{
    if (weights.w.size() != design.rows()) {
        throw ValidationError("weights have " + std::to_string(weights.w.size()) +
                              " entries for a design with " + std::to_string(design.rows()) +
                              " rows");
    }
    if (zeta.size() != design.cols()) {
        throw ValidationError("coefficient length " + std::to_string(zeta.size()) +
                              " does not match design width " + std::to_string(design.cols()));
    }
}

// per-observation derivative of the objective with respect to the fitted value
Eigen::VectorXd scores(const Eigen::VectorXd& r, const Eigen::VectorXd& w, const LossKind& kind)
{
    Eigen::VectorXd s(r.size());
    std::visit(overloaded{
                   [&](const ExpSquared& k) {
                       for (Index i = 0; i < r.size(); ++i) {
                           s[i] = 2.0 * w[i] * exp_kernel(r[i], k.theta) * r[i] / k.theta;
                       }
                   },
                   [&](const WeightedLS&) { s = 2.0 * w.cwiseProduct(r); },
                   [&](const WeightedCheck& k) {
                       for (Index i = 0; i < r.size(); ++i) {
                           s[i] = w[i] * smoothed_check_derivative(r[i], k.tau, k.eps);
                       }
                   },
               },
               kind);
    return s;
}

} // namespace

void validate(const LossKind& kind)
{
    std::visit(overloaded{
                   [](const ExpSquared& k) {
                       if (!(k.theta > 0.0) || !std::isfinite(k.theta)) {
                           throw ValidationError("theta must be positive");
                       }
                   },
                   [](const WeightedLS&) {},
                   [](const WeightedCheck& k) {
                       if (!(k.tau > 0.0 && k.tau < 1.0)) throw ValidationError("tau must lie in (0, 1)");
                       if (!(k.eps > 0.0)) throw ValidationError("check-loss epsilon must be positive");
                   },
               },
               kind);
}

std::string loss_name(const LossKind& kind)
{
    return std::visit(overloaded{
                          [](const ExpSquared&) { return std::string("exp_squared"); },
                          [](const WeightedLS&) { return std::string("weighted_ls"); },
                          [](const WeightedCheck&) { return std::string("weighted_check"); },
                      },
                      kind);
}

double default_check_epsilon(const Eigen::VectorXd& y)
{
    if (y.size() == 0) return 1e-4;
    const double mean = y.mean();
    const double sd = std::sqrt((y.array() - mean).square().mean());
    return 1e-4 * (sd > 0.0 ? sd : 1.0);
}

Eigen::VectorXd residuals(const ExpandedDesign& design, const Coefficients& zeta)
{
    return design.y - design.U * zeta.vector();
}

double objective_from_residuals(const Eigen::VectorXd& r, const Eigen::VectorXd& w,
                                const LossKind& kind)
{
    validate(kind);
    return std::visit(overloaded{
                          [&](const ExpSquared& k) {
                              double q = 0.0;
                              for (Index i = 0; i < r.size(); ++i) q += w[i] * exp_kernel(r[i], k.theta);
                              return q;
                          },
                          [&](const WeightedLS&) { return -w.dot(r.cwiseProduct(r)); },
                          [&](const WeightedCheck& k) {
                              double q = 0.0;
                              for (Index i = 0; i < r.size(); ++i) {
                                  q -= w[i] * smoothed_check(r[i], k.tau, k.eps);
                              }
                              return q;
                          },
                      },
                      kind);
}

double objective(const ExpandedDesign& design, const StuteWeights& weights, const Coefficients& zeta,
                 const LossKind& kind)
{
    check_dims(design, weights, zeta);
    return objective_from_residuals(residuals(design, zeta), weights.w, kind);
}

Eigen::VectorXd gradient(const ExpandedDesign& design, const StuteWeights& weights,
                         const Coefficients& zeta, const LossKind& kind)
{
    check_dims(design, weights, zeta);
    validate(kind);
    return design.U.transpose() * scores(residuals(design, zeta), weights.w, kind);
}

SurrogateState surrogate_from_residuals(Eigen::VectorXd r, const Eigen::VectorXd& w,
                                        const LossKind& kind)
{
    SurrogateState st;
    st.Q_value = objective_from_residuals(r, w, kind);
    st.W_diag.resize(r.size());
    st.working_residual = r;
    std::visit(overloaded{
                   [&](const ExpSquared& k) {
                       for (Index i = 0; i < r.size(); ++i) {
                           st.W_diag[i] = 2.0 * w[i] * exp_kernel(r[i], k.theta) / k.theta;
                       }
                   },
                   [&](const WeightedLS&) { st.W_diag = 2.0 * w; },
                   [&](const WeightedCheck& k) {
                       // curvature w/(2 max(|r|, eps)) majorizes the smoothed check loss
                       for (Index i = 0; i < r.size(); ++i) {
                           const double m = std::max(std::abs(r[i]), k.eps);
                           st.W_diag[i] = w[i] / (2.0 * m);
                           if (w[i] > 0.0) {
                               st.working_residual[i] =
                                   2.0 * m * smoothed_check_derivative(r[i], k.tau, k.eps);
                           }
                       }
                   },
               },
               kind);
    st.residuals = std::move(r);
    return st;
}

SurrogateState surrogate_state(const ExpandedDesign& design, const StuteWeights& weights,
                               const Coefficients& zeta, const LossKind& kind)
{
    check_dims(design, weights, zeta);
    return surrogate_from_residuals(residuals(design, zeta), weights.w, kind);
}

double surrogate_value(const ExpandedDesign& design, const SurrogateState& state,
                       const Coefficients& zeta_m, const Coefficients& zeta)
{
    const Eigen::VectorXd step = design.U * (zeta.vector() - zeta_m.vector());
    const Eigen::VectorXd score = state.W_diag.cwiseProduct(state.working_residual);
    return state.Q_value + score.dot(step) - 0.5 * state.W_diag.dot(step.cwiseProduct(step));
}

Eigen::MatrixXd curvature_matrix(const ExpandedDesign& design, const StuteWeights& weights,
                                 const Coefficients& zeta, double theta, Index max_dim)
{
    check_dims(design, weights, zeta);
    validate(ExpSquared{theta});
    if (design.cols() > max_dim) throw ValidationError("diagnostic matrix too large");
    const Eigen::VectorXd r = residuals(design, zeta);
    Eigen::VectorXd c(r.size());
    for (Index i = 0; i < r.size(); ++i) {
        c[i] = 2.0 / theta * weights.w[i] * exp_kernel(r[i], theta) *
               (2.0 * r[i] * r[i] / theta - 1.0);
    }
    return design.U.transpose() * c.asDiagonal() * design.U;
}

} // namespace robgxe
