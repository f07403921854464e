#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace robgxe {

using Index = Eigen::Index;

/// Column layout of the interaction design and of the coefficient vector:
/// intercept, q environmental effects, then p gene blocks of width q+1
/// ordered (main effect, interaction with E_1, ..., interaction with E_q).
struct Layout {
    int q = 0;
    int p = 0;

    static Index width(int q, int p) { return 1 + Index(q) + Index(p) * (q + 1); }
    Index width() const { return width(q, p); }
    Index first_penalized() const { return 1 + q; }
    Index env_index(int j) const { return 1 + j; }
    Index block_start(int k) const { return 1 + q + Index(k) * (q + 1); }
    Index block_size() const { return q + 1; }
    Index beta_index(int k) const { return block_start(k); }
    Index gamma_index(int j, int k) const { return block_start(k) + 1 + j; }

    bool operator==(const Layout&) const = default;
};

/// Coefficient vector (alpha_0, alpha_1..alpha_q, b_1, ..., b_p) with named views.
/// Indices j (environment) and k (gene) are zero-based.
class Coefficients {
public:
    Coefficients() = default;
    Coefficients(int q, int p);
    Coefficients(Layout layout, Eigen::VectorXd zeta);

    const Layout& layout() const { return layout_; }
    int q() const { return layout_.q; }
    int p() const { return layout_.p; }
    Index size() const { return zeta_.size(); }

    double intercept() const { return zeta_[0]; }
    double env(int j) const { return zeta_[layout_.env_index(j)]; }
    double beta(int k) const { return zeta_[layout_.beta_index(k)]; }
    double gamma(int j, int k) const { return zeta_[layout_.gamma_index(j, k)]; }
    auto block(int k) const { return zeta_.segment(layout_.block_start(k), layout_.block_size()); }
    auto block(int k) { return zeta_.segment(layout_.block_start(k), layout_.block_size()); }

    const Eigen::VectorXd& vector() const { return zeta_; }
    Eigen::VectorXd& vector() { return zeta_; }
    double operator[](Index i) const { return zeta_[i]; }
    double& operator[](Index i) { return zeta_[i]; }

private:
    Layout layout_;
    Eigen::VectorXd zeta_;
};

/// Censored cohort: log observed times, event flags, E (n x q) and G (n x p).
/// Immutable after construction.
class SurvivalSample {
public:
    SurvivalSample() = default;
    SurvivalSample(Eigen::VectorXd y, Eigen::VectorXi delta, Eigen::MatrixXd E, Eigen::MatrixXd G,
                   std::vector<std::string> env_names = {}, std::vector<std::string> gene_names = {});

    const Eigen::VectorXd& y() const { return y_; }
    const Eigen::VectorXi& delta() const { return delta_; }
    const Eigen::MatrixXd& E() const { return E_; }
    const Eigen::MatrixXd& G() const { return G_; }
    const std::vector<std::string>& env_names() const { return env_names_; }
    const std::vector<std::string>& gene_names() const { return gene_names_; }
    Index n() const { return y_.size(); }
    int q() const { return static_cast<int>(E_.cols()); }
    int p() const { return static_cast<int>(G_.cols()); }

    /// order()[i] is the row of the originally constructed sample now at row i.
    const std::vector<Index>& order() const { return order_; }
    bool is_sorted() const;
    int event_count() const { return delta_.sum(); }

    /// Rows in the given order; the original-row bookkeeping follows them.
    SurvivalSample select_rows(std::span<const Index> rows) const;

private:
    Eigen::VectorXd y_;
    Eigen::VectorXi delta_;
    Eigen::MatrixXd E_;
    Eigen::MatrixXd G_;
    std::vector<std::string> env_names_;
    std::vector<std::string> gene_names_;
    std::vector<Index> order_;
};

/// Kaplan-Meier jump masses attached to the sorted observations.
struct StuteWeights {
    Eigen::VectorXd w;
};

/// n x (1+q+p(q+1)) design with standardization metadata. The response
/// travels with the design.
struct ExpandedDesign {
    Layout layout;
    Eigen::VectorXd y;
    Eigen::MatrixXd U;
    Eigen::VectorXd column_means;
    Eigen::VectorXd column_scales;
    std::vector<bool> constant_column;
    bool standardized = false;

    Index rows() const { return U.rows(); }
    Index cols() const { return U.cols(); }

    /// Map coefficients fitted on this (standardized) design back to the raw
    /// covariate scale. Identity for an unstandardized design.
    Coefficients destandardize(const Coefficients& fitted) const;
    /// Inverse of destandardize.
    Coefficients standardize_coefficients(const Coefficients& raw) const;
};

/// Sort ascending in y; ties put events before censored rows, then original order.
SurvivalSample sort_by_time(const SurvivalSample& sample);

/// Product-limit weights; the sample must already be sorted.
StuteWeights compute_stute_weights(const SurvivalSample& sorted);

ExpandedDesign expand_design(const SurvivalSample& sample);

/// Expand raw E, G into the interaction design without a response.
Eigen::MatrixXd expand_covariates(const Eigen::MatrixXd& E, const Eigen::MatrixXd& G);

/// Center and scale every non-intercept column (divisor n). Zero-variance
/// columns are flagged and left untouched.
ExpandedDesign standardize(const ExpandedDesign& design);

struct PrescreenResult {
    std::vector<int> retained;
    Eigen::VectorXd p_values;
    Eigen::VectorXd iqr;
    double median_iqr = 0.0;
};

/// Marginal gene filter: Stute-weighted univariate slope test (normal Wald
/// p-value <= p_cut) and, optionally, IQR strictly above the median IQR.
PrescreenResult prescreen(const SurvivalSample& sorted, const StuteWeights& weights, double p_cut,
                          bool use_iqr);

/// CSV with header `time,status,E1..Eq,G1..Gp`. Times must be positive and are
/// stored as logs.
SurvivalSample read_csv(std::istream& in);
SurvivalSample load_csv(const std::string& path);
/// Writes rows in their current order with exp(y) as the time column.
void write_csv(const SurvivalSample& sample, std::ostream& out);

/// Everything a fit needs: sorted cohort, its weights, standardized design.
struct PreparedCohort {
    SurvivalSample sample;
    StuteWeights weights;
    ExpandedDesign design;
};

PreparedCohort prepare_cohort(const SurvivalSample& sample);

} // namespace robgxe
