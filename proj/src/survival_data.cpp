#include "robgxe/survival_data.hpp"

#include "robgxe/errors.hpp"
#include "robgxe/stats.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace robgxe {

Coefficients::Coefficients(int q, int p)
    : layout_{q, p}, zeta_(Eigen::VectorXd::Zero(Layout::width(q, p)))
{}

Coefficients::Coefficients(Layout layout, Eigen::VectorXd zeta)
    : layout_(layout), zeta_(std::move(zeta))
{
    if (zeta_.size() != layout_.width()) {
        throw ValidationError("coefficient vector has length " + std::to_string(zeta_.size()) +
                              ", expected " + std::to_string(layout_.width()));
    }
}

SurvivalSample::SurvivalSample(Eigen::VectorXd y, Eigen::VectorXi delta, Eigen::MatrixXd E,
                               Eigen::MatrixXd G, std::vector<std::string> env_names,
                               std::vector<std::string> gene_names)
    : y_(std::move(y)), delta_(std::move(delta)), E_(std::move(E)), G_(std::move(G)),
      env_names_(std::move(env_names)), gene_names_(std::move(gene_names))
{
    const Index n = y_.size();
    if (delta_.size() != n || E_.rows() != n || G_.rows() != n) {
        throw DataError("sample components disagree on the number of subjects");
    }
    for (Index i = 0; i < n; ++i) {
        if (delta_[i] != 0 && delta_[i] != 1) {
            throw DataError("event indicator at row " + std::to_string(i + 1) + " is not 0 or 1");
        }
        if (!std::isfinite(y_[i])) {
            throw DataError("non-finite log time at row " + std::to_string(i + 1));
        }
    }
    if (!E_.allFinite() || !G_.allFinite()) throw DataError("non-finite covariate value");

    if (env_names_.empty()) {
        for (int j = 0; j < q(); ++j) env_names_.push_back("E" + std::to_string(j + 1));
    }
    if (gene_names_.empty()) {
        for (int k = 0; k < p(); ++k) gene_names_.push_back("G" + std::to_string(k + 1));
    }
    if (static_cast<int>(env_names_.size()) != q() || static_cast<int>(gene_names_.size()) != p()) {
        throw DataError("covariate names do not match the covariate matrices");
    }
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), Index{0});
}

bool SurvivalSample::is_sorted() const
{
    for (Index i = 1; i < n(); ++i) {
        if (y_[i] < y_[i - 1]) return false;
    }
    return true;
}

SurvivalSample SurvivalSample::select_rows(std::span<const Index> rows) const
{
    const auto m = static_cast<Index>(rows.size());
    Eigen::VectorXd y(m);
    Eigen::VectorXi delta(m);
    Eigen::MatrixXd E(m, q());
    Eigen::MatrixXd G(m, p());
    for (Index r = 0; r < m; ++r) {
        const Index i = rows[r];
        y[r] = y_[i];
        delta[r] = delta_[i];
        E.row(r) = E_.row(i);
        G.row(r) = G_.row(i);
    }
    SurvivalSample out(std::move(y), std::move(delta), std::move(E), std::move(G), env_names_,
                       gene_names_);
    for (Index r = 0; r < m; ++r) out.order_[r] = order_[rows[r]];
    return out;
}

SurvivalSample sort_by_time(const SurvivalSample& sample)
{
    std::vector<Index> idx(sample.n());
    std::iota(idx.begin(), idx.end(), Index{0});
    const auto& y = sample.y();
    const auto& delta = sample.delta();
    const auto& order = sample.order();
    std::sort(idx.begin(), idx.end(), [&](Index a, Index b) {
        if (y[a] != y[b]) return y[a] < y[b];
        if (delta[a] != delta[b]) return delta[a] > delta[b];
        return order[a] < order[b];
    });
    return sample.select_rows(idx);
}

StuteWeights compute_stute_weights(const SurvivalSample& sorted)
{
    const Index n = sorted.n();
    if (n == 0) throw DataError("empty cohort");
    if (!sorted.is_sorted()) throw ValidationError("Stute weights need a sample sorted by time");

    StuteWeights out{Eigen::VectorXd::Zero(n)};
    const auto& delta = sorted.delta();
    const double nd = static_cast<double>(n);
    // running product over j < i of ((n-j)/(n-j+1))^delta_j, 1-based j
    double survivor = 1.0;
    for (Index i = 0; i < n; ++i) {
        const double at_risk = nd - static_cast<double>(i);
        if (delta[i] == 1) {
            out.w[i] = survivor / at_risk;
            survivor *= (at_risk - 1.0) / at_risk;
        }
    }
    return out;
}

Eigen::MatrixXd expand_covariates(const Eigen::MatrixXd& E, const Eigen::MatrixXd& G)
{
    const int q = static_cast<int>(E.cols());
    const int p = static_cast<int>(G.cols());
    if (q == 0 || p == 0) throw DataError("empty covariate block");
    if (E.rows() != G.rows()) throw DataError("E and G disagree on the number of subjects");

    const Layout layout{q, p};
    Eigen::MatrixXd U(E.rows(), layout.width());
    U.col(0).setOnes();
    U.middleCols(1, q) = E;
    for (int k = 0; k < p; ++k) {
        const Index start = layout.block_start(k);
        U.col(start) = G.col(k);
        for (int j = 0; j < q; ++j) {
            U.col(start + 1 + j) = E.col(j).cwiseProduct(G.col(k));
        }
    }
    return U;
}

ExpandedDesign expand_design(const SurvivalSample& sample)
{
    ExpandedDesign d;
    d.layout = Layout{sample.q(), sample.p()};
    d.y = sample.y();
    d.U = expand_covariates(sample.E(), sample.G());
    d.column_means = Eigen::VectorXd::Zero(d.U.cols());
    d.column_scales = Eigen::VectorXd::Ones(d.U.cols());
    d.constant_column.assign(static_cast<std::size_t>(d.U.cols()), false);
    d.constant_column[0] = true;
    return d;
}

ExpandedDesign standardize(const ExpandedDesign& design)
{
    ExpandedDesign d = design;
    if (d.standardized) return d;
    const double n = static_cast<double>(d.rows());
    for (Index j = 1; j < d.cols(); ++j) {
        auto col = d.U.col(j);
        const double mean = col.mean();
        const double var = (col.array() - mean).square().sum() / n;
        const double sd = std::sqrt(var);
        if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
            d.constant_column[static_cast<std::size_t>(j)] = true;
            d.column_means[j] = 0.0;
            d.column_scales[j] = 1.0;
            continue;
        }
        col.array() = (col.array() - mean) / sd;
        d.column_means[j] = mean;
        d.column_scales[j] = sd;
    }
    d.standardized = true;
    return d;
}

Coefficients ExpandedDesign::destandardize(const Coefficients& fitted) const
{
    Eigen::VectorXd raw = fitted.vector();
    if (!standardized) return Coefficients(layout, raw);
    double shift = 0.0;
    for (Index j = 1; j < raw.size(); ++j) {
        raw[j] = fitted[j] / column_scales[j];
        shift += raw[j] * column_means[j];
    }
    raw[0] = fitted[0] - shift;
    return Coefficients(layout, std::move(raw));
}

Coefficients ExpandedDesign::standardize_coefficients(const Coefficients& raw) const
{
    Eigen::VectorXd out = raw.vector();
    if (!standardized) return Coefficients(layout, out);
    double shift = 0.0;
    for (Index j = 1; j < out.size(); ++j) {
        out[j] = raw[j] * column_scales[j];
        shift += raw[j] * column_means[j];
    }
    out[0] = raw[0] + shift;
    return Coefficients(layout, std::move(out));
}

PrescreenResult prescreen(const SurvivalSample& sorted, const StuteWeights& weights, double p_cut,
                          bool use_iqr)
{
    if (!(p_cut > 0.0 && p_cut <= 1.0)) throw ValidationError("p_cut must lie in (0, 1]");
    if (weights.w.size() != sorted.n()) throw ValidationError("weights do not match the sample");

    const int p = sorted.p();
    PrescreenResult res;
    res.p_values = Eigen::VectorXd::Ones(p);
    res.iqr = Eigen::VectorXd::Zero(p);

    const double total = weights.w.sum();
    const Eigen::VectorXd& y = sorted.y();
    if (total > 0.0) {
        const Eigen::VectorXd w = weights.w / total;
        const double n_eff = 1.0 / w.squaredNorm();
        const double ybar = w.dot(y);
        for (int k = 0; k < p; ++k) {
            const auto x = sorted.G().col(k);
            const double xbar = w.dot(x);
            const Eigen::ArrayXd xc = x.array() - xbar;
            const Eigen::ArrayXd yc = y.array() - ybar;
            const double sxx = (w.array() * xc.square()).sum();
            if (!(sxx > 0.0)) continue;
            const double slope = (w.array() * xc * yc).sum() / sxx;
            double sigma2 = (w.array() * (yc - slope * xc).square()).sum();
            if (n_eff > 2.0) sigma2 *= n_eff / (n_eff - 2.0);
            const double se = std::sqrt(sigma2 / (n_eff * sxx));
            if (se > 0.0) {
                res.p_values[k] = stats::normal_two_sided_p(slope / se);
            } else {
                res.p_values[k] = slope != 0.0 ? 0.0 : 1.0;
            }
        }
    }

    for (int k = 0; k < p; ++k) {
        const auto col = sorted.G().col(k);
        std::vector<double> v(col.data(), col.data() + col.size());
        res.iqr[k] = sorted.n() > 0 ? stats::quantile(v, 0.75) - stats::quantile(v, 0.25) : 0.0;
    }
    if (p > 0) {
        res.median_iqr = stats::quantile(std::vector<double>(res.iqr.data(), res.iqr.data() + p), 0.5);
    }

    for (int k = 0; k < p; ++k) {
        const bool significant = res.p_values[k] <= p_cut;
        const bool spread = !use_iqr || res.iqr[k] > res.median_iqr;
        if (significant && spread) res.retained.push_back(k);
    }
    return res;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    for (auto& f : fields) {
        const auto b = f.find_first_not_of(" \t\"");
        const auto e = f.find_last_not_of(" \t\"");
        f = b == std::string::npos ? std::string{} : f.substr(b, e - b + 1);
    }
    return fields;
}

double parse_cell(const std::string& cell, std::size_t line_no, const std::string& column)
{
    double value = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    if (!cell.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (cell.empty() || ec != std::errc{} || ptr != last || !std::isfinite(value)) {
        throw DataError("line " + std::to_string(line_no) + ", column '" + column +
                        "': non-numeric value '" + cell + "'");
    }
    return value;
}

} // namespace

SurvivalSample read_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line)) throw DataError("missing header row");
    const auto header = split_csv_line(line);

    int time_col = -1;
    int status_col = -1;
    std::vector<int> e_cols;
    std::vector<int> g_cols;
    std::vector<std::string> e_names;
    std::vector<std::string> g_names;
    for (int c = 0; c < static_cast<int>(header.size()); ++c) {
        const auto& h = header[c];
        if (h == "time") {
            time_col = c;
        } else if (h == "status") {
            status_col = c;
        } else if (!h.empty() && h[0] == 'E') {
            e_cols.push_back(c);
            e_names.push_back(h);
        } else if (!h.empty() && h[0] == 'G') {
            g_cols.push_back(c);
            g_names.push_back(h);
        } else {
            throw DataError("unrecognized column '" + h + "' (expected time, status, E*, G*)");
        }
    }
    if (time_col < 0) throw DataError("missing required column 'time'");
    if (status_col < 0) throw DataError("missing required column 'status'");
    if (e_cols.empty()) throw DataError("no environmental columns (prefix 'E')");
    if (g_cols.empty()) throw DataError("no genetic columns (prefix 'G')");

    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            throw DataError("line " + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " fields, found " +
                            std::to_string(fields.size()));
        }
        rows.push_back(std::move(fields));
        line_numbers.push_back(line_no);
    }

    const auto n = static_cast<Index>(rows.size());
    Eigen::VectorXd y(n);
    Eigen::VectorXi delta(n);
    Eigen::MatrixXd E(n, static_cast<Index>(e_cols.size()));
    Eigen::MatrixXd G(n, static_cast<Index>(g_cols.size()));
    for (Index i = 0; i < n; ++i) {
        const auto& r = rows[i];
        const auto ln = line_numbers[i];
        const double t = parse_cell(r[time_col], ln, "time");
        if (!(t > 0.0)) {
            throw DataError("line " + std::to_string(ln) + ", column 'time': time must be positive");
        }
        y[i] = std::log(t);
        const double s = parse_cell(r[status_col], ln, "status");
        if (s != 0.0 && s != 1.0) {
            throw DataError("line " + std::to_string(ln) + ", column 'status': value '" +
                            r[status_col] + "' is not 0 or 1");
        }
        delta[i] = static_cast<int>(s);
        for (std::size_t j = 0; j < e_cols.size(); ++j) {
            E(i, static_cast<Index>(j)) = parse_cell(r[e_cols[j]], ln, header[e_cols[j]]);
        }
        for (std::size_t k = 0; k < g_cols.size(); ++k) {
            G(i, static_cast<Index>(k)) = parse_cell(r[g_cols[k]], ln, header[g_cols[k]]);
        }
    }
    return SurvivalSample(std::move(y), std::move(delta), std::move(E), std::move(G),
                          std::move(e_names), std::move(g_names));
}

SurvivalSample load_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    return read_csv(in);
}

void write_csv(const SurvivalSample& sample, std::ostream& out)
{
    out << "time,status";
    for (const auto& e : sample.env_names()) out << ',' << e;
    for (const auto& g : sample.gene_names()) out << ',' << g;
    out << '\n';
    char buf[64];
    const auto put = [&](double v) {
        const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
        out.write(buf, ptr - buf);
    };
    for (Index i = 0; i < sample.n(); ++i) {
        put(std::exp(sample.y()[i]));
        out << ',' << sample.delta()[i];
        for (int j = 0; j < sample.q(); ++j) {
            out << ',';
            put(sample.E()(i, j));
        }
        for (int k = 0; k < sample.p(); ++k) {
            out << ',';
            put(sample.G()(i, k));
        }
        out << '\n';
    }
}

PreparedCohort prepare_cohort(const SurvivalSample& sample)
{
    PreparedCohort c;
    c.sample = sort_by_time(sample);
    c.weights = compute_stute_weights(c.sample);
    c.design = standardize(expand_design(c.sample));
    return c;
}

} // namespace robgxe
