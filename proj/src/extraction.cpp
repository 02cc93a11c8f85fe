#include "inclass/extraction.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "inclass/costs.hpp"

namespace inclass {

PseudoWeights estimate_pseudo_weights(const VariateClassifier& clf, const Dataset& data) {
    data.validate();
    if (data.variate_count() != clf.variate_count())
        throw dimension_error("pseudo weights: dataset/classifier variate count mismatch");
    const std::size_t v_count = clf.variate_count();
    const std::size_t c = clf.class_count(0);
    for (std::size_t v = 1; v < v_count; ++v)
        if (clf.class_count(v) != c)
            throw dimension_error("pseudo weights: class counts differ across variates");

    PseudoWeights pw;
    pw.phi = Tensor2(c, v_count);
    for (std::size_t v = 0; v < v_count; ++v) {
        const Tensor2 beta = clf.eval(v, data.variates[v]);
        const std::vector<double> mean = beta.column_means();
        for (std::size_t i = 0; i < c; ++i) pw.phi.at(i, v) = mean[i];
    }
    pw.w_tilde.resize(c);
    for (std::size_t i = 0; i < c; ++i) {
        double log_sum = 0.0;
        for (std::size_t v = 0; v < v_count; ++v)
            log_sum += std::log(std::max(pw.phi.at(i, v), kLogFloor));
        pw.w_tilde[i] = std::exp(log_sum / static_cast<double>(v_count));
    }
    return pw;
}

std::vector<double> mixture_weights(const PseudoWeights& pw) {
    double denom = 0.0;
    for (std::size_t i = 0; i < pw.w_tilde.size(); ++i) {
        if (pw.w_tilde[i] <= 0.0)
            throw degenerate_component_error("mixture weights: vanishing unnormalised weight",
                                             i, 0);
        denom += pw.w_tilde[i];
    }
    std::vector<double> w(pw.w_tilde.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = pw.w_tilde[i] / denom;
    return w;
}

namespace {

void check_phi_column(const PseudoWeights& pw, std::size_t v) {
    for (std::size_t i = 0; i < pw.component_count(); ++i)
        if (pw.phi.at(i, v) < kPhiFloor)
            throw degenerate_component_error("pseudo weight below floor", i, v);
}

} // namespace

Tensor2 cic_classifier_batch(const VariateClassifier& clf, const PseudoWeights& pw,
                             std::size_t v, const Tensor2& batch) {
    if (pw.component_count() != clf.class_count(v))
        throw dimension_error("cic classifier: pseudo weights inconsistent with classifier");
    check_phi_column(pw, v);
    const std::size_t c = pw.component_count();
    Tensor2 alpha = clf.eval(v, batch);
    std::vector<double> factor(c);
    for (std::size_t i = 0; i < c; ++i) factor[i] = pw.w_tilde[i] / pw.phi.at(i, v);
    for (std::size_t r = 0; r < alpha.rows(); ++r) {
        double* a = alpha.row_ptr(r);
        double total = 0.0;
        for (std::size_t i = 0; i < c; ++i) {
            a[i] *= factor[i];
            total += a[i];
        }
        const double inv = total > 0.0 ? 1.0 / total : 0.0;
        for (std::size_t i = 0; i < c; ++i) a[i] *= inv;
    }
    return alpha;
}

std::vector<double> cic_classifier(const VariateClassifier& clf, const PseudoWeights& pw,
                                   std::size_t v, std::span<const double> x) {
    Tensor2 batch(1, x.size());
    for (std::size_t i = 0; i < x.size(); ++i) batch.at(0, i) = x[i];
    const Tensor2 out = cic_classifier_batch(clf, pw, v, batch);
    return {out.row_ptr(0), out.row_ptr(0) + out.cols()};
}

Tensor2 aggregate_classifier_batch(const VariateClassifier& clf, const PseudoWeights& pw,
                                   const std::vector<Tensor2>& variates) {
    const std::size_t v_count = clf.variate_count();
    if (variates.size() != v_count)
        throw dimension_error("aggregate classifier: variate count mismatch");
    const std::size_t c = pw.component_count();
    for (std::size_t v = 0; v < v_count; ++v) check_phi_column(pw, v);

    std::vector<double> scale(c);
    for (std::size_t i = 0; i < c; ++i)
        scale[i] = std::pow(pw.w_tilde[i], 1.0 - static_cast<double>(v_count));

    const std::size_t n = variates[0].rows();
    Tensor2 agg(n, c, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t i = 0; i < c; ++i) agg.at(r, i) = scale[i];
    for (std::size_t v = 0; v < v_count; ++v) {
        const Tensor2 beta = clf.eval(v, variates[v]);
        if (beta.rows() != n)
            throw dimension_error("aggregate classifier: batch row counts differ");
        for (std::size_t r = 0; r < n; ++r) {
            double* a = agg.row_ptr(r);
            const double* b = beta.row_ptr(r);
            for (std::size_t i = 0; i < c; ++i) a[i] *= b[i];
        }
    }
    for (std::size_t r = 0; r < n; ++r) {
        double* a = agg.row_ptr(r);
        double total = 0.0;
        for (std::size_t i = 0; i < c; ++i) total += a[i];
        const double inv = total > 0.0 ? 1.0 / total : 0.0;
        for (std::size_t i = 0; i < c; ++i) a[i] *= inv;
    }
    return agg;
}

std::vector<double> aggregate_classifier(const VariateClassifier& clf, const PseudoWeights& pw,
                                         const std::vector<std::vector<double>>& parts) {
    std::vector<Tensor2> variates;
    variates.reserve(parts.size());
    for (const auto& p : parts) {
        Tensor2 row(1, p.size());
        for (std::size_t i = 0; i < p.size(); ++i) row.at(0, i) = p[i];
        variates.push_back(std::move(row));
    }
    const Tensor2 out = aggregate_classifier_batch(clf, pw, variates);
    return {out.row_ptr(0), out.row_ptr(0) + out.cols()};
}

MarginalKind marginal_kind_from_name(const std::string& name) {
    if (name == "histogram") return MarginalKind::histogram;
    if (name == "kde") return MarginalKind::kde;
    if (name == "analytic") return MarginalKind::analytic;
    throw config_error("unknown marginal estimator '" + name + "'");
}

const char* marginal_kind_name(MarginalKind kind) {
    switch (kind) {
        case MarginalKind::histogram: return "histogram";
        case MarginalKind::kde: return "kde";
        case MarginalKind::analytic: return "analytic";
    }
    return "?";
}

MarginalEstimator MarginalEstimator::histogram(std::span<const double> column,
                                               std::size_t bins) {
    if (column.empty()) throw invalid_input_error("histogram: empty column");
    MarginalEstimator m;
    m.kind_ = MarginalKind::histogram;
    const auto [lo_it, hi_it] = std::minmax_element(column.begin(), column.end());
    m.lo_ = *lo_it;
    m.hi_ = *hi_it;
    if (m.hi_ <= m.lo_) m.hi_ = m.lo_ + 1e-12;
    if (bins == 0)
        bins = static_cast<std::size_t>(
            std::ceil(2.0 * std::cbrt(static_cast<double>(column.size()))));
    m.bin_width_ = (m.hi_ - m.lo_) / static_cast<double>(bins);
    m.densities_.assign(bins, 0.0);
    for (double x : column) {
        std::size_t b = static_cast<std::size_t>((x - m.lo_) / m.bin_width_);
        if (b >= bins) b = bins - 1;  // right edge
        m.densities_[b] += 1.0;
    }
    const double norm = 1.0 / (static_cast<double>(column.size()) * m.bin_width_);
    for (double& d : m.densities_) d *= norm;
    return m;
}

MarginalEstimator MarginalEstimator::kde(std::span<const double> column, double bandwidth) {
    if (column.empty()) throw invalid_input_error("kde: empty column");
    MarginalEstimator m;
    m.kind_ = MarginalKind::kde;
    m.sample_.assign(column.begin(), column.end());
    std::sort(m.sample_.begin(), m.sample_.end());
    const std::size_t n = m.sample_.size();
    if (bandwidth <= 0.0) {
        // Silverman's rule: 0.9 min(sd, IQR/1.34) n^(-1/5).
        double mean = 0.0;
        for (double x : m.sample_) mean += x;
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (double x : m.sample_) var += (x - mean) * (x - mean);
        var /= static_cast<double>(n > 1 ? n - 1 : 1);
        const double sd = std::sqrt(var);
        const double iqr = m.sample_[(3 * n) / 4] - m.sample_[n / 4];
        double spread = std::min(sd, iqr / 1.34);
        if (spread <= 0.0) spread = sd > 0.0 ? sd : 1.0;
        bandwidth = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
    }
    m.bandwidth_ = bandwidth;
    m.lo_ = m.sample_.front() - 8.0 * bandwidth;
    m.hi_ = m.sample_.back() + 8.0 * bandwidth;
    return m;
}

MarginalEstimator MarginalEstimator::analytic(std::function<double(double)> pdf, double lo,
                                              double hi) {
    MarginalEstimator m;
    m.kind_ = MarginalKind::analytic;
    m.pdf_ = std::move(pdf);
    m.lo_ = lo;
    m.hi_ = hi;
    return m;
}

double MarginalEstimator::density(double x) const {
    switch (kind_) {
        case MarginalKind::histogram: {
            if (x < lo_ || x > hi_) return 0.0;
            std::size_t b = static_cast<std::size_t>((x - lo_) / bin_width_);
            if (b >= densities_.size()) b = densities_.size() - 1;
            return densities_[b];
        }
        case MarginalKind::kde: {
            // Kernels further than 8 bandwidths contribute below double noise.
            const double window = 8.0 * bandwidth_;
            const auto first = std::lower_bound(sample_.begin(), sample_.end(), x - window);
            const auto last = std::upper_bound(sample_.begin(), sample_.end(), x + window);
            double sum = 0.0;
            for (auto it = first; it != last; ++it) {
                const double z = (x - *it) / bandwidth_;
                sum += std::exp(-0.5 * z * z);
            }
            constexpr double kInvSqrt2Pi = 0.3989422804014326779399461;
            return sum * kInvSqrt2Pi / (static_cast<double>(sample_.size()) * bandwidth_);
        }
        case MarginalKind::analytic:
            return pdf_(x);
    }
    return 0.0;
}

MarginalEstimator fit_marginal(std::span<const double> column, const MarginalConfig& cfg,
                               std::size_t variate) {
    switch (cfg.kind) {
        case MarginalKind::histogram:
            return MarginalEstimator::histogram(column, cfg.bins);
        case MarginalKind::kde:
            return MarginalEstimator::kde(column, cfg.bandwidth);
        case MarginalKind::analytic: {
            if (!cfg.analytic_model)
                throw config_error("fit_marginal: analytic kind requires a model");
            const MixtureSpec spec = *cfg.analytic_model;
            const auto [lo_it, hi_it] = std::minmax_element(column.begin(), column.end());
            return MarginalEstimator::analytic(
                [spec, variate](double x) { return spec.marginal_pdf(variate, x); }, *lo_it,
                *hi_it);
        }
    }
    throw config_error("fit_marginal: unknown estimator kind");
}

std::vector<double> default_grid(std::span<const double> column, std::size_t points) {
    if (column.size() < 2) throw invalid_input_error("grid: need at least two samples");
    if (points < 2) throw config_error("grid: need at least two points");
    std::vector<double> sorted(column.begin(), column.end());
    std::sort(sorted.begin(), sorted.end());
    const auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(sorted.size() - 1);
        const std::size_t i = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(i);
        return i + 1 < sorted.size() ? sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
                                     : sorted.back();
    };
    const double lo = quantile(0.001);
    const double hi = quantile(0.999);
    std::vector<double> grid(points);
    for (std::size_t g = 0; g < points; ++g)
        grid[g] = lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(points - 1);
    return grid;
}

std::vector<std::vector<double>> component_density(const VariateClassifier& clf,
                                                   const PseudoWeights& pw,
                                                   const MarginalEstimator& marginal,
                                                   std::size_t v,
                                                   std::span<const double> grid) {
    if (clf.variate_dim(v) != 1)
        throw config_error("component density: variate " + std::to_string(v) +
                           " is not one-dimensional");
    check_phi_column(pw, v);
    const std::size_t c = pw.component_count();
    Tensor2 batch(grid.size(), 1);
    for (std::size_t g = 0; g < grid.size(); ++g) batch.at(g, 0) = grid[g];
    const Tensor2 beta = clf.eval(v, batch);

    std::vector<std::vector<double>> f(c, std::vector<double>(grid.size()));
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const double p = marginal.density(grid[g]);
        for (std::size_t i = 0; i < c; ++i) f[i][g] = p * beta.at(g, i) / pw.phi.at(i, v);
    }
    return f;
}

std::vector<double> model_marginal(const VariateClassifier& clf, const PseudoWeights& pw,
                                   const MarginalEstimator& marginal, std::size_t v,
                                   std::span<const double> grid) {
    const std::vector<std::vector<double>> f = component_density(clf, pw, marginal, v, grid);
    const std::vector<double> w = mixture_weights(pw);
    std::vector<double> out(grid.size(), 0.0);
    for (std::size_t i = 0; i < f.size(); ++i)
        for (std::size_t g = 0; g < grid.size(); ++g) out[g] += w[i] * f[i][g];
    return out;
}

ExtractedModel extract_model(const VariateClassifier& clf, const Dataset& data,
                             const MarginalConfig& marginal_cfg, std::size_t grid_points) {
    ExtractedModel model;
    model.pseudo = estimate_pseudo_weights(clf, data);
    model.weights = mixture_weights(model.pseudo);

    const std::size_t v_count = clf.variate_count();
    model.has_density.assign(v_count, false);
    model.grids.resize(v_count);
    model.f.resize(v_count);
    model.alpha.resize(v_count);
    model.marginal.resize(v_count);

    for (std::size_t v = 0; v < v_count; ++v) {
        if (clf.variate_dim(v) != 1) continue;  // weights/classifiers only
        model.has_density[v] = true;
        const std::vector<double> column = data.variates[v].column(0);
        model.grids[v] = default_grid(column, grid_points);
        const MarginalEstimator marginal = fit_marginal(column, marginal_cfg, v);
        model.f[v] = component_density(clf, model.pseudo, marginal, v, model.grids[v]);
        model.marginal[v] =
            model_marginal(clf, model.pseudo, marginal, v, model.grids[v]);

        Tensor2 grid_batch(model.grids[v].size(), 1);
        for (std::size_t g = 0; g < model.grids[v].size(); ++g)
            grid_batch.at(g, 0) = model.grids[v][g];
        const Tensor2 alpha = cic_classifier_batch(clf, model.pseudo, v, grid_batch);
        model.alpha[v].assign(model.pseudo.component_count(),
                              std::vector<double>(model.grids[v].size()));
        for (std::size_t i = 0; i < model.pseudo.component_count(); ++i)
            for (std::size_t g = 0; g < model.grids[v].size(); ++g)
                model.alpha[v][i][g] = alpha.at(g, i);
    }
    return model;
}

double trapezoid(std::span<const double> grid, std::span<const double> values) {
    if (grid.size() != values.size() || grid.size() < 2)
        throw dimension_error("trapezoid: grid/value size mismatch");
    double sum = 0.0;
    for (std::size_t g = 0; g + 1 < grid.size(); ++g)
        sum += 0.5 * (values[g] + values[g + 1]) * (grid[g + 1] - grid[g]);
    return sum;
}

} // namespace inclass
