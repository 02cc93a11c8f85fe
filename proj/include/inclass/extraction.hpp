#pragma once

#include <functional>
#include <vector>

#include "inclass/classifier.hpp"
#include "inclass/net.hpp"
#include "inclass/synthetic.hpp"

namespace inclass {

/// Batch means phi[i][v] of the classifier outputs plus the derived
/// unnormalised weights (geometric mean of each phi row over variates).
struct PseudoWeights {
    Tensor2 phi;  // C×V
    std::vector<double> w_tilde;

    std::size_t component_count() const { return phi.rows(); }
    std::size_t variate_count() const { return phi.cols(); }
};

PseudoWeights estimate_pseudo_weights(const VariateClassifier& clf, const Dataset& data);

/// Normalises the unnormalised weights; throws degenerate_component_error on
/// a vanishing component.
std::vector<double> mixture_weights(const PseudoWeights& pw);

/// Corrected per-variate classifier: alpha_i proportional to
/// beta_i * w_tilde_i / phi_iv, normalised over components.
std::vector<double> cic_classifier(const VariateClassifier& clf, const PseudoWeights& pw,
                                   std::size_t v, std::span<const double> x);

/// Row-wise cic_classifier over a batch.
Tensor2 cic_classifier_batch(const VariateClassifier& clf, const PseudoWeights& pw,
                             std::size_t v, const Tensor2& batch);

/// Component-membership probability from the full datapoint:
/// alpha_i proportional to w_tilde_i^(1-V) * prod_v beta_iv.
std::vector<double> aggregate_classifier(const VariateClassifier& clf, const PseudoWeights& pw,
                                         const std::vector<std::vector<double>>& parts);

/// Row-wise aggregate classifier over per-variate batches.
Tensor2 aggregate_classifier_batch(const VariateClassifier& clf, const PseudoWeights& pw,
                                   const std::vector<Tensor2>& variates);

enum class MarginalKind { histogram, kde, analytic };

MarginalKind marginal_kind_from_name(const std::string& name);
const char* marginal_kind_name(MarginalKind kind);

/// Density estimate of one 1-d variate. Histogram bins default to the Rice
/// rule; KDE bandwidth defaults to Silverman's rule. An analytic marginal
/// may be supplied for exact reproduction of known models.
class MarginalEstimator {
public:
    static MarginalEstimator histogram(std::span<const double> column, std::size_t bins = 0);
    static MarginalEstimator kde(std::span<const double> column, double bandwidth = 0.0);
    static MarginalEstimator analytic(std::function<double(double)> pdf, double lo, double hi);

    double density(double x) const;
    MarginalKind kind() const { return kind_; }
    double support_lo() const { return lo_; }
    double support_hi() const { return hi_; }
    std::size_t bin_count() const { return densities_.size(); }
    double bandwidth() const { return bandwidth_; }

private:
    MarginalKind kind_ = MarginalKind::histogram;
    double lo_ = 0.0, hi_ = 0.0;
    // histogram state
    std::vector<double> densities_;
    double bin_width_ = 0.0;
    // kde state
    std::vector<double> sample_;
    double bandwidth_ = 0.0;
    // analytic state
    std::function<double(double)> pdf_;
};

struct MarginalConfig {
    MarginalKind kind = MarginalKind::histogram;
    std::size_t bins = 0;      // 0 = Rice rule
    double bandwidth = 0.0;    // 0 = Silverman
    std::optional<MixtureSpec> analytic_model;
};

MarginalEstimator fit_marginal(std::span<const double> column, const MarginalConfig& cfg,
                               std::size_t variate = 0);

/// Evaluation grid spanning the empirical 0.1%-99.9% quantile range.
std::vector<double> default_grid(std::span<const double> column, std::size_t points = 201);

/// Per-component densities on a grid: f_i(x) = P_hat(x) beta_i(x) / phi_iv.
std::vector<std::vector<double>> component_density(const VariateClassifier& clf,
                                                   const PseudoWeights& pw,
                                                   const MarginalEstimator& marginal,
                                                   std::size_t v,
                                                   std::span<const double> grid);

/// Model marginal on a grid; equals sum_i w_i f_i(x) identically.
std::vector<double> model_marginal(const VariateClassifier& clf, const PseudoWeights& pw,
                                   const MarginalEstimator& marginal, std::size_t v,
                                   std::span<const double> grid);

/// The full learned mixture model evaluated on per-variate grids. Density
/// reconstruction is restricted to one-dimensional variates; wider variates
/// keep weights and classifiers only.
struct ExtractedModel {
    std::vector<double> weights;
    PseudoWeights pseudo;
    std::vector<bool> has_density;                      // per variate
    std::vector<std::vector<double>> grids;             // [v][g]
    std::vector<std::vector<std::vector<double>>> f;    // [v][component][g]
    std::vector<std::vector<std::vector<double>>> alpha;  // [v][component][g]
    std::vector<std::vector<double>> marginal;          // [v][g]
};

ExtractedModel extract_model(const VariateClassifier& clf, const Dataset& data,
                             const MarginalConfig& marginal_cfg = {},
                             std::size_t grid_points = 201);

/// Trapezoid integral of values sampled on an (ordered) grid.
double trapezoid(std::span<const double> grid, std::span<const double> values);

} // namespace inclass
