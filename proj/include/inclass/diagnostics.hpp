#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "inclass/classifier.hpp"
#include "inclass/extraction.hpp"
#include "inclass/net.hpp"

namespace inclass {

/// Finite-sample identifiability diagnostics. mu holds the essential-
/// supremum proxies of the per-variate classifiers (upper q-quantiles over
/// the dataset); pairwise_mu the analogous quantities for component pairs.
/// Raw values are reported alongside the verdicts so callers can apply their
/// own thresholds.
struct DiagnosticsReport {
    Tensor2 mu;                        // C×V
    std::vector<Tensor2> pairwise_mu;  // per variate, C×C, diagonal unused
    bool sufficient_ok = false;
    bool necessary_ok = false;
    double sufficient_margin = 0.0;  // min mu - (1 - tau)
    double necessary_margin = 0.0;
    double q = 0.999;
    double tau = 0.02;
    double tc_direct = std::numeric_limits<double>::quiet_NaN();
    double tc_classifier = std::numeric_limits<double>::quiet_NaN();
};

/// Sufficient condition: every component must dominate somewhere in every
/// variate. mu_iv is the upper q-quantile of alpha_i over the data; the
/// verdict requires every entry >= 1 - tau.
DiagnosticsReport check_sufficient(const VariateClassifier& clf, const Dataset& data,
                                   double q = 0.999, double tau = 0.02);

/// Necessary condition: for every ordered pair (i, j) the quantile of
/// alpha_i / (alpha_i + alpha_j) must reach 1 - tau. Points where both
/// classifiers vanish are skipped.
DiagnosticsReport check_necessary(const VariateClassifier& clf, const Dataset& data,
                                  double q = 0.999, double tau = 0.02);

/// Both checks on the same inputs, merged into one report.
DiagnosticsReport check_identifiability(const VariateClassifier& clf, const Dataset& data,
                                        double q = 0.999, double tau = 0.02);

/// Corrected-classifier view of a trained net: eval returns the
/// cic-corrected alpha rather than the raw network output.
class CorrectedClassifierView : public VariateClassifier {
public:
    CorrectedClassifierView(const VariateClassifier& base, PseudoWeights pw)
        : base_(base), pw_(std::move(pw)) {}

    std::size_t variate_count() const override { return base_.variate_count(); }
    std::size_t class_count(std::size_t v) const override { return base_.class_count(v); }
    std::size_t variate_dim(std::size_t v) const override { return base_.variate_dim(v); }
    Tensor2 eval(std::size_t v, const Tensor2& batch) const override {
        return cic_classifier_batch(base_, pw_, v, batch);
    }

private:
    const VariateClassifier& base_;
    PseudoWeights pw_;
};

/// Plug-in total correlation: equal-width binning per variate, joint and
/// marginal histograms, sum of p ln(p / prod p_v) with 0 ln 0 := 0.
double total_correlation_direct(const Dataset& data, std::size_t bins = 20);

struct TCClassifierConfig {
    std::vector<std::size_t> hidden = {32, 32, 32};
    std::size_t epochs = 5;
    std::size_t batch_size = 100;
    std::uint64_t seed = 0;
    double lr = 1e-3;
    double weight_decay = 1e-4;  // L2 on the discriminator; curbs readout bias
};

/// Classifier-based total correlation: trains a binary discriminator between
/// the data and its per-variate independently resampled counterpart, then
/// reads off the KL divergence as the mean logit over the data rows.
double total_correlation_classifier(const Dataset& data, const TCClassifierConfig& cfg = {});

struct MatchResult {
    std::vector<std::size_t> sigma;  // learned index assigned to true component i
    double weight_error = 0.0;       // max |w_true_i - w_learned_sigma(i)|
    std::vector<double> agreement;   // mean aggregate prob of sigma(i) on true-i rows
    bool exact = true;               // exact enumeration (C <= 8) or greedy fallback
};

/// Matches learned components to true ones by maximising total classifier
/// agreement. Exact permutation search up to C = 8, greedy beyond (flagged).
MatchResult match_components(const Tensor2& aggregate_probs, std::span<const int> true_labels,
                             std::span<const double> learned_weights,
                             std::span<const double> true_weights);

struct ConfusionMatrix {
    Tensor2 mean_prob;  // row r = mean predicted simplex over true-class-r points
    std::vector<bool> row_defined;

    double mean_diagonal() const;
};

ConfusionMatrix confusion_matrix(const Tensor2& predictions, std::span<const int> labels,
                                 std::size_t classes);

} // namespace inclass
