#pragma once

#include <optional>
#include <span>
#include <vector>

#include "inclass/net.hpp"
#include "inclass/tensor.hpp"

namespace inclass {

/// Floor under pseudo weights inside logs and divisions; below it a
/// component is declared degenerate.
inline constexpr double kPhiFloor = 1e-6;
/// Floor inside all logarithms.
inline constexpr double kLogFloor = 1e-12;

/// Per-variate classifier outputs for one batch: beta[v] is N×C_v with every
/// row on the simplex and a shared N across variates.
struct BatchOutputs {
    std::vector<Tensor2> beta;

    std::size_t variate_count() const { return beta.size(); }
    std::size_t rows() const { return beta.empty() ? 0 : beta[0].rows(); }
    void validate() const;
};

enum class CostKind { neg_ctc, neg_cmi, unnorm_neg_ctc, unnorm_neg_cmi, neg_tc, neg_mi };

const char* cost_kind_name(CostKind kind);
CostKind cost_kind_from_name(const std::string& name);

/// Negative cross total correlation of the batch, with every expectation
/// replaced by the batch mean. Throws degenerate_component_error when a
/// pseudo weight falls below kPhiFloor.
double neg_ctc_cost(const BatchOutputs& outputs);

/// Bivariate special case of neg_ctc_cost; requires V = 2.
double neg_cmi_cost(const BatchOutputs& outputs);

/// Surrogate cost without the normalising denominator. Never below
/// neg_ctc_cost on the same batch (AM-GM).
double unnorm_neg_ctc_cost(const BatchOutputs& outputs);
double unnorm_neg_cmi_cost(const BatchOutputs& outputs);

/// Negative total correlation of the predicted class labels (multi-label
/// mode; per-variate class counts may differ). Joint-table cells below
/// kPhiFloor contribute zero.
double neg_tc_cost(const BatchOutputs& outputs);
double neg_mi_cost(const BatchOutputs& outputs);

/// Mean categorical cross entropy of predictions against integer labels,
/// with probabilities floored at kLogFloor.
double cross_entropy_supervised(const Tensor2& probs, std::span<const int> labels);

enum class RegularizerKind { none, tikhonov, shannon, known_weights };

struct RegularizerConfig {
    RegularizerKind kind = RegularizerKind::none;
    double lambda = 0.0;
    std::vector<double> target_weights;  // required for known_weights
};

/// Additive cost term on the mixture weights:
///   tikhonov      -> -lambda * sum w_i^2
///   shannon       ->  lambda * sum w_i ln w_i   (0 ln 0 := 0)
///   known_weights -> -lambda * sum w_true_i ln w_i
double regularizer_term(std::span<const double> weights, const RegularizerConfig& cfg);

/// Moving estimates of the pseudo weights and of the per-component mean
/// numerator ratio, maintained across minibatches for stochastic training.
struct MovingEstimates {
    Tensor2 phi_hat;          // C×V
    std::vector<double> aux;  // length C
    double decay = 0.99;
};

MovingEstimates make_moving_estimates(std::size_t components, std::size_t variates,
                                      double decay = 0.99);

/// Cost value plus one flat gradient per distinct parameter set.
struct CostGradients {
    double cost = 0.0;
    std::vector<std::vector<double>> paramset_grads;
};

/// Scalar cost of the net on per-variate batches (forward + cost + optional
/// regularizer on the batch-derived mixture weights).
double cost_value(const InClassNet& net, const std::vector<Tensor2>& batches, CostKind kind,
                  const RegularizerConfig& reg = {});

/// Exact gradient of the batch-estimated cost: the batch means inside the
/// cost are differentiated through.
CostGradients cost_gradient_batch(const InClassNet& net, const std::vector<Tensor2>& batches,
                                  CostKind kind, const RegularizerConfig& reg = {});

/// Minibatch gradient using moving estimates in place of in-batch means.
/// Updates `est` by exponential moving average before differentiating, so at
/// decay 0 on a full batch it reproduces cost_gradient_batch exactly.
CostGradients cost_gradient_moving(const InClassNet& net, const std::vector<Tensor2>& batches,
                                   MovingEstimates& est, CostKind kind,
                                   const RegularizerConfig& reg = {});

} // namespace inclass
