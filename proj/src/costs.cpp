#include "inclass/costs.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace inclass {

void BatchOutputs::validate() const {
    if (beta.empty()) throw dimension_error("BatchOutputs: no variates");
    const std::size_t n = beta[0].rows();
    for (const auto& b : beta)
        if (b.rows() != n) throw dimension_error("BatchOutputs: row counts differ");
}

const char* cost_kind_name(CostKind kind) {
    switch (kind) {
        case CostKind::neg_ctc: return "neg_ctc";
        case CostKind::neg_cmi: return "neg_cmi";
        case CostKind::unnorm_neg_ctc: return "unnorm_neg_ctc";
        case CostKind::unnorm_neg_cmi: return "unnorm_neg_cmi";
        case CostKind::neg_tc: return "neg_tc";
        case CostKind::neg_mi: return "neg_mi";
    }
    return "?";
}

CostKind cost_kind_from_name(const std::string& name) {
    if (name == "neg_ctc") return CostKind::neg_ctc;
    if (name == "neg_cmi") return CostKind::neg_cmi;
    if (name == "unnorm_neg_ctc") return CostKind::unnorm_neg_ctc;
    if (name == "unnorm_neg_cmi") return CostKind::unnorm_neg_cmi;
    if (name == "neg_tc") return CostKind::neg_tc;
    if (name == "neg_mi") return CostKind::neg_mi;
    throw config_error("unknown cost function '" + name + "'");
}

namespace {

bool is_ctc_family(CostKind kind) {
    return kind == CostKind::neg_ctc || kind == CostKind::neg_cmi ||
           kind == CostKind::unnorm_neg_ctc || kind == CostKind::unnorm_neg_cmi;
}

bool is_normalized(CostKind kind) {
    return kind == CostKind::neg_ctc || kind == CostKind::neg_cmi;
}

void require_bivariate(const BatchOutputs& outputs, const char* what) {
    if (outputs.variate_count() != 2)
        throw dimension_error(std::string(what) + ": requires exactly two variates");
}

/// Column means of each beta matrix, arranged C×V. Requires equal class
/// counts across variates.
Tensor2 pseudo_weight_matrix(const BatchOutputs& outputs) {
    const std::size_t v_count = outputs.variate_count();
    const std::size_t c = outputs.beta[0].cols();
    for (const auto& b : outputs.beta)
        if (b.cols() != c)
            throw dimension_error("pseudo weights: class counts differ across variates");
    Tensor2 phi(c, v_count);
    for (std::size_t v = 0; v < v_count; ++v) {
        const std::vector<double> mean = outputs.beta[v].column_means();
        for (std::size_t i = 0; i < c; ++i) phi.at(i, v) = mean[i];
    }
    return phi;
}

void check_phi_floor(const Tensor2& phi) {
    for (std::size_t i = 0; i < phi.rows(); ++i)
        for (std::size_t v = 0; v < phi.cols(); ++v)
            if (phi.at(i, v) < kPhiFloor)
                throw degenerate_component_error("pseudo weight below floor", i, v);
}

/// Geometric mean of each phi row.
std::vector<double> tilde_weights(const Tensor2& phi) {
    const std::size_t c = phi.rows(), v_count = phi.cols();
    std::vector<double> wt(c);
    for (std::size_t i = 0; i < c; ++i) {
        double log_sum = 0.0;
        for (std::size_t v = 0; v < v_count; ++v)
            log_sum += std::log(std::max(phi.at(i, v), kLogFloor));
        wt[i] = std::exp(log_sum / static_cast<double>(v_count));
    }
    return wt;
}

double floored_log(double x) { return std::log(std::max(x, kLogFloor)); }

struct CtcEvaluation {
    double cost = 0.0;
    std::vector<double> aux;        // mean_n t_i[n]/N_n
    std::vector<double> row_total;  // N_n per row
    std::vector<double> scale;      // w_tilde_i^(1-V)
    std::vector<double> w_tilde;
    double denom = 0.0;  // sum_i w_tilde_i
};

/// Shared evaluation of the (un)normalised cross-total-correlation cost for
/// a given pseudo-weight matrix (batch means or moving estimates).
CtcEvaluation evaluate_ctc(const BatchOutputs& outputs, const Tensor2& phi, bool normalized) {
    const std::size_t v_count = outputs.variate_count();
    const std::size_t c = phi.rows();
    const std::size_t n = outputs.rows();

    CtcEvaluation ev;
    ev.w_tilde = tilde_weights(phi);
    ev.scale.resize(c);
    for (std::size_t i = 0; i < c; ++i)
        ev.scale[i] = std::pow(ev.w_tilde[i], 1.0 - static_cast<double>(v_count));
    ev.denom = 0.0;
    for (double w : ev.w_tilde) ev.denom += w;

    ev.aux.assign(c, 0.0);
    ev.row_total.resize(n);
    const double log_denom = normalized ? floored_log(ev.denom) : 0.0;
    double cost_sum = 0.0;
    std::vector<double> t(c);
    for (std::size_t r = 0; r < n; ++r) {
        double total = 0.0;
        for (std::size_t i = 0; i < c; ++i) {
            double prod = ev.scale[i];
            for (std::size_t v = 0; v < v_count; ++v) prod *= outputs.beta[v].at(r, i);
            t[i] = prod;
            total += prod;
        }
        ev.row_total[r] = total;
        cost_sum += floored_log(total) - log_denom;
        const double inv_total = total > 0.0 ? 1.0 / total : 0.0;
        for (std::size_t i = 0; i < c; ++i) ev.aux[i] += t[i] * inv_total;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    ev.cost = -cost_sum * inv_n;
    for (double& a : ev.aux) a *= inv_n;
    return ev;
}

double ctc_cost_impl(const BatchOutputs& outputs, bool normalized) {
    outputs.validate();
    const Tensor2 phi = pseudo_weight_matrix(outputs);
    check_phi_floor(phi);
    return evaluate_ctc(outputs, phi, normalized).cost;
}

struct JointTable {
    std::vector<double> prob;              // flattened over class tuples
    std::vector<std::size_t> class_count;  // C_v per variate
    std::vector<std::size_t> stride;
};

bool next_tuple(std::vector<std::size_t>& idx, const std::vector<std::size_t>& counts) {
    for (std::size_t v = counts.size(); v-- > 0;) {
        if (++idx[v] < counts[v]) return true;
        idx[v] = 0;
    }
    return false;
}

JointTable joint_class_table(const BatchOutputs& outputs) {
    const std::size_t v_count = outputs.variate_count();
    const std::size_t n = outputs.rows();
    JointTable table;
    table.class_count.resize(v_count);
    std::size_t cells = 1;
    for (std::size_t v = 0; v < v_count; ++v) {
        table.class_count[v] = outputs.beta[v].cols();
        cells *= table.class_count[v];
    }
    table.stride.assign(v_count, 1);
    for (std::size_t v = v_count - 1; v-- > 0;)
        table.stride[v] = table.stride[v + 1] * table.class_count[v + 1];
    table.prob.assign(cells, 0.0);

    if (v_count == 2) {
        Tensor2 joint;
        matmul_tn(outputs.beta[0], outputs.beta[1], joint);
        table.prob = joint.data();
    } else {
        std::vector<std::size_t> idx(v_count);
        for (std::size_t r = 0; r < n; ++r) {
            std::fill(idx.begin(), idx.end(), 0);
            do {
                double prod = 1.0;
                std::size_t flat = 0;
                for (std::size_t v = 0; v < v_count; ++v) {
                    prod *= outputs.beta[v].at(r, idx[v]);
                    flat += idx[v] * table.stride[v];
                }
                table.prob[flat] += prod;
            } while (next_tuple(idx, table.class_count));
        }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (double& p : table.prob) p *= inv_n;
    return table;
}

double tc_cost_impl(const BatchOutputs& outputs) {
    outputs.validate();
    const std::size_t v_count = outputs.variate_count();
    const JointTable table = joint_class_table(outputs);
    // Per-variate marginal class probabilities.
    std::vector<std::vector<double>> q(v_count);
    for (std::size_t v = 0; v < v_count; ++v) q[v] = outputs.beta[v].column_means();

    double tc = 0.0;
    std::vector<std::size_t> idx(v_count, 0);
    std::size_t flat = 0;
    do {
        flat = 0;
        for (std::size_t v = 0; v < v_count; ++v) flat += idx[v] * table.stride[v];
        const double p = table.prob[flat];
        if (p < kPhiFloor) continue;  // 0 ln 0 := 0
        double log_q = 0.0;
        for (std::size_t v = 0; v < v_count; ++v) log_q += floored_log(q[v][idx[v]]);
        tc += p * (floored_log(p) - log_q);
    } while (next_tuple(idx, table.class_count));
    return -tc;
}

} // namespace

double neg_ctc_cost(const BatchOutputs& outputs) { return ctc_cost_impl(outputs, true); }

double neg_cmi_cost(const BatchOutputs& outputs) {
    require_bivariate(outputs, "neg_cmi_cost");
    return ctc_cost_impl(outputs, true);
}

double unnorm_neg_ctc_cost(const BatchOutputs& outputs) { return ctc_cost_impl(outputs, false); }

double unnorm_neg_cmi_cost(const BatchOutputs& outputs) {
    require_bivariate(outputs, "unnorm_neg_cmi_cost");
    return ctc_cost_impl(outputs, false);
}

double neg_tc_cost(const BatchOutputs& outputs) { return tc_cost_impl(outputs); }

double neg_mi_cost(const BatchOutputs& outputs) {
    require_bivariate(outputs, "neg_mi_cost");
    return tc_cost_impl(outputs);
}

double cross_entropy_supervised(const Tensor2& probs, std::span<const int> labels) {
    if (labels.size() != probs.rows())
        throw dimension_error("cross_entropy_supervised: label count mismatch");
    const int c = static_cast<int>(probs.cols());
    double sum = 0.0;
    for (std::size_t r = 0; r < probs.rows(); ++r) {
        const int label = labels[r];
        if (label < 0 || label >= c)
            throw invalid_input_error("cross_entropy_supervised: label out of range at row " +
                                      std::to_string(r));
        sum -= floored_log(probs.at(r, static_cast<std::size_t>(label)));
    }
    return sum / static_cast<double>(probs.rows());
}

double regularizer_term(std::span<const double> weights, const RegularizerConfig& cfg) {
    if (!std::isfinite(cfg.lambda)) throw invalid_input_error("regularizer: non-finite lambda");
    switch (cfg.kind) {
        case RegularizerKind::none:
            return 0.0;
        case RegularizerKind::tikhonov: {
            double s = 0.0;
            for (double w : weights) s += w * w;
            return -cfg.lambda * s;
        }
        case RegularizerKind::shannon: {
            double s = 0.0;
            for (double w : weights)
                if (w > 0.0) s += w * std::log(w);
            return cfg.lambda * s;
        }
        case RegularizerKind::known_weights: {
            if (cfg.target_weights.size() != weights.size())
                throw config_error("regularizer: known_weights requires target weights of "
                                   "matching length");
            double target_sum = 0.0;
            for (double t : cfg.target_weights) {
                if (t < 0.0) throw config_error("regularizer: negative target weight");
                target_sum += t;
            }
            if (std::abs(target_sum - 1.0) > 1e-9)
                throw config_error("regularizer: target weights must sum to 1");
            double s = 0.0;
            for (std::size_t i = 0; i < weights.size(); ++i) {
                if (cfg.target_weights[i] > 0.0 && weights[i] <= 0.0)
                    throw numeric_error("regularizer: known_weights diverges at component " +
                                        std::to_string(i));
                if (cfg.target_weights[i] > 0.0)
                    s += cfg.target_weights[i] * std::log(weights[i]);
            }
            return -cfg.lambda * s;
        }
    }
    return 0.0;
}

MovingEstimates make_moving_estimates(std::size_t components, std::size_t variates,
                                      double decay) {
    if (decay < 0.0 || decay >= 1.0)
        throw config_error("moving estimates: decay must lie in [0, 1)");
    MovingEstimates est;
    est.phi_hat = Tensor2(components, variates, 1.0 / static_cast<double>(components));
    est.aux.assign(components, 1.0 / static_cast<double>(components));
    est.decay = decay;
    return est;
}

namespace {

/// d(regularizer)/d(w_i) for the configured kind.
std::vector<double> regularizer_weight_gradient(std::span<const double> weights,
                                                const RegularizerConfig& cfg) {
    std::vector<double> g(weights.size(), 0.0);
    switch (cfg.kind) {
        case RegularizerKind::none:
            break;
        case RegularizerKind::tikhonov:
            for (std::size_t i = 0; i < weights.size(); ++i) g[i] = -2.0 * cfg.lambda * weights[i];
            break;
        case RegularizerKind::shannon:
            for (std::size_t i = 0; i < weights.size(); ++i)
                g[i] = cfg.lambda * (std::log(std::max(weights[i], kLogFloor)) + 1.0);
            break;
        case RegularizerKind::known_weights:
            for (std::size_t i = 0; i < weights.size(); ++i)
                g[i] = -cfg.lambda * cfg.target_weights[i] / std::max(weights[i], kLogFloor);
            break;
    }
    return g;
}

/// d(regularizer)/d(phi_iv) through w_i = wt_i / sum_j wt_j with
/// wt_i the geometric mean of phi over variates.
Tensor2 regularizer_phi_gradient(const Tensor2& phi, const std::vector<double>& w_tilde,
                                 double denom, const RegularizerConfig& cfg) {
    const std::size_t c = phi.rows(), v_count = phi.cols();
    std::vector<double> w(c);
    for (std::size_t i = 0; i < c; ++i) w[i] = w_tilde[i] / denom;
    const std::vector<double> dw = regularizer_weight_gradient(w, cfg);
    double mean_dw = 0.0;
    for (std::size_t i = 0; i < c; ++i) mean_dw += dw[i] * w[i];
    Tensor2 out(c, v_count);
    const double inv_v = 1.0 / static_cast<double>(v_count);
    for (std::size_t i = 0; i < c; ++i)
        for (std::size_t v = 0; v < v_count; ++v)
            out.at(i, v) = inv_v * (w[i] / phi.at(i, v)) * (dw[i] - mean_dw);
    return out;
}

/// Upstream matrices dcost/dbeta for the ctc family, using the supplied
/// (possibly moving) statistics in place of in-batch means.
std::vector<Tensor2> ctc_upstreams(const BatchOutputs& outputs, const Tensor2& phi,
                                   const CtcEvaluation& ev, bool normalized,
                                   const RegularizerConfig& reg) {
    const std::size_t v_count = outputs.variate_count();
    const std::size_t c = phi.rows();
    const std::size_t n = outputs.rows();
    const double inv_n = 1.0 / static_cast<double>(n);
    const double v_real = static_cast<double>(v_count);

    // Indirect contribution through the pseudo-weight estimates.
    Tensor2 indirect(c, v_count);
    for (std::size_t i = 0; i < c; ++i) {
        const double bracket = (v_real - 1.0) / v_real * ev.aux[i] +
                               (normalized ? (1.0 / v_real) * (ev.w_tilde[i] / ev.denom) : 0.0);
        for (std::size_t v = 0; v < v_count; ++v)
            indirect.at(i, v) = bracket / phi.at(i, v);
    }
    if (reg.kind != RegularizerKind::none) {
        const Tensor2 rg = regularizer_phi_gradient(phi, ev.w_tilde, ev.denom, reg);
        for (std::size_t i = 0; i < indirect.size(); ++i)
            indirect.data()[i] += rg.data()[i];
    }

    std::vector<Tensor2> upstream(v_count);
    for (std::size_t v = 0; v < v_count; ++v) upstream[v] = Tensor2(n, c);

    for (std::size_t r = 0; r < n; ++r) {
        const double inv_total = ev.row_total[r] > 0.0 ? 1.0 / ev.row_total[r] : 0.0;
        for (std::size_t i = 0; i < c; ++i) {
            for (std::size_t v = 0; v < v_count; ++v) {
                // Leave-one-out product keeps the derivative finite when a
                // beta entry underflows to zero.
                double loo = ev.scale[i];
                for (std::size_t u = 0; u < v_count; ++u)
                    if (u != v) loo *= outputs.beta[u].at(r, i);
                upstream[v].at(r, i) =
                    inv_n * (-loo * inv_total + indirect.at(i, v));
            }
        }
    }
    return upstream;
}

/// Upstream matrices for the multi-label total-correlation cost.
std::vector<Tensor2> tc_upstreams(const BatchOutputs& outputs) {
    const std::size_t v_count = outputs.variate_count();
    const std::size_t n = outputs.rows();
    const double inv_n = 1.0 / static_cast<double>(n);

    const JointTable table = joint_class_table(outputs);
    std::vector<std::vector<double>> q(v_count);
    for (std::size_t v = 0; v < v_count; ++v) q[v] = outputs.beta[v].column_means();

    // dcost/dP per cell; cells below the floor are frozen at zero.
    std::vector<double> cell_grad(table.prob.size(), 0.0);
    std::vector<std::size_t> idx(v_count, 0);
    do {
        std::size_t flat = 0;
        for (std::size_t v = 0; v < v_count; ++v) flat += idx[v] * table.stride[v];
        const double p = table.prob[flat];
        if (p < kPhiFloor) continue;
        double log_q = 0.0;
        for (std::size_t v = 0; v < v_count; ++v) log_q += floored_log(q[v][idx[v]]);
        cell_grad[flat] = -(floored_log(p) - log_q + 1.0);
    } while (next_tuple(idx, table.class_count));

    // dcost/dq per (variate, class): sum of P over cells with that class.
    std::vector<std::vector<double>> q_grad(v_count);
    for (std::size_t v = 0; v < v_count; ++v) q_grad[v].assign(table.class_count[v], 0.0);
    std::fill(idx.begin(), idx.end(), 0);
    do {
        std::size_t flat = 0;
        for (std::size_t v = 0; v < v_count; ++v) flat += idx[v] * table.stride[v];
        const double p = table.prob[flat];
        if (p < kPhiFloor) continue;
        for (std::size_t v = 0; v < v_count; ++v)
            q_grad[v][idx[v]] += p / std::max(q[v][idx[v]], kLogFloor);
    } while (next_tuple(idx, table.class_count));

    std::vector<Tensor2> upstream(v_count);
    for (std::size_t v = 0; v < v_count; ++v)
        upstream[v] = Tensor2(n, table.class_count[v]);

    if (v_count == 2) {
        Tensor2 w(table.class_count[0], table.class_count[1], cell_grad);
        Tensor2 ux, uy;
        matmul_nt(outputs.beta[1], w, ux);  // N×C_x
        matmul_nn(outputs.beta[0], w, uy);  // N×C_y
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t i = 0; i < table.class_count[0]; ++i)
                upstream[0].at(r, i) = inv_n * (ux.at(r, i) + q_grad[0][i]);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t j = 0; j < table.class_count[1]; ++j)
                upstream[1].at(r, j) = inv_n * (uy.at(r, j) + q_grad[1][j]);
        return upstream;
    }

    for (std::size_t r = 0; r < n; ++r) {
        std::fill(idx.begin(), idx.end(), 0);
        do {
            std::size_t flat = 0;
            double prod = 1.0;
            for (std::size_t v = 0; v < v_count; ++v) {
                flat += idx[v] * table.stride[v];
                prod *= outputs.beta[v].at(r, idx[v]);
            }
            const double g = cell_grad[flat];
            if (g == 0.0) continue;
            for (std::size_t v = 0; v < v_count; ++v) {
                const double b = outputs.beta[v].at(r, idx[v]);
                double loo = 1.0;
                if (b > 0.0) {
                    loo = prod / b;
                } else {
                    for (std::size_t u = 0; u < v_count; ++u)
                        if (u != v) loo *= outputs.beta[u].at(r, idx[u]);
                }
                upstream[v].at(r, idx[v]) += inv_n * g * loo;
            }
        } while (next_tuple(idx, table.class_count));
        for (std::size_t v = 0; v < v_count; ++v)
            for (std::size_t j = 0; j < table.class_count[v]; ++j)
                upstream[v].at(r, j) += inv_n * q_grad[v][j];
    }
    return upstream;
}

BatchOutputs forward_all(const InClassNet& net, const std::vector<Tensor2>& batches) {
    if (batches.size() != net.variate_count())
        throw dimension_error("cost: batch count differs from variate count");
    BatchOutputs outputs;
    outputs.beta.reserve(batches.size());
    for (std::size_t v = 0; v < batches.size(); ++v)
        outputs.beta.push_back(net.eval(v, batches[v]));
    outputs.validate();
    return outputs;
}

CostGradients backprop_upstreams(const InClassNet& net, const std::vector<Tensor2>& batches,
                                 const std::vector<Tensor2>& upstreams, double cost) {
    CostGradients result;
    result.cost = cost;
    result.paramset_grads.resize(net.paramset_count());
    for (std::size_t k = 0; k < net.paramset_count(); ++k)
        result.paramset_grads[k].assign(net.paramset(k).parameter_count(), 0.0);
    for (std::size_t v = 0; v < batches.size(); ++v) {
        const std::vector<double> g = net.classifier(v).backward(batches[v], upstreams[v]);
        std::vector<double>& acc = result.paramset_grads[net.paramset_of(v)];
        for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i];
    }
    return result;
}

void check_arity(const InClassNet& net, CostKind kind) {
    if ((kind == CostKind::neg_cmi || kind == CostKind::unnorm_neg_cmi ||
         kind == CostKind::neg_mi) &&
        net.variate_count() != 2)
        throw dimension_error(std::string(cost_kind_name(kind)) + ": requires two variates");
    if (is_ctc_family(kind)) net.components();  // throws when class counts differ
}

} // namespace

double cost_value(const InClassNet& net, const std::vector<Tensor2>& batches, CostKind kind,
                  const RegularizerConfig& reg) {
    check_arity(net, kind);
    const BatchOutputs outputs = forward_all(net, batches);
    double cost = 0.0;
    switch (kind) {
        case CostKind::neg_ctc: cost = neg_ctc_cost(outputs); break;
        case CostKind::neg_cmi: cost = neg_cmi_cost(outputs); break;
        case CostKind::unnorm_neg_ctc: cost = unnorm_neg_ctc_cost(outputs); break;
        case CostKind::unnorm_neg_cmi: cost = unnorm_neg_cmi_cost(outputs); break;
        case CostKind::neg_tc: cost = neg_tc_cost(outputs); break;
        case CostKind::neg_mi: cost = neg_mi_cost(outputs); break;
    }
    if (reg.kind != RegularizerKind::none) {
        if (!is_ctc_family(kind))
            throw config_error("regularizer: only defined for the neg_ctc cost family");
        const Tensor2 phi = pseudo_weight_matrix(outputs);
        const std::vector<double> wt = tilde_weights(phi);
        double denom = 0.0;
        for (double w : wt) denom += w;
        std::vector<double> weights(wt.size());
        for (std::size_t i = 0; i < wt.size(); ++i) weights[i] = wt[i] / denom;
        cost += regularizer_term(weights, reg);
    }
    return cost;
}

CostGradients cost_gradient_batch(const InClassNet& net, const std::vector<Tensor2>& batches,
                                  CostKind kind, const RegularizerConfig& reg) {
    check_arity(net, kind);
    const BatchOutputs outputs = forward_all(net, batches);

    if (kind == CostKind::neg_tc || kind == CostKind::neg_mi) {
        if (reg.kind != RegularizerKind::none)
            throw config_error("regularizer: only defined for the neg_ctc cost family");
        const double cost = tc_cost_impl(outputs);
        return backprop_upstreams(net, batches, tc_upstreams(outputs), cost);
    }

    const bool normalized = is_normalized(kind);
    const Tensor2 phi = pseudo_weight_matrix(outputs);
    check_phi_floor(phi);
    const CtcEvaluation ev = evaluate_ctc(outputs, phi, normalized);
    double cost = ev.cost;
    if (reg.kind != RegularizerKind::none) {
        std::vector<double> weights(ev.w_tilde.size());
        for (std::size_t i = 0; i < weights.size(); ++i) weights[i] = ev.w_tilde[i] / ev.denom;
        cost += regularizer_term(weights, reg);
    }
    return backprop_upstreams(net, batches, ctc_upstreams(outputs, phi, ev, normalized, reg),
                              cost);
}

CostGradients cost_gradient_moving(const InClassNet& net, const std::vector<Tensor2>& batches,
                                   MovingEstimates& est, CostKind kind,
                                   const RegularizerConfig& reg) {
    if (!is_ctc_family(kind))
        throw config_error("moving-estimate gradients: only defined for the neg_ctc cost family");
    check_arity(net, kind);
    const BatchOutputs outputs = forward_all(net, batches);
    const std::size_t c = net.components();
    const std::size_t v_count = net.variate_count();
    if (est.phi_hat.rows() != c || est.phi_hat.cols() != v_count)
        throw dimension_error("moving estimates: shape mismatch with network");

    // Fold the minibatch means into the moving pseudo weights first, then
    // differentiate with the moving values substituted for the in-batch
    // means. At decay 0 this reproduces the exact batch gradient.
    const Tensor2 phi_batch = pseudo_weight_matrix(outputs);
    for (std::size_t i = 0; i < c; ++i)
        for (std::size_t v = 0; v < v_count; ++v)
            est.phi_hat.at(i, v) =
                est.decay * est.phi_hat.at(i, v) + (1.0 - est.decay) * phi_batch.at(i, v);
    check_phi_floor(est.phi_hat);

    const bool normalized = is_normalized(kind);
    CtcEvaluation ev = evaluate_ctc(outputs, est.phi_hat, normalized);
    for (std::size_t i = 0; i < c; ++i)
        est.aux[i] = est.decay * est.aux[i] + (1.0 - est.decay) * ev.aux[i];
    ev.aux = est.aux;

    double cost = ev.cost;
    if (reg.kind != RegularizerKind::none) {
        std::vector<double> weights(ev.w_tilde.size());
        for (std::size_t i = 0; i < weights.size(); ++i) weights[i] = ev.w_tilde[i] / ev.denom;
        cost += regularizer_term(weights, reg);
    }
    return backprop_upstreams(net, batches,
                              ctc_upstreams(outputs, est.phi_hat, ev, normalized, reg), cost);
}

} // namespace inclass
