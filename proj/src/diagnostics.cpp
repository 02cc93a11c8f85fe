#include "inclass/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "inclass/costs.hpp"
#include "inclass/nn.hpp"
#include "inclass/rng.hpp"

namespace inclass {

namespace {

double upper_quantile(std::vector<double>& values, double q) {
    if (values.empty()) return 0.0;
    std::size_t k = static_cast<std::size_t>(std::floor(q * static_cast<double>(values.size())));
    if (k >= values.size()) k = values.size() - 1;
    std::nth_element(values.begin(), values.begin() + k, values.end());
    return values[k];
}

void check_quantile_inputs(const Dataset& data, const VariateClassifier& clf, double q,
                           double tau) {
    data.validate();
    if (data.variate_count() != clf.variate_count())
        throw dimension_error("diagnostics: dataset/classifier variate count mismatch");
    if (q <= 0.0 || q >= 1.0) throw config_error("diagnostics: quantile must lie in (0, 1)");
    if (tau < 0.0 || tau >= 1.0) throw config_error("diagnostics: tau must lie in [0, 1)");
}

} // namespace

DiagnosticsReport check_sufficient(const VariateClassifier& clf, const Dataset& data, double q,
                                   double tau) {
    check_quantile_inputs(data, clf, q, tau);
    const std::size_t v_count = clf.variate_count();
    const std::size_t c = clf.class_count(0);

    DiagnosticsReport report;
    report.q = q;
    report.tau = tau;
    report.mu = Tensor2(c, v_count);
    double min_mu = 1.0;
    for (std::size_t v = 0; v < v_count; ++v) {
        const Tensor2 alpha = clf.eval(v, data.variates[v]);
        for (std::size_t i = 0; i < c; ++i) {
            std::vector<double> column = alpha.column(i);
            const double mu = upper_quantile(column, q);
            report.mu.at(i, v) = mu;
            min_mu = std::min(min_mu, mu);
        }
    }
    report.sufficient_margin = min_mu - (1.0 - tau);
    report.sufficient_ok = report.sufficient_margin >= 0.0;
    return report;
}

DiagnosticsReport check_necessary(const VariateClassifier& clf, const Dataset& data, double q,
                                  double tau) {
    check_quantile_inputs(data, clf, q, tau);
    const std::size_t v_count = clf.variate_count();
    const std::size_t c = clf.class_count(0);

    DiagnosticsReport report;
    report.q = q;
    report.tau = tau;
    report.pairwise_mu.assign(v_count, Tensor2(c, c));
    double min_mu = 1.0;
    for (std::size_t v = 0; v < v_count; ++v) {
        const Tensor2 alpha = clf.eval(v, data.variates[v]);
        for (std::size_t i = 0; i < c; ++i) {
            for (std::size_t j = 0; j < c; ++j) {
                if (i == j) continue;
                std::vector<double> ratio;
                ratio.reserve(alpha.rows());
                for (std::size_t r = 0; r < alpha.rows(); ++r) {
                    const double ai = alpha.at(r, i);
                    const double aj = alpha.at(r, j);
                    if (ai + aj <= 0.0) continue;  // measure-zero convention
                    ratio.push_back(ai / (ai + aj));
                }
                const double mu = upper_quantile(ratio, q);
                report.pairwise_mu[v].at(i, j) = mu;
                min_mu = std::min(min_mu, mu);
            }
        }
    }
    report.necessary_margin = min_mu - (1.0 - tau);
    report.necessary_ok = report.necessary_margin >= 0.0;
    return report;
}

DiagnosticsReport check_identifiability(const VariateClassifier& clf, const Dataset& data,
                                        double q, double tau) {
    DiagnosticsReport report = check_sufficient(clf, data, q, tau);
    DiagnosticsReport necessary = check_necessary(clf, data, q, tau);
    report.pairwise_mu = std::move(necessary.pairwise_mu);
    report.necessary_ok = necessary.necessary_ok;
    report.necessary_margin = necessary.necessary_margin;
    return report;
}

double total_correlation_direct(const Dataset& data, std::size_t bins) {
    data.validate();
    if (bins < 2) throw config_error("total correlation: need at least two bins");
    const std::size_t v_count = data.variate_count();
    for (std::size_t v = 0; v < v_count; ++v)
        if (data.variates[v].cols() != 1)
            throw config_error("total correlation: variates must be one-dimensional");
    double cells = 1.0;
    for (std::size_t v = 0; v < v_count; ++v) cells *= static_cast<double>(bins);
    if (cells > 67108864.0)
        throw config_error("total correlation: joint table too large (" +
                           std::to_string(v_count) + " variates x " + std::to_string(bins) +
                           " bins)");

    const std::size_t n = data.rows();
    std::vector<double> lo(v_count), width(v_count);
    for (std::size_t v = 0; v < v_count; ++v) {
        const auto& col = data.variates[v];
        double mn = col.at(0, 0), mx = col.at(0, 0);
        for (std::size_t r = 1; r < n; ++r) {
            mn = std::min(mn, col.at(r, 0));
            mx = std::max(mx, col.at(r, 0));
        }
        lo[v] = mn;
        width[v] = (mx - mn) > 0.0 ? (mx - mn) / static_cast<double>(bins) : 1.0;
    }

    const std::size_t table_size = static_cast<std::size_t>(cells);
    std::vector<double> joint(table_size, 0.0);
    std::vector<std::vector<double>> marg(v_count, std::vector<double>(bins, 0.0));
    for (std::size_t r = 0; r < n; ++r) {
        std::size_t flat = 0;
        for (std::size_t v = 0; v < v_count; ++v) {
            std::size_t b = static_cast<std::size_t>(
                (data.variates[v].at(r, 0) - lo[v]) / width[v]);
            if (b >= bins) b = bins - 1;
            marg[v][b] += 1.0;
            flat = flat * bins + b;
        }
        joint[flat] += 1.0;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (auto& m : marg)
        for (double& x : m) x *= inv_n;

    double tc = 0.0;
    std::vector<std::size_t> idx(v_count, 0);
    for (std::size_t flat = 0; flat < table_size; ++flat) {
        const double p = joint[flat] * inv_n;
        if (p > 0.0) {
            double log_prod = 0.0;
            std::size_t rest = flat;
            for (std::size_t v = v_count; v-- > 0;) {
                log_prod += std::log(marg[v][rest % bins]);
                rest /= bins;
            }
            tc += p * (std::log(p) - log_prod);
        }
    }
    return tc;
}

double total_correlation_classifier(const Dataset& data, const TCClassifierConfig& cfg) {
    data.validate();
    const std::size_t n = data.rows();
    const std::size_t v_count = data.variate_count();
    std::size_t dim = 0;
    for (std::size_t v = 0; v < v_count; ++v) dim += data.variates[v].cols();

    // Joint rows, followed by rows with every variate independently
    // resampled (a per-variate permutation of the same sample).
    Tensor2 stacked(2 * n, dim);
    SplitMix64 rng(derive_seed(cfg.seed, 0x74636373));
    std::vector<std::size_t> perm(n);
    std::size_t col0 = 0;
    for (std::size_t v = 0; v < v_count; ++v) {
        const Tensor2& src = data.variates[v];
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.next_index(i)]);
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t d = 0; d < src.cols(); ++d) {
                stacked.at(r, col0 + d) = src.at(r, d);
                stacked.at(n + r, col0 + d) = src.at(perm[r], d);
            }
        }
        col0 += src.cols();
    }

    SplitMix64 init_rng(derive_seed(cfg.seed, 0x74636e6e));
    MLPClassifier disc(dim, cfg.hidden, 2, init_rng);
    {
        // Standardise the discriminator inputs as the trainer does.
        std::vector<double> shift(dim, 0.0), scale(dim, 1.0);
        for (std::size_t c = 0; c < dim; ++c) {
            double sum = 0.0, sum_sq = 0.0;
            for (std::size_t r = 0; r < stacked.rows(); ++r) {
                sum += stacked.at(r, c);
                sum_sq += stacked.at(r, c) * stacked.at(r, c);
            }
            shift[c] = sum / static_cast<double>(stacked.rows());
            const double var =
                sum_sq / static_cast<double>(stacked.rows()) - shift[c] * shift[c];
            scale[c] = var > 1e-24 ? 1.0 / std::sqrt(var) : 1.0;
        }
        disc.set_input_transform(std::move(shift), std::move(scale));
    }
    AdamState opt = AdamState::for_parameter_count(disc.parameter_count(), cfg.lr);

    std::vector<std::size_t> order(2 * n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    SplitMix64 shuffle_rng(derive_seed(cfg.seed, 0x74637368));
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.next_index(i)]);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t count = std::min(cfg.batch_size, order.size() - start);
            const std::span<const std::size_t> slice(order.data() + start, count);
            const Tensor2 batch = stacked.gather_rows(slice);
            const Tensor2 probs = disc.forward(batch);
            Tensor2 upstream(count, 2);
            const double inv = 1.0 / static_cast<double>(count);
            for (std::size_t r = 0; r < count; ++r) {
                const std::size_t label = slice[r] < n ? 1 : 0;
                const double p = probs.at(r, label);
                if (p > kLogFloor) upstream.at(r, label) = -inv / p;
            }
            std::vector<double> grad = disc.backward(batch, upstream);
            for (double g : grad)
                if (!std::isfinite(g))
                    throw estimator_error("total correlation classifier: training diverged");
            std::vector<double> params = disc.get_parameters();
            if (cfg.weight_decay > 0.0)
                for (std::size_t i = 0; i < grad.size(); ++i)
                    grad[i] += cfg.weight_decay * params[i];
            adam_step(opt, params, grad);
            disc.set_parameters(params);
        }
    }

    // Self-normalised likelihood-ratio readout: mean log odds over the joint
    // rows, re-centred by ln E_Q[odds] so a common logit offset (and unequal
    // class priors) cancels. For the ideal discriminator E_Q[odds] = 1.
    double kl_raw = 0.0;
    double q_ratio_sum = 0.0;
    for (std::size_t start = 0; start < 2 * n; start += 4096) {
        const std::size_t count = std::min<std::size_t>(4096, 2 * n - start);
        std::vector<std::size_t> rows(count);
        std::iota(rows.begin(), rows.end(), start);
        const Tensor2 probs = disc.forward(stacked.gather_rows(rows));
        for (std::size_t r = 0; r < count; ++r) {
            const double p1 = std::max(probs.at(r, 1), kLogFloor);
            const double p0 = std::max(probs.at(r, 0), kLogFloor);
            if (start + r < n)
                kl_raw += std::log(p1 / p0);
            else
                q_ratio_sum += p1 / p0;
        }
    }
    const double kl =
        kl_raw / static_cast<double>(n) - std::log(q_ratio_sum / static_cast<double>(n));
    if (!std::isfinite(kl))
        throw estimator_error("total correlation classifier: non-finite estimate");
    return kl;
}

MatchResult match_components(const Tensor2& aggregate_probs, std::span<const int> true_labels,
                             std::span<const double> learned_weights,
                             std::span<const double> true_weights) {
    const std::size_t c = aggregate_probs.cols();
    if (true_labels.size() != aggregate_probs.rows())
        throw dimension_error("match_components: label count mismatch");
    if (learned_weights.size() != c || true_weights.size() != c)
        throw dimension_error("match_components: weight vectors must have length C");

    // mean_prob[i][k]: mean aggregate probability of learned component k on
    // rows whose true label is i.
    Tensor2 mean_prob(c, c, 0.0);
    std::vector<double> counts(c, 0.0);
    for (std::size_t r = 0; r < aggregate_probs.rows(); ++r) {
        const int label = true_labels[r];
        if (label < 0 || static_cast<std::size_t>(label) >= c)
            throw invalid_input_error("match_components: label out of range");
        counts[static_cast<std::size_t>(label)] += 1.0;
        for (std::size_t k = 0; k < c; ++k)
            mean_prob.at(static_cast<std::size_t>(label), k) += aggregate_probs.at(r, k);
    }
    for (std::size_t i = 0; i < c; ++i)
        if (counts[i] > 0.0)
            for (std::size_t k = 0; k < c; ++k) mean_prob.at(i, k) /= counts[i];

    MatchResult result;
    result.sigma.resize(c);
    if (c <= 8) {
        std::vector<std::size_t> perm(c);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        double best = -1.0;
        std::vector<std::size_t> best_perm = perm;
        do {
            double score = 0.0;
            for (std::size_t i = 0; i < c; ++i) score += mean_prob.at(i, perm[i]);
            if (score > best) {
                best = score;
                best_perm = perm;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
        result.sigma = best_perm;
        result.exact = true;
    } else {
        // Greedy: repeatedly take the best remaining (true, learned) pair.
        result.exact = false;
        std::vector<bool> used_true(c, false), used_learned(c, false);
        for (std::size_t step = 0; step < c; ++step) {
            double best = -1.0;
            std::size_t bi = 0, bk = 0;
            for (std::size_t i = 0; i < c; ++i) {
                if (used_true[i]) continue;
                for (std::size_t k = 0; k < c; ++k) {
                    if (used_learned[k]) continue;
                    if (mean_prob.at(i, k) > best) {
                        best = mean_prob.at(i, k);
                        bi = i;
                        bk = k;
                    }
                }
            }
            used_true[bi] = used_learned[bk] = true;
            result.sigma[bi] = bk;
        }
    }
    result.agreement.resize(c);
    result.weight_error = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
        result.agreement[i] = mean_prob.at(i, result.sigma[i]);
        result.weight_error =
            std::max(result.weight_error,
                     std::abs(true_weights[i] - learned_weights[result.sigma[i]]));
    }
    return result;
}

double ConfusionMatrix::mean_diagonal() const {
    double sum = 0.0;
    std::size_t defined = 0;
    for (std::size_t i = 0; i < mean_prob.rows(); ++i) {
        if (!row_defined[i]) continue;
        sum += mean_prob.at(i, i);
        ++defined;
    }
    return defined > 0 ? sum / static_cast<double>(defined) : 0.0;
}

ConfusionMatrix confusion_matrix(const Tensor2& predictions, std::span<const int> labels,
                                 std::size_t classes) {
    if (labels.size() != predictions.rows())
        throw dimension_error("confusion_matrix: label count mismatch");
    if (predictions.cols() != classes)
        throw dimension_error("confusion_matrix: prediction width differs from class count");
    ConfusionMatrix cm;
    cm.mean_prob = Tensor2(classes, classes, 0.0);
    cm.row_defined.assign(classes, false);
    std::vector<double> counts(classes, 0.0);
    for (std::size_t r = 0; r < predictions.rows(); ++r) {
        const int label = labels[r];
        if (label < 0 || static_cast<std::size_t>(label) >= classes)
            throw invalid_input_error("confusion_matrix: label out of range");
        counts[static_cast<std::size_t>(label)] += 1.0;
        for (std::size_t k = 0; k < classes; ++k)
            cm.mean_prob.at(static_cast<std::size_t>(label), k) += predictions.at(r, k);
    }
    for (std::size_t i = 0; i < classes; ++i) {
        if (counts[i] > 0.0) {
            cm.row_defined[i] = true;
            for (std::size_t k = 0; k < classes; ++k) cm.mean_prob.at(i, k) /= counts[i];
        }
    }
    return cm;
}

} // namespace inclass
