#include "inclass/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "inclass/rng.hpp"

namespace inclass {

double TrainResult::best_cost() const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& rec : log) best = std::min(best, rec.mean_cost);
    return best;
}

namespace {

void validate_train_inputs(const InClassNet& net, const Dataset& data, const TrainConfig& cfg) {
    data.validate();
    if (data.variate_count() != net.variate_count())
        throw config_error("train: dataset has " + std::to_string(data.variate_count()) +
                           " variates, network expects " + std::to_string(net.variate_count()));
    for (std::size_t v = 0; v < data.variate_count(); ++v)
        if (data.variates[v].cols() != net.variate_dim(v))
            throw config_error("train: variate " + std::to_string(v) + " width mismatch");
    if (cfg.batch_size == 0) throw config_error("train: batch_size must be positive");
    if (cfg.gradient_mode == GradientMode::batch && cfg.batch_size < cfg.min_batch_for_means)
        throw config_error("train: batch_size below min_batch_for_means in batch-gradient mode");
    if ((cfg.cost == CostKind::neg_cmi || cfg.cost == CostKind::unnorm_neg_cmi ||
         cfg.cost == CostKind::neg_mi) &&
        net.variate_count() != 2)
        throw config_error("train: bivariate cost with " +
                           std::to_string(net.variate_count()) + " variates");
}

void shuffle_indices(std::vector<std::size_t>& index, SplitMix64& rng) {
    for (std::size_t i = index.size(); i > 1; --i)
        std::swap(index[i - 1], index[rng.next_index(i)]);
}

/// Fits each parameter set's standardising input transform from the rows of
/// every matrix feeding it. Parameter sets that already carry a transform
/// (resumed checkpoints, pretrained nets) are left untouched.
void standardize_net_inputs(InClassNet& net,
                            const std::vector<std::pair<const Tensor2*, std::size_t>>& feeds) {
    for (std::size_t k = 0; k < net.paramset_count(); ++k) {
        if (net.paramset(k).has_input_transform()) continue;
        const std::size_t dim = net.paramset(k).input_dim();
        std::vector<double> sum(dim, 0.0), sum_sq(dim, 0.0);
        std::size_t rows = 0;
        for (const auto& [matrix, paramset] : feeds) {
            if (paramset != k) continue;
            for (std::size_t r = 0; r < matrix->rows(); ++r) {
                const double* p = matrix->row_ptr(r);
                for (std::size_t c = 0; c < dim; ++c) {
                    sum[c] += p[c];
                    sum_sq[c] += p[c] * p[c];
                }
            }
            rows += matrix->rows();
        }
        if (rows == 0) continue;
        std::vector<double> shift(dim), scale(dim);
        for (std::size_t c = 0; c < dim; ++c) {
            shift[c] = sum[c] / static_cast<double>(rows);
            const double var = sum_sq[c] / static_cast<double>(rows) - shift[c] * shift[c];
            scale[c] = var > 1e-24 ? 1.0 / std::sqrt(var) : 1.0;
        }
        net.paramset(k).set_input_transform(std::move(shift), std::move(scale));
    }
}

double global_grad_norm(const std::vector<std::vector<double>>& grads) {
    double sq = 0.0;
    for (const auto& g : grads)
        for (double x : g) sq += x * x;
    return std::sqrt(sq);
}

std::string state_dump(const InClassNet& net, const CostGradients& cg) {
    std::string s = "cost=" + std::to_string(cg.cost);
    for (std::size_t k = 0; k < cg.paramset_grads.size(); ++k) {
        double norm = 0.0;
        for (double x : cg.paramset_grads[k]) norm += x * x;
        s += " |g" + std::to_string(k) + "|=" + std::to_string(std::sqrt(norm));
    }
    s += " params=" + std::to_string(net.parameter_count());
    return s;
}

} // namespace

TrainResult train(InClassNet& net, const Dataset& data, const TrainConfig& cfg) {
    validate_train_inputs(net, data, cfg);
    const std::size_t n = data.rows();
    const std::size_t v_count = net.variate_count();

    if (cfg.standardize_inputs && cfg.epochs > 0) {
        std::vector<std::pair<const Tensor2*, std::size_t>> feeds;
        for (std::size_t v = 0; v < v_count; ++v)
            feeds.emplace_back(&data.variates[v], net.paramset_of(v));
        standardize_net_inputs(net, feeds);
    }

    std::vector<AdamState> opt(net.paramset_count());
    for (std::size_t k = 0; k < net.paramset_count(); ++k) {
        opt[k] = AdamState::for_parameter_count(net.paramset(k).parameter_count(), cfg.lr);
        opt[k].beta1 = cfg.adam_beta1;
        opt[k].beta2 = cfg.adam_beta2;
        opt[k].epsilon = cfg.adam_epsilon;
    }

    MovingEstimates est;
    if (cfg.gradient_mode == GradientMode::moving)
        est = make_moving_estimates(net.components(), v_count, cfg.moving_decay);

    SplitMix64 shuffle_rng(derive_seed(cfg.seed, 0x73687566));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainResult result;
    result.log.reserve(cfg.epochs);
    std::vector<Tensor2> batch(v_count);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        if (cfg.shuffle) shuffle_indices(order, shuffle_rng);

        double cost_sum = 0.0;
        std::size_t rows_seen = 0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size, ++batch_index) {
            const std::size_t count = std::min(cfg.batch_size, n - start);
            // A trailing batch too small to estimate the in-batch means is
            // dropped in batch-gradient mode.
            if (cfg.gradient_mode == GradientMode::batch && count < cfg.min_batch_for_means)
                break;
            const std::span<const std::size_t> slice(order.data() + start, count);
            for (std::size_t v = 0; v < v_count; ++v)
                batch[v] = data.variates[v].gather_rows(slice);

            CostGradients cg;
            try {
                cg = cfg.gradient_mode == GradientMode::batch
                         ? cost_gradient_batch(net, batch, cfg.cost, cfg.regularizer)
                         : cost_gradient_moving(net, batch, est, cfg.cost, cfg.regularizer);
            } catch (const degenerate_component_error& e) {
                const std::string context = "epoch " + std::to_string(epoch) + " batch " +
                                            std::to_string(batch_index) + ": " + e.what();
                if (!cfg.stop_on_collapse)
                    throw degenerate_component_error(context, e.component(), e.variate());
                result.collapsed = true;
                result.collapse_context = context;
                if (rows_seen > 0) {
                    EpochRecord rec;
                    rec.epoch = epoch;
                    rec.mean_cost = cost_sum / static_cast<double>(rows_seen);
                    rec.wall_seconds = std::chrono::duration<double>(
                                           std::chrono::steady_clock::now() - t0)
                                           .count();
                    result.log.push_back(rec);
                }
                return result;
            }
            if (!std::isfinite(cg.cost))
                throw numeric_error("train: non-finite cost at epoch " + std::to_string(epoch) +
                                    " batch " + std::to_string(batch_index) + "; " +
                                    state_dump(net, cg));

            if (cfg.clip_norm > 0.0) {
                const double norm = global_grad_norm(cg.paramset_grads);
                if (norm > cfg.clip_norm) {
                    const double scale = cfg.clip_norm / norm;
                    for (auto& g : cg.paramset_grads)
                        for (double& x : g) x *= scale;
                }
            }
            for (std::size_t k = 0; k < net.paramset_count(); ++k) {
                std::vector<double> params = net.paramset(k).get_parameters();
                adam_step(opt[k], params, cg.paramset_grads[k]);
                net.paramset(k).set_parameters(params);
            }
            cost_sum += cg.cost * static_cast<double>(count);
            rows_seen += count;
        }

        const auto t1 = std::chrono::steady_clock::now();
        EpochRecord rec;
        rec.epoch = epoch;
        rec.mean_cost = rows_seen > 0 ? cost_sum / static_cast<double>(rows_seen) : 0.0;
        rec.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
        result.log.push_back(rec);
    }
    return result;
}

RestartResult train_with_restarts(const NetSpec& spec, const Dataset& data,
                                  const TrainConfig& cfg) {
    if (cfg.restarts == 0) throw config_error("train: restarts must be at least 1");
    RestartResult best;
    double best_cost = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < cfg.restarts; ++r) {
        TrainConfig run_cfg = cfg;
        run_cfg.seed = r == 0 ? cfg.seed : derive_seed(cfg.seed, r);
        InClassNet net = build_inclass_net(spec, run_cfg.seed);
        TrainResult res = train(net, data, run_cfg);
        const double cost = res.best_cost();
        if (r == 0 || cost < best_cost) {
            best_cost = cost;
            best.net = std::move(net);
            best.result = std::move(res);
            best.chosen_restart = r;
        }
    }
    return best;
}

void pretrain_supervised(InClassNet& net, const Dataset& labeled, double noise,
                         std::size_t epochs, std::size_t batch_size, std::uint64_t seed) {
    if (!labeled.labels) throw config_error("pretrain: labelled data required");
    if (noise < 0.0 || noise > 1.0) throw config_error("pretrain: noise must lie in [0, 1]");
    if (batch_size == 0) throw config_error("pretrain: batch_size must be positive");
    labeled.validate();

    // Map each data matrix to the parameter sets it trains.
    struct Feed {
        const Tensor2* items;
        std::size_t paramset;
    };
    std::vector<Feed> feeds;
    if (labeled.variate_count() == net.variate_count()) {
        // Each variate's items train its classifier; a shared parameter set
        // accumulates gradients from all of its variates, as in train().
        for (std::size_t v = 0; v < net.variate_count(); ++v) {
            if (labeled.variates[v].cols() != net.variate_dim(v))
                throw config_error("pretrain: variate " + std::to_string(v) + " width mismatch");
            feeds.push_back({&labeled.variates[v], net.paramset_of(v)});
        }
    } else if (labeled.variate_count() == 1) {
        for (std::size_t k = 0; k < net.paramset_count(); ++k) {
            if (net.paramset(k).input_dim() != labeled.variates[0].cols())
                throw config_error("pretrain: item width does not match parameter set " +
                                   std::to_string(k));
            feeds.push_back({&labeled.variates[0], k});
        }
    } else {
        throw config_error("pretrain: labelled data must carry one matrix or one per variate");
    }

    if (epochs == 0) return;  // bitwise no-op by contract

    {
        std::vector<std::pair<const Tensor2*, std::size_t>> stat_feeds;
        for (const Feed& feed : feeds) stat_feeds.emplace_back(feed.items, feed.paramset);
        standardize_net_inputs(net, stat_feeds);
    }

    const std::size_t n = labeled.rows();
    const int c = static_cast<int>(net.components());

    // Noisy labels are drawn once, before any training.
    SplitMix64 label_rng(derive_seed(seed, 0x6c61626c));
    std::vector<int> labels(n);
    for (std::size_t r = 0; r < n; ++r) {
        const int truth = (*labeled.labels)[r];
        if (truth < 0 || truth >= c)
            throw config_error("pretrain: label out of range at row " + std::to_string(r));
        if (label_rng.next_double() < noise && c > 1) {
            int flipped = static_cast<int>(label_rng.next_index(static_cast<std::size_t>(c - 1)));
            if (flipped >= truth) ++flipped;
            labels[r] = flipped;
        } else {
            labels[r] = truth;
        }
    }

    std::vector<AdamState> opt(net.paramset_count());
    for (std::size_t k = 0; k < net.paramset_count(); ++k)
        opt[k] = AdamState::for_parameter_count(net.paramset(k).parameter_count());

    SplitMix64 shuffle_rng(derive_seed(seed, 0x73687566));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        shuffle_indices(order, shuffle_rng);
        for (std::size_t start = 0; start < n; start += batch_size) {
            const std::size_t count = std::min(batch_size, n - start);
            const std::span<const std::size_t> slice(order.data() + start, count);
            std::vector<int> batch_labels(count);
            for (std::size_t i = 0; i < count; ++i) batch_labels[i] = labels[slice[i]];

            std::vector<std::vector<double>> grads(net.paramset_count());
            for (std::size_t k = 0; k < net.paramset_count(); ++k)
                grads[k].assign(net.paramset(k).parameter_count(), 0.0);

            const double inv_count = 1.0 / static_cast<double>(count);
            for (const Feed& feed : feeds) {
                const Tensor2 items = feed.items->gather_rows(slice);
                const MLPClassifier& clf = net.paramset(feed.paramset);
                const Tensor2 probs = clf.forward(items);
                Tensor2 upstream(count, clf.output_dim());
                for (std::size_t r = 0; r < count; ++r) {
                    const double p = probs.at(r, static_cast<std::size_t>(batch_labels[r]));
                    if (p > kLogFloor)
                        upstream.at(r, static_cast<std::size_t>(batch_labels[r])) =
                            -inv_count / p;
                }
                const std::vector<double> g = clf.backward(items, upstream);
                for (std::size_t i = 0; i < g.size(); ++i) grads[feed.paramset][i] += g[i];
            }
            for (std::size_t k = 0; k < net.paramset_count(); ++k) {
                std::vector<double> params = net.paramset(k).get_parameters();
                adam_step(opt[k], params, grads[k]);
                net.paramset(k).set_parameters(params);
            }
        }
    }
}

ScanResult scan_components(const Dataset& data, const std::vector<std::size_t>& c_values,
                           const std::vector<std::size_t>& hidden,
                           const std::vector<std::size_t>& sharing, const TrainConfig& cfg,
                           double delta_sat) {
    if (c_values.empty()) throw config_error("scan: empty component range");
    data.validate();

    NetSpec spec;
    spec.hidden = hidden;
    spec.sharing = sharing;
    for (const auto& m : data.variates) spec.variate_dims.push_back(m.cols());

    ScanResult out;
    double prev_cost = 0.0;
    for (std::size_t idx = 0; idx < c_values.size(); ++idx) {
        const std::size_t c = c_values[idx];
        spec.components = c;
        TrainConfig run_cfg = cfg;
        run_cfg.seed = cfg.seed + c;  // fresh, reproducible net per C
        run_cfg.stop_on_collapse = true;
        RestartResult rr;
        try {
            rr = train_with_restarts(spec, data, run_cfg);
        } catch (const error& e) {
            throw config_error("scan at C=" + std::to_string(c) + ": " + e.what());
        }
        if (rr.result.log.empty())
            throw config_error("scan at C=" + std::to_string(c) +
                               ": collapsed before the first epoch (" +
                               rr.result.collapse_context + ")");
        ScanRow row;
        row.components = c;
        row.best_cost = rr.result.best_cost();
        row.improvement = idx == 0 ? 0.0 : prev_cost - row.best_cost;
        row.collapsed = rr.result.collapsed;
        prev_cost = row.best_cost;
        out.rows.push_back(row);
    }
    // First C whose successor improves by less than delta_sat; defaults to
    // the largest scanned C when improvement never levels off.
    out.saturation_components = out.rows.back().components;
    for (std::size_t i = 0; i + 1 < out.rows.size(); ++i) {
        if (out.rows[i + 1].improvement < delta_sat) {
            out.saturation_components = out.rows[i].components;
            break;
        }
    }
    return out;
}

} // namespace inclass
