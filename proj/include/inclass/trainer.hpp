#pragma once

#include <cstdint>
#include <vector>

#include "inclass/costs.hpp"
#include "inclass/net.hpp"

namespace inclass {

enum class GradientMode { batch, moving };

struct TrainConfig {
    std::size_t epochs = 15;
    std::size_t batch_size = 50;
    std::size_t min_batch_for_means = 50;
    CostKind cost = CostKind::neg_ctc;
    GradientMode gradient_mode = GradientMode::batch;
    RegularizerConfig regularizer;
    std::uint64_t seed = 0;
    bool shuffle = true;
    double moving_decay = 0.99;
    double clip_norm = 0.0;  // 0 disables the optional global-norm clip
    double lr = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-7;
    std::size_t restarts = 1;
    /// Fit a fixed standardising input transform from the training data
    /// before the first step (no-op when the net already carries one).
    bool standardize_inputs = true;
    /// When true, a degenerate-component abort ends training gracefully with
    /// the log so far instead of throwing. Component counts above the true
    /// one drive the surplus weight to zero by design, so scans enable this.
    bool stop_on_collapse = false;
};

struct EpochRecord {
    std::size_t epoch;
    double mean_cost;
    double wall_seconds;
};

struct TrainResult {
    std::vector<EpochRecord> log;
    bool collapsed = false;
    std::string collapse_context;  // epoch/batch/component of the abort

    double best_cost() const;
    double final_cost() const { return log.empty() ? 0.0 : log.back().mean_cost; }
};

/// Minibatch training of an InClass net against the configured cost. Batches
/// are drawn in per-epoch shuffled order derived from cfg.seed, so the run is
/// reproducible bitwise from (net, data, cfg).
TrainResult train(InClassNet& net, const Dataset& data, const TrainConfig& cfg);

/// Builds a fresh net per restart (restart 0 uses cfg.seed itself) and keeps
/// the one with the lowest epoch cost.
struct RestartResult {
    InClassNet net;
    TrainResult result;
    std::size_t chosen_restart = 0;
};
RestartResult train_with_restarts(const NetSpec& spec, const Dataset& data,
                                  const TrainConfig& cfg);

/// Supervised cross-entropy pre-training on noisily labelled data: each label
/// is kept with probability 1-noise and flipped to a uniformly chosen other
/// class otherwise, drawn once from the seed. Intended for seeding class
/// identities before unsupervised training. The labelled data may carry one
/// matrix per variate, or a single matrix applied to every parameter set of
/// matching input width.
void pretrain_supervised(InClassNet& net, const Dataset& labeled, double noise,
                         std::size_t epochs, std::size_t batch_size, std::uint64_t seed);

struct ScanRow {
    std::size_t components;
    double best_cost;
    double improvement;  // best_cost(previous C) - best_cost(this C)
    bool collapsed = false;  // run ended by a zero-weight surplus component
};

struct ScanResult {
    std::vector<ScanRow> rows;
    std::size_t saturation_components = 0;
};

/// Trains a fresh net per component count (seeded cfg.seed + C) and reports
/// the best epoch cost per C. The saturation point is the first C whose
/// successor improves by less than delta_sat.
ScanResult scan_components(const Dataset& data, const std::vector<std::size_t>& c_values,
                           const std::vector<std::size_t>& hidden,
                           const std::vector<std::size_t>& sharing, const TrainConfig& cfg,
                           double delta_sat = 0.02);

} // namespace inclass
