#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "inclass/diagnostics.hpp"
#include "inclass/extraction.hpp"
#include "inclass/io.hpp"
#include "inclass/synthetic.hpp"
#include "inclass/trainer.hpp"

namespace inclass {

inline constexpr const char* kLibraryVersion = "0.1.0";

struct DataConfig {
    std::string model = "two_gaussian";  // two_gaussian | checkerboard | four_gaussian |
                                         // independent_uniform | blobs | custom
    std::size_t n = 100000;
    std::string format = "csv";  // csv | jsonl
    std::optional<MixtureSpec> custom;
    std::size_t blob_per_class = 200;
};

struct NetConfig {
    std::vector<std::size_t> hidden = {32, 32, 32};
    std::size_t components = 2;
    bool shared = false;  // one parameter set for all variates
};

struct TrainSection {
    std::size_t epochs = 15;
    std::size_t batch_size = 50;
    std::size_t min_batch_for_means = 50;
    std::string cost = "neg_ctc";
    std::string gradient_mode = "batch";  // batch | moving
    double moving_decay = 0.99;
    bool shuffle = true;
    double lr = 1e-3;
    double clip_norm = 0.0;
    std::size_t restarts = 1;
    std::string regularizer = "none";  // none | tikhonov | shannon | known_weights
    double reg_lambda = 0.0;
    std::vector<double> reg_target_weights;
    bool standardize_inputs = true;
};

struct MarginalSection {
    std::string kind = "histogram";  // histogram | kde | analytic
    std::size_t bins = 0;
    double bandwidth = 0.0;
    std::string analytic_model;  // built-in model name for the analytic kind
};

struct ExtractSection {
    std::size_t grid_points = 201;
};

struct DiagnosticsSection {
    double q = 0.999;
    double tau = 0.02;
    std::size_t tc_bins = 20;
    bool tc_classifier = false;
    std::size_t tc_epochs = 5;
    std::size_t tc_batch = 100;
};

struct ScanSection {
    std::vector<std::size_t> components = {1, 2, 3, 4};
    double delta_sat = 0.02;
};

struct PretrainSection {
    double noise = 0.4;
    std::size_t epochs = 30;
    std::size_t batch_size = 20;
};

struct InputsSection {
    std::string dataset;
    std::string checkpoint;
};

/// One structured config file per run. Unknown keys are rejected and the
/// config round-trips losslessly through serialization.
struct RunConfig {
    int format_version = 1;
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    unsigned threads = 1;
    DataConfig data;
    NetConfig net;
    TrainSection train;
    MarginalSection marginal;
    ExtractSection extract;
    DiagnosticsSection diagnostics;
    ScanSection scan;
    PretrainSection pretrain;
    InputsSection inputs;
};

RunConfig parse_run_config(const std::string& json_text);
std::string serialize_run_config(const RunConfig& cfg);
RunConfig load_run_config(const std::string& path);

MixtureSpec model_spec_from_name(const std::string& name);
TrainConfig to_train_config(const RunConfig& cfg);
MarginalConfig to_marginal_config(const RunConfig& cfg);

struct CommandResult {
    std::vector<std::string> outputs;  // files written, relative to out_dir
    std::string summary;               // one-line human summary for stdout
};

CommandResult cmd_generate(const RunConfig& cfg);
CommandResult cmd_train(const RunConfig& cfg);
CommandResult cmd_extract(const RunConfig& cfg);
CommandResult cmd_diagnose(const RunConfig& cfg);
CommandResult cmd_scan(const RunConfig& cfg);
CommandResult cmd_pretrain(const RunConfig& cfg);

/// Serialises a diagnostics report as labelled CSV blocks.
std::string render_diagnostics_report(const DiagnosticsReport& report);

} // namespace inclass
