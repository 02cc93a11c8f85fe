#include "inclass/commands.hpp"

#include <chrono>
#include <filesystem>
#include <set>
#include <sstream>

#include <json.hpp>

namespace inclass {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& context) {
    for (const auto& [key, value] : obj.items())
        if (!allowed.count(key))
            throw config_error("config: unknown key '" + key + "' in " + context);
}

template <typename T>
void read_field(const json& obj, const char* key, T& out) {
    const auto it = obj.find(key);
    if (it == obj.end()) return;
    try {
        out = it->get<T>();
    } catch (const std::exception&) {
        throw config_error(std::string("config: bad value for '") + key + "'");
    }
}

Distribution1D distribution_from_json(const json& obj) {
    check_keys(obj, {"type", "mean", "sd", "lo", "hi", "segments"}, "distribution");
    const std::string type = obj.value("type", "");
    if (type == "normal") {
        return Distribution1D::make_normal(obj.value("mean", 0.0), obj.value("sd", 1.0));
    }
    if (type == "uniform") {
        return Distribution1D::make_uniform(obj.value("lo", 0.0), obj.value("hi", 1.0));
    }
    if (type == "piecewise_uniform") {
        std::vector<std::pair<double, double>> segments;
        for (const auto& seg : obj.value("segments", json::array())) {
            if (!seg.is_array() || seg.size() != 2)
                throw config_error("config: segments must be [lo, hi] pairs");
            segments.emplace_back(seg[0].get<double>(), seg[1].get<double>());
        }
        return Distribution1D::make_piecewise_uniform(std::move(segments));
    }
    throw config_error("config: unknown distribution type '" + type + "'");
}

json distribution_to_json(const Distribution1D& d) {
    json obj;
    switch (d.kind) {
        case Distribution1D::Kind::normal:
            obj["type"] = "normal";
            obj["mean"] = d.mean;
            obj["sd"] = d.sd;
            break;
        case Distribution1D::Kind::uniform:
            obj["type"] = "uniform";
            obj["lo"] = d.lo;
            obj["hi"] = d.hi;
            break;
        case Distribution1D::Kind::piecewise_uniform: {
            obj["type"] = "piecewise_uniform";
            json segments = json::array();
            for (const auto& [a, b] : d.segments) segments.push_back(json::array({a, b}));
            obj["segments"] = std::move(segments);
            break;
        }
    }
    return obj;
}

MixtureSpec mixture_from_json(const json& obj) {
    check_keys(obj, {"weights", "components"}, "data.custom");
    MixtureSpec spec;
    read_field(obj, "weights", spec.weights);
    for (const auto& row : obj.value("components", json::array())) {
        std::vector<Distribution1D> dists;
        for (const auto& d : row) dists.push_back(distribution_from_json(d));
        spec.components.push_back(std::move(dists));
    }
    spec.validate();
    return spec;
}

json mixture_to_json(const MixtureSpec& spec) {
    json obj;
    obj["weights"] = spec.weights;
    json rows = json::array();
    for (const auto& row : spec.components) {
        json dists = json::array();
        for (const auto& d : row) dists.push_back(distribution_to_json(d));
        rows.push_back(std::move(dists));
    }
    obj["components"] = std::move(rows);
    return obj;
}

} // namespace

RunConfig parse_run_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const std::exception& e) {
        throw config_error(std::string("config: parse failure: ") + e.what());
    }
    if (!root.is_object()) throw config_error("config: top level must be an object");
    check_keys(root,
               {"format_version", "seed", "out_dir", "threads", "data", "net", "train",
                "marginal", "extract", "diagnostics", "scan", "pretrain", "inputs"},
               "top level");

    RunConfig cfg;
    read_field(root, "format_version", cfg.format_version);
    if (cfg.format_version != 1)
        throw config_error("config: unsupported format_version " +
                           std::to_string(cfg.format_version));
    read_field(root, "seed", cfg.seed);
    read_field(root, "out_dir", cfg.out_dir);
    read_field(root, "threads", cfg.threads);
    if (cfg.threads == 0) throw config_error("config: threads must be positive");

    if (root.contains("data")) {
        const json& obj = root["data"];
        check_keys(obj, {"model", "n", "format", "custom", "blob_per_class"}, "data");
        read_field(obj, "model", cfg.data.model);
        read_field(obj, "n", cfg.data.n);
        read_field(obj, "format", cfg.data.format);
        read_field(obj, "blob_per_class", cfg.data.blob_per_class);
        if (obj.contains("custom")) cfg.data.custom = mixture_from_json(obj["custom"]);
        if (cfg.data.format != "csv" && cfg.data.format != "jsonl")
            throw config_error("config: data.format must be csv or jsonl");
    }
    if (root.contains("net")) {
        const json& obj = root["net"];
        check_keys(obj, {"hidden", "components", "shared"}, "net");
        read_field(obj, "hidden", cfg.net.hidden);
        read_field(obj, "components", cfg.net.components);
        read_field(obj, "shared", cfg.net.shared);
    }
    if (root.contains("train")) {
        const json& obj = root["train"];
        check_keys(obj,
                   {"epochs", "batch_size", "min_batch_for_means", "cost", "gradient_mode",
                    "moving_decay", "shuffle", "lr", "clip_norm", "restarts", "regularizer",
                    "reg_lambda", "reg_target_weights", "standardize_inputs"},
                   "train");
        read_field(obj, "epochs", cfg.train.epochs);
        read_field(obj, "batch_size", cfg.train.batch_size);
        read_field(obj, "min_batch_for_means", cfg.train.min_batch_for_means);
        read_field(obj, "cost", cfg.train.cost);
        read_field(obj, "gradient_mode", cfg.train.gradient_mode);
        read_field(obj, "moving_decay", cfg.train.moving_decay);
        read_field(obj, "shuffle", cfg.train.shuffle);
        read_field(obj, "lr", cfg.train.lr);
        read_field(obj, "clip_norm", cfg.train.clip_norm);
        read_field(obj, "restarts", cfg.train.restarts);
        read_field(obj, "regularizer", cfg.train.regularizer);
        read_field(obj, "reg_lambda", cfg.train.reg_lambda);
        read_field(obj, "reg_target_weights", cfg.train.reg_target_weights);
        read_field(obj, "standardize_inputs", cfg.train.standardize_inputs);
    }
    if (root.contains("marginal")) {
        const json& obj = root["marginal"];
        check_keys(obj, {"kind", "bins", "bandwidth", "analytic_model"}, "marginal");
        read_field(obj, "kind", cfg.marginal.kind);
        read_field(obj, "bins", cfg.marginal.bins);
        read_field(obj, "bandwidth", cfg.marginal.bandwidth);
        read_field(obj, "analytic_model", cfg.marginal.analytic_model);
    }
    if (root.contains("extract")) {
        const json& obj = root["extract"];
        check_keys(obj, {"grid_points"}, "extract");
        read_field(obj, "grid_points", cfg.extract.grid_points);
    }
    if (root.contains("diagnostics")) {
        const json& obj = root["diagnostics"];
        check_keys(obj, {"q", "tau", "tc_bins", "tc_classifier", "tc_epochs", "tc_batch"},
                   "diagnostics");
        read_field(obj, "q", cfg.diagnostics.q);
        read_field(obj, "tau", cfg.diagnostics.tau);
        read_field(obj, "tc_bins", cfg.diagnostics.tc_bins);
        read_field(obj, "tc_classifier", cfg.diagnostics.tc_classifier);
        read_field(obj, "tc_epochs", cfg.diagnostics.tc_epochs);
        read_field(obj, "tc_batch", cfg.diagnostics.tc_batch);
    }
    if (root.contains("scan")) {
        const json& obj = root["scan"];
        check_keys(obj, {"components", "delta_sat"}, "scan");
        read_field(obj, "components", cfg.scan.components);
        read_field(obj, "delta_sat", cfg.scan.delta_sat);
    }
    if (root.contains("pretrain")) {
        const json& obj = root["pretrain"];
        check_keys(obj, {"noise", "epochs", "batch_size"}, "pretrain");
        read_field(obj, "noise", cfg.pretrain.noise);
        read_field(obj, "epochs", cfg.pretrain.epochs);
        read_field(obj, "batch_size", cfg.pretrain.batch_size);
    }
    if (root.contains("inputs")) {
        const json& obj = root["inputs"];
        check_keys(obj, {"dataset", "checkpoint"}, "inputs");
        read_field(obj, "dataset", cfg.inputs.dataset);
        read_field(obj, "checkpoint", cfg.inputs.checkpoint);
    }
    return cfg;
}

std::string serialize_run_config(const RunConfig& cfg) {
    json root;
    root["format_version"] = cfg.format_version;
    root["seed"] = cfg.seed;
    root["out_dir"] = cfg.out_dir;
    root["threads"] = cfg.threads;
    root["data"] = {{"model", cfg.data.model},
                    {"n", cfg.data.n},
                    {"format", cfg.data.format},
                    {"blob_per_class", cfg.data.blob_per_class}};
    if (cfg.data.custom) root["data"]["custom"] = mixture_to_json(*cfg.data.custom);
    root["net"] = {{"hidden", cfg.net.hidden},
                   {"components", cfg.net.components},
                   {"shared", cfg.net.shared}};
    root["train"] = {{"epochs", cfg.train.epochs},
                     {"batch_size", cfg.train.batch_size},
                     {"min_batch_for_means", cfg.train.min_batch_for_means},
                     {"cost", cfg.train.cost},
                     {"gradient_mode", cfg.train.gradient_mode},
                     {"moving_decay", cfg.train.moving_decay},
                     {"shuffle", cfg.train.shuffle},
                     {"lr", cfg.train.lr},
                     {"clip_norm", cfg.train.clip_norm},
                     {"restarts", cfg.train.restarts},
                     {"regularizer", cfg.train.regularizer},
                     {"reg_lambda", cfg.train.reg_lambda},
                     {"reg_target_weights", cfg.train.reg_target_weights},
                     {"standardize_inputs", cfg.train.standardize_inputs}};
    root["marginal"] = {{"kind", cfg.marginal.kind},
                        {"bins", cfg.marginal.bins},
                        {"bandwidth", cfg.marginal.bandwidth},
                        {"analytic_model", cfg.marginal.analytic_model}};
    root["extract"] = {{"grid_points", cfg.extract.grid_points}};
    root["diagnostics"] = {{"q", cfg.diagnostics.q},
                           {"tau", cfg.diagnostics.tau},
                           {"tc_bins", cfg.diagnostics.tc_bins},
                           {"tc_classifier", cfg.diagnostics.tc_classifier},
                           {"tc_epochs", cfg.diagnostics.tc_epochs},
                           {"tc_batch", cfg.diagnostics.tc_batch}};
    root["scan"] = {{"components", cfg.scan.components}, {"delta_sat", cfg.scan.delta_sat}};
    root["pretrain"] = {{"noise", cfg.pretrain.noise},
                        {"epochs", cfg.pretrain.epochs},
                        {"batch_size", cfg.pretrain.batch_size}};
    root["inputs"] = {{"dataset", cfg.inputs.dataset}, {"checkpoint", cfg.inputs.checkpoint}};
    return root.dump(2) + "\n";
}

RunConfig load_run_config(const std::string& path) {
    return parse_run_config(read_file(path));
}

MixtureSpec model_spec_from_name(const std::string& name) {
    if (name == "two_gaussian") return two_gaussian_spec();
    if (name == "checkerboard") return checkerboard_spec();
    if (name == "four_gaussian") return four_gaussian_spec();
    if (name == "independent_uniform") return independent_uniform_spec();
    throw config_error("config: unknown model '" + name + "'");
}

TrainConfig to_train_config(const RunConfig& cfg) {
    TrainConfig tc;
    tc.epochs = cfg.train.epochs;
    tc.batch_size = cfg.train.batch_size;
    tc.min_batch_for_means = cfg.train.min_batch_for_means;
    tc.cost = cost_kind_from_name(cfg.train.cost);
    if (cfg.train.gradient_mode == "batch") {
        tc.gradient_mode = GradientMode::batch;
    } else if (cfg.train.gradient_mode == "moving") {
        tc.gradient_mode = GradientMode::moving;
    } else {
        throw config_error("config: gradient_mode must be batch or moving");
    }
    tc.moving_decay = cfg.train.moving_decay;
    tc.shuffle = cfg.train.shuffle;
    tc.lr = cfg.train.lr;
    tc.clip_norm = cfg.train.clip_norm;
    tc.restarts = cfg.train.restarts;
    tc.seed = cfg.seed;
    if (cfg.train.regularizer == "none") {
        tc.regularizer.kind = RegularizerKind::none;
    } else if (cfg.train.regularizer == "tikhonov") {
        tc.regularizer.kind = RegularizerKind::tikhonov;
    } else if (cfg.train.regularizer == "shannon") {
        tc.regularizer.kind = RegularizerKind::shannon;
    } else if (cfg.train.regularizer == "known_weights") {
        tc.regularizer.kind = RegularizerKind::known_weights;
    } else {
        throw config_error("config: unknown regularizer '" + cfg.train.regularizer + "'");
    }
    tc.regularizer.lambda = cfg.train.reg_lambda;
    tc.regularizer.target_weights = cfg.train.reg_target_weights;
    tc.standardize_inputs = cfg.train.standardize_inputs;
    return tc;
}

MarginalConfig to_marginal_config(const RunConfig& cfg) {
    MarginalConfig mc;
    mc.kind = marginal_kind_from_name(cfg.marginal.kind);
    mc.bins = cfg.marginal.bins;
    mc.bandwidth = cfg.marginal.bandwidth;
    if (mc.kind == MarginalKind::analytic) {
        if (cfg.marginal.analytic_model.empty())
            throw config_error("config: analytic marginal requires marginal.analytic_model");
        mc.analytic_model = model_spec_from_name(cfg.marginal.analytic_model);
    }
    return mc;
}

namespace {

std::string out_path(const RunConfig& cfg, const std::string& name) {
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec) throw io_error("cannot create output directory " + cfg.out_dir + ": " + ec.message());
    return (fs::path(cfg.out_dir) / name).string();
}

void write_manifest(const RunConfig& cfg, const std::string& command,
                    const std::vector<std::string>& outputs, const std::string& dataset_path,
                    double wall_seconds) {
    json manifest;
    manifest["command"] = command;
    manifest["config_hash"] = fnv1a_hex(serialize_run_config(cfg));
    manifest["dataset_hash"] = dataset_path.empty() ? "" : file_hash(dataset_path);
    manifest["library_version"] = kLibraryVersion;
    manifest["wall_seconds"] = wall_seconds;
    manifest["outputs"] = outputs;
    write_file(out_path(cfg, "manifest.json"), manifest.dump(2) + "\n");
}

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

NamedDataset load_input_dataset(const RunConfig& cfg) {
    if (cfg.inputs.dataset.empty())
        throw config_error("config: inputs.dataset is required for this command");
    return read_dataset(cfg.inputs.dataset);
}

InClassNet net_for_dataset(const RunConfig& cfg, const Dataset& data) {
    if (!cfg.inputs.checkpoint.empty()) return load_checkpoint(cfg.inputs.checkpoint);
    NetSpec spec;
    spec.hidden = cfg.net.hidden;
    spec.components = cfg.net.components;
    for (const auto& m : data.variates) spec.variate_dims.push_back(m.cols());
    if (cfg.net.shared) spec.sharing.assign(spec.variate_dims.size(), 0);
    return build_inclass_net(spec, cfg.seed);
}

void check_net_matches_data(const InClassNet& net, const NamedDataset& named) {
    if (net.variate_count() != named.data.variate_count())
        throw ingestion_error("dataset groups (" + std::to_string(named.data.variate_count()) +
                              ") do not match network variates (" +
                              std::to_string(net.variate_count()) + ")");
    for (std::size_t v = 0; v < net.variate_count(); ++v)
        if (net.variate_dim(v) != named.data.variates[v].cols())
            throw ingestion_error("dataset group '" + named.group_names[v] + "' has width " +
                                  std::to_string(named.data.variates[v].cols()) +
                                  ", network expects " + std::to_string(net.variate_dim(v)));
}

std::string weights_csv(const std::vector<double>& weights) {
    std::ostringstream out;
    out << "component,weight\n";
    for (std::size_t i = 0; i < weights.size(); ++i)
        out << i << "," << format_double(weights[i]) << "\n";
    return out.str();
}

std::string phi_csv(const PseudoWeights& pw, const std::vector<double>& weights) {
    std::ostringstream out;
    out << "component";
    for (std::size_t v = 0; v < pw.variate_count(); ++v) out << ",phi_" << v;
    out << ",w_tilde,weight\n";
    for (std::size_t i = 0; i < pw.component_count(); ++i) {
        out << i;
        for (std::size_t v = 0; v < pw.variate_count(); ++v)
            out << "," << format_double(pw.phi.at(i, v));
        out << "," << format_double(pw.w_tilde[i]) << "," << format_double(weights[i]) << "\n";
    }
    return out.str();
}

} // namespace

CommandResult cmd_generate(const RunConfig& cfg) {
    Stopwatch watch;
    if (cfg.data.n == 0) throw config_error("config: data.n must be positive");

    CommandResult result;
    std::string dataset_file;
    if (cfg.data.model == "blobs") {
        const LabeledPool pool = make_blob_pool(cfg.data.blob_per_class, cfg.seed);
        const GeneratedDataset corpus =
            build_paired_corpus(pool, cfg.data.n, derive_seed(cfg.seed, 0x70616972));
        dataset_file = out_path(cfg, "dataset.jsonl");
        write_dataset_jsonl(corpus.data, dataset_file);
        Dataset pool_data;
        pool_data.variates.push_back(pool.items);
        pool_data.labels = pool.labels;
        const std::string pool_file = out_path(cfg, "pool.jsonl");
        write_dataset_jsonl(pool_data, pool_file, {"x"});
        result.outputs = {"dataset.jsonl", "pool.jsonl"};
    } else {
        const MixtureSpec spec = cfg.data.model == "custom"
                                     ? (cfg.data.custom
                                            ? *cfg.data.custom
                                            : throw config_error("config: data.custom missing"))
                                     : model_spec_from_name(cfg.data.model);
        const GeneratedDataset generated = sample_mixture(spec, cfg.data.n, cfg.seed);
        const bool jsonl = cfg.data.format == "jsonl";
        dataset_file = out_path(cfg, jsonl ? "dataset.jsonl" : "dataset.csv");
        if (jsonl)
            write_dataset_jsonl(generated.data, dataset_file);
        else
            write_dataset_csv(generated.data, dataset_file);
        result.outputs = {jsonl ? "dataset.jsonl" : "dataset.csv"};
    }
    write_manifest(cfg, "generate", result.outputs, dataset_file, watch.seconds());
    result.outputs.push_back("manifest.json");
    result.summary = "generated " + std::to_string(cfg.data.n) + " rows (model " +
                     cfg.data.model + ", seed " + std::to_string(cfg.seed) + ")";
    return result;
}

CommandResult cmd_train(const RunConfig& cfg) {
    Stopwatch watch;
    const NamedDataset named = load_input_dataset(cfg);
    const TrainConfig tc = to_train_config(cfg);

    InClassNet net;
    TrainResult log;
    if (!cfg.inputs.checkpoint.empty()) {
        net = load_checkpoint(cfg.inputs.checkpoint);
        check_net_matches_data(net, named);
        log = train(net, named.data, tc);
    } else if (tc.restarts > 1) {
        NetSpec spec;
        spec.hidden = cfg.net.hidden;
        spec.components = cfg.net.components;
        for (const auto& m : named.data.variates) spec.variate_dims.push_back(m.cols());
        if (cfg.net.shared) spec.sharing.assign(spec.variate_dims.size(), 0);
        RestartResult rr = train_with_restarts(spec, named.data, tc);
        net = std::move(rr.net);
        log = std::move(rr.result);
    } else {
        net = net_for_dataset(cfg, named.data);
        check_net_matches_data(net, named);
        log = train(net, named.data, tc);
    }

    save_checkpoint(net, out_path(cfg, "checkpoint.txt"));
    write_train_log_csv(log.log, out_path(cfg, "train_log.csv"));

    CommandResult result;
    result.outputs = {"checkpoint.txt", "train_log.csv"};
    write_manifest(cfg, "train", result.outputs, cfg.inputs.dataset, watch.seconds());
    result.outputs.push_back("manifest.json");
    std::ostringstream summary;
    summary << "trained " << net.parameter_count() << " parameters for " << log.log.size()
            << " epochs; final cost " << (log.log.empty() ? 0.0 : log.log.back().mean_cost);
    result.summary = summary.str();
    return result;
}

CommandResult cmd_extract(const RunConfig& cfg) {
    Stopwatch watch;
    const NamedDataset named = load_input_dataset(cfg);
    if (cfg.inputs.checkpoint.empty())
        throw config_error("config: inputs.checkpoint is required for extract");
    const InClassNet net = load_checkpoint(cfg.inputs.checkpoint);
    check_net_matches_data(net, named);

    const ExtractedModel model =
        extract_model(net, named.data, to_marginal_config(cfg), cfg.extract.grid_points);

    CommandResult result;
    write_file(out_path(cfg, "weights.csv"), weights_csv(model.weights));
    write_file(out_path(cfg, "phi.csv"), phi_csv(model.pseudo, model.weights));
    result.outputs = {"weights.csv", "phi.csv"};

    for (std::size_t v = 0; v < net.variate_count(); ++v) {
        if (!model.has_density[v]) continue;
        const std::size_t c = model.pseudo.component_count();
        std::ostringstream out;
        out << named.group_names[v] << ",P";
        for (std::size_t i = 0; i < c; ++i) out << ",f" << i;
        for (std::size_t i = 0; i < c; ++i) out << ",alpha" << i;
        out << "\n";
        for (std::size_t g = 0; g < model.grids[v].size(); ++g) {
            out << format_double(model.grids[v][g]) << ","
                << format_double(model.marginal[v][g]);
            for (std::size_t i = 0; i < c; ++i) out << "," << format_double(model.f[v][i][g]);
            for (std::size_t i = 0; i < c; ++i)
                out << "," << format_double(model.alpha[v][i][g]);
            out << "\n";
        }
        const std::string name = "variate_" + named.group_names[v] + ".csv";
        write_file(out_path(cfg, name), out.str());
        result.outputs.push_back(name);
    }
    write_manifest(cfg, "extract", result.outputs, cfg.inputs.dataset, watch.seconds());
    result.outputs.push_back("manifest.json");

    std::ostringstream summary;
    summary << "weights:";
    for (double w : model.weights) summary << " " << format_double(w);
    result.summary = summary.str();
    return result;
}

std::string render_diagnostics_report(const DiagnosticsReport& report) {
    std::ostringstream out;
    out << "diagnostics-report v1\n";
    out << "q " << format_double(report.q) << "\n";
    out << "tau " << format_double(report.tau) << "\n";
    out << "sufficient_ok " << (report.sufficient_ok ? 1 : 0) << "\n";
    out << "necessary_ok " << (report.necessary_ok ? 1 : 0) << "\n";
    out << "sufficient_margin " << format_double(report.sufficient_margin) << "\n";
    out << "necessary_margin " << format_double(report.necessary_margin) << "\n";
    out << "tc_direct " << format_double(report.tc_direct) << "\n";
    out << "tc_classifier " << format_double(report.tc_classifier) << "\n";
    out << "mu " << report.mu.rows() << " " << report.mu.cols() << "\n";
    for (std::size_t i = 0; i < report.mu.rows(); ++i) {
        for (std::size_t v = 0; v < report.mu.cols(); ++v) {
            if (v) out << ",";
            out << format_double(report.mu.at(i, v));
        }
        out << "\n";
    }
    for (std::size_t v = 0; v < report.pairwise_mu.size(); ++v) {
        const Tensor2& pm = report.pairwise_mu[v];
        out << "pairwise_mu " << v << " " << pm.rows() << "\n";
        for (std::size_t i = 0; i < pm.rows(); ++i) {
            for (std::size_t j = 0; j < pm.cols(); ++j) {
                if (j) out << ",";
                out << format_double(pm.at(i, j));
            }
            out << "\n";
        }
    }
    return out.str();
}

CommandResult cmd_diagnose(const RunConfig& cfg) {
    Stopwatch watch;
    const NamedDataset named = load_input_dataset(cfg);
    if (cfg.inputs.checkpoint.empty())
        throw config_error("config: inputs.checkpoint is required for diagnose");
    const InClassNet net = load_checkpoint(cfg.inputs.checkpoint);
    check_net_matches_data(net, named);

    const PseudoWeights pw = estimate_pseudo_weights(net, named.data);
    const CorrectedClassifierView corrected(net, pw);
    DiagnosticsReport report = check_identifiability(corrected, named.data,
                                                     cfg.diagnostics.q, cfg.diagnostics.tau);

    bool all_scalar = true;
    for (std::size_t v = 0; v < named.data.variate_count(); ++v)
        all_scalar = all_scalar && named.data.variates[v].cols() == 1;
    if (all_scalar && named.data.variate_count() <= 3)
        report.tc_direct = total_correlation_direct(named.data, cfg.diagnostics.tc_bins);
    if (cfg.diagnostics.tc_classifier) {
        TCClassifierConfig tcc;
        tcc.epochs = cfg.diagnostics.tc_epochs;
        tcc.batch_size = cfg.diagnostics.tc_batch;
        tcc.seed = cfg.seed;
        report.tc_classifier = total_correlation_classifier(named.data, tcc);
    }

    write_file(out_path(cfg, "report.txt"), render_diagnostics_report(report));
    CommandResult result;
    result.outputs = {"report.txt"};
    write_manifest(cfg, "diagnose", result.outputs, cfg.inputs.dataset, watch.seconds());
    result.outputs.push_back("manifest.json");
    std::ostringstream summary;
    summary << "sufficient_ok=" << report.sufficient_ok
            << " necessary_ok=" << report.necessary_ok;
    if (all_scalar) summary << " tc_direct=" << format_double(report.tc_direct);
    result.summary = summary.str();
    return result;
}

CommandResult cmd_scan(const RunConfig& cfg) {
    Stopwatch watch;
    const NamedDataset named = load_input_dataset(cfg);
    const TrainConfig tc = to_train_config(cfg);
    std::vector<std::size_t> sharing;
    if (cfg.net.shared) sharing.assign(named.data.variate_count(), 0);

    const ScanResult scan = scan_components(named.data, cfg.scan.components, cfg.net.hidden,
                                            sharing, tc, cfg.scan.delta_sat);

    std::ostringstream out;
    out << "components,best_cost,improvement\n";
    for (const auto& row : scan.rows)
        out << row.components << "," << format_double(row.best_cost) << ","
            << format_double(row.improvement) << "\n";
    out << "saturation," << scan.saturation_components << ",\n";
    write_file(out_path(cfg, "scan.csv"), out.str());

    CommandResult result;
    result.outputs = {"scan.csv"};
    write_manifest(cfg, "scan", result.outputs, cfg.inputs.dataset, watch.seconds());
    result.outputs.push_back("manifest.json");
    result.summary = "saturation at C=" + std::to_string(scan.saturation_components);
    return result;
}

CommandResult cmd_pretrain(const RunConfig& cfg) {
    Stopwatch watch;
    const NamedDataset named = load_input_dataset(cfg);
    if (!named.data.labels)
        throw config_error("pretrain: labelled dataset required");

    InClassNet net;
    if (!cfg.inputs.checkpoint.empty()) {
        net = load_checkpoint(cfg.inputs.checkpoint);
    } else {
        NetSpec spec;
        spec.hidden = cfg.net.hidden;
        spec.components = cfg.net.components;
        // The labelled pool is single-variate; nets built here are shared
        // classifiers over that item space.
        spec.variate_dims.assign(cfg.net.shared ? 2 : 1, named.data.variates[0].cols());
        if (cfg.net.shared) spec.sharing.assign(spec.variate_dims.size(), 0);
        net = build_inclass_net(spec, cfg.seed);
    }
    pretrain_supervised(net, named.data, cfg.pretrain.noise, cfg.pretrain.epochs,
                        cfg.pretrain.batch_size, cfg.seed);
    save_checkpoint(net, out_path(cfg, "checkpoint.txt"));

    CommandResult result;
    result.outputs = {"checkpoint.txt"};
    write_manifest(cfg, "pretrain", result.outputs, cfg.inputs.dataset, watch.seconds());
    result.outputs.push_back("manifest.json");
    result.summary = "pretrained on " + std::to_string(named.data.rows()) +
                     " labelled rows (noise " + format_double(cfg.pretrain.noise) + ")";
    return result;
}

} // namespace inclass
