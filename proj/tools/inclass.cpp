#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "inclass/commands.hpp"

namespace {

// Exit codes: 0 success, 2 config error, 3 ingestion/IO error, 4 numeric or
// training failure.
int run_command(const std::string& command, inclass::RunConfig cfg) {
    using inclass::CommandResult;
    CommandResult result;
    if (command == "generate")
        result = inclass::cmd_generate(cfg);
    else if (command == "train")
        result = inclass::cmd_train(cfg);
    else if (command == "extract")
        result = inclass::cmd_extract(cfg);
    else if (command == "diagnose")
        result = inclass::cmd_diagnose(cfg);
    else if (command == "scan")
        result = inclass::cmd_scan(cfg);
    else if (command == "pretrain")
        result = inclass::cmd_pretrain(cfg);
    std::cout << result.summary << "\n";
    for (const auto& file : result.outputs) std::cout << "wrote " << cfg.out_dir << "/" << file << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Nonparametric conditional-independence mixture estimation with "
                 "independent classifier networks"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::int64_t seed_override = -1;
    unsigned threads = 0;

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "Run configuration file (JSON)")->required();
        sub->add_option("--out", out_dir, "Output directory (overrides config)");
        sub->add_option("--seed", seed_override, "Seed override");
        sub->add_option("--threads", threads, "Thread count for batched evaluation");
    };
    for (const char* name : {"generate", "train", "extract", "diagnose", "scan", "pretrain"})
        add_common(app.add_subcommand(name));

    CLI11_PARSE(app, argc, argv);
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        inclass::RunConfig cfg = inclass::load_run_config(config_path);
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
        if (threads > 0) cfg.threads = threads;
        inclass::set_eval_threads(cfg.threads);
        return run_command(command, std::move(cfg));
    } catch (const inclass::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const inclass::ingestion_error& e) {
        std::cerr << "ingestion error: " << e.what() << "\n";
        return 3;
    } catch (const inclass::io_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const inclass::error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
}
