#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>

#include "inclass/commands.hpp"
#include "inclass/io.hpp"
#include "inclass/synthetic.hpp"
#include "inclass/trainer.hpp"
#include "test_support.hpp"

using namespace inclass;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

InClassNet trained_toy_net(std::uint64_t seed) {
    NetSpec spec;
    spec.variate_dims = {1, 1};
    spec.components = 2;
    InClassNet net = build_inclass_net(spec, seed);
    const GeneratedDataset gen = sample_mixture(two_gaussian_spec(), 1000, seed + 1);
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 50;
    cfg.seed = seed + 2;
    (void)train(net, gen.data, cfg);
    return net;
}

} // namespace

TEST_CASE("checkpoint round-trips bitwise") {
    TempDir dir("inclass_io_ckpt");
    const InClassNet net = trained_toy_net(3);
    const std::string first = dir.file("a.txt");
    const std::string second = dir.file("b.txt");
    save_checkpoint(net, first);
    const InClassNet loaded = load_checkpoint(first);
    save_checkpoint(loaded, second);
    CHECK(read_file(first) == read_file(second));

    // The loaded net evaluates identically, including the input transform.
    Tensor2 probe(3, 1);
    probe.at(0, 0) = -2.0;
    probe.at(1, 0) = 0.1;
    probe.at(2, 0) = 2.5;
    for (std::size_t v = 0; v < 2; ++v) CHECK(net.eval(v, probe) == loaded.eval(v, probe));
    CHECK(loaded.seed() == net.seed());
    CHECK(loaded.paramset(0).has_input_transform());
}

TEST_CASE("corrupted checkpoint header names the bad field") {
    TempDir dir("inclass_io_corrupt");
    const InClassNet net = trained_toy_net(5);
    const std::string path = dir.file("ckpt.txt");
    save_checkpoint(net, path);

    std::string text = read_file(path);
    const std::size_t pos = text.find("\nseed ");
    text.replace(pos, 6, "\nseat ");
    write_file(path, text);
    try {
        (void)load_checkpoint(path);
        FAIL("expected io_error");
    } catch (const io_error& e) {
        CHECK(std::strstr(e.what(), "seed") != nullptr);
    }
}

TEST_CASE("csv dataset round trip") {
    TempDir dir("inclass_io_csv");
    const GeneratedDataset gen = sample_mixture(two_gaussian_spec(), 500, 7);
    const std::string path = dir.file("data.csv");
    write_dataset_csv(gen.data, path);

    const std::string text = read_file(path);
    CHECK(text.rfind("x|y|label\n", 0) == 0);
    CHECK(text.find("\r") == std::string::npos);

    const NamedDataset loaded = read_dataset(path);
    CHECK(loaded.group_names == std::vector<std::string>{"x", "y"});
    CHECK(loaded.data.variates[0] == gen.data.variates[0]);
    CHECK(loaded.data.variates[1] == gen.data.variates[1]);
    CHECK(*loaded.data.labels == *gen.data.labels);
}

TEST_CASE("csv bytes are stable (golden file)") {
    TempDir dir("inclass_io_golden");
    Dataset data;
    data.variates.push_back(Tensor2(2, 1, {0.5, -3.0}));
    data.variates.push_back(Tensor2(2, 1, {1.25, 0.1}));
    data.labels = std::vector<int>{0, 1};
    const std::string path = dir.file("golden.csv");
    write_dataset_csv(data, path);
    CHECK(read_file(path) ==
          "x|y|label\n"
          "0.5,1.25,0\n"
          "-3,0.10000000000000001,1\n");
}

TEST_CASE("csv header encodes multi-dimensional grouping") {
    TempDir dir("inclass_io_wide");
    Dataset data;
    SplitMix64 rng(9);
    data.variates.push_back(testutil::random_batch(20, 2, rng));
    data.variates.push_back(testutil::random_batch(20, 1, rng));
    const std::string path = dir.file("wide.csv");
    write_dataset_csv(data, path);
    CHECK(read_file(path).rfind("x0,x1|y\n", 0) == 0);

    const NamedDataset loaded = read_dataset(path);
    CHECK(loaded.data.variate_count() == 2);
    CHECK(loaded.data.variates[0].cols() == 2);
    CHECK(loaded.data.variates[1].cols() == 1);
    CHECK(loaded.data.variates[0] == data.variates[0]);
    CHECK_FALSE(loaded.data.labels.has_value());
}

TEST_CASE("csv ingestion rejects non-finite cells with coordinates") {
    TempDir dir("inclass_io_nan");
    const std::string path = dir.file("bad.csv");
    write_file(path, "x|y\n1.0,2.0\nnan,3.0\n");
    try {
        (void)read_dataset(path);
        FAIL("expected ingestion_error");
    } catch (const ingestion_error& e) {
        CHECK(e.row() == 2);
        CHECK(e.col() == 0);
    }
    write_file(path, "x|y\n1.0,2.0\n4.0,inf\n");
    CHECK_THROWS_AS((void)read_dataset(path), ingestion_error);
}

TEST_CASE("jsonl dataset round trip for wide variates") {
    TempDir dir("inclass_io_jsonl");
    const LabeledPool pool = make_blob_pool(5, 11);
    const GeneratedDataset corpus = build_paired_corpus(pool, 50, 13);
    const std::string path = dir.file("pairs.jsonl");
    write_dataset_jsonl(corpus.data, path);

    const NamedDataset loaded = read_dataset(path);
    CHECK(loaded.data.variate_count() == 2);
    CHECK(loaded.data.variates[0].cols() == 16);
    CHECK(loaded.data.variates[0] == corpus.data.variates[0]);
    CHECK(loaded.data.variates[1] == corpus.data.variates[1]);
    CHECK(*loaded.data.labels == *corpus.data.labels);
}

TEST_CASE("run config round-trips losslessly and rejects unknown keys") {
    RunConfig cfg;
    cfg.seed = 99;
    cfg.data.model = "custom";
    cfg.data.custom = checkerboard_spec();
    cfg.train.cost = "neg_cmi";
    cfg.train.reg_target_weights = {0.4, 0.6};
    const std::string text = serialize_run_config(cfg);
    const RunConfig parsed = parse_run_config(text);
    CHECK(serialize_run_config(parsed) == text);
    CHECK(parsed.data.custom.has_value());
    CHECK(parsed.data.custom->weights == cfg.data.custom->weights);

    CHECK_THROWS_AS((void)parse_run_config("{\"sneed\": 1}"), config_error);
    CHECK_THROWS_AS((void)parse_run_config("{\"train\": {\"epoch\": 3}}"), config_error);
    CHECK_THROWS_AS((void)parse_run_config("{\"format_version\": 2}"), config_error);
    CHECK_THROWS_AS((void)parse_run_config("not json"), config_error);
}

TEST_CASE("fnv hash is stable") {
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
    TempDir dir("inclass_io_hash");
    const std::string path = dir.file("blob.bin");
    write_file(path, "some bytes");
    CHECK(file_hash(path) == file_hash(path));
}

TEST_CASE("generate command writes deterministic datasets and a manifest") {
    TempDir dir("inclass_io_gen");
    RunConfig cfg;
    cfg.seed = 7;
    cfg.data.model = "two_gaussian";
    cfg.data.n = 1000;
    cfg.out_dir = dir.file("run1");
    const CommandResult result = cmd_generate(cfg);
    CHECK(result.outputs.front() == "dataset.csv");
    const std::string first = read_file(dir.file("run1") + "/dataset.csv");

    cfg.out_dir = dir.file("run2");
    (void)cmd_generate(cfg);
    CHECK(read_file(dir.file("run2") + "/dataset.csv") == first);

    // Manifest lists every emitted file.
    const std::string manifest = read_file(dir.file("run1") + "/manifest.json");
    CHECK(manifest.find("dataset.csv") != std::string::npos);
    CHECK(manifest.find("config_hash") != std::string::npos);

    cfg.data.n = 0;
    CHECK_THROWS_AS((void)cmd_generate(cfg), config_error);
}

TEST_CASE("pipeline commands produce their artifacts") {
    TempDir dir("inclass_io_pipe");
    RunConfig cfg;
    cfg.seed = 17;
    cfg.data.model = "two_gaussian";
    cfg.data.n = 3000;
    cfg.out_dir = dir.file("out");
    cfg.train.epochs = 2;
    cfg.train.cost = "neg_cmi";
    (void)cmd_generate(cfg);

    cfg.inputs.dataset = dir.file("out") + "/dataset.csv";
    (void)cmd_train(cfg);
    CHECK(fs::exists(dir.file("out") + "/checkpoint.txt"));
    const std::string log = read_file(dir.file("out") + "/train_log.csv");
    CHECK(log.rfind("epoch,cost,wall_seconds\n", 0) == 0);

    // Resuming for zero further epochs leaves the checkpoint byte-identical.
    const std::string ckpt_bytes = read_file(dir.file("out") + "/checkpoint.txt");
    RunConfig resume = cfg;
    resume.inputs.checkpoint = dir.file("out") + "/checkpoint.txt";
    resume.train.epochs = 0;
    resume.out_dir = dir.file("resumed");
    (void)cmd_train(resume);
    CHECK(read_file(dir.file("resumed") + "/checkpoint.txt") == ckpt_bytes);

    cfg.inputs.checkpoint = dir.file("out") + "/checkpoint.txt";
    const CommandResult extract = cmd_extract(cfg);
    CHECK(fs::exists(dir.file("out") + "/weights.csv"));
    CHECK(fs::exists(dir.file("out") + "/phi.csv"));
    CHECK(fs::exists(dir.file("out") + "/variate_x.csv"));
    CHECK(fs::exists(dir.file("out") + "/variate_y.csv"));
    CHECK(extract.summary.rfind("weights:", 0) == 0);

    const CommandResult diagnose = cmd_diagnose(cfg);
    const std::string report = read_file(dir.file("out") + "/report.txt");
    CHECK(report.rfind("diagnostics-report v1\n", 0) == 0);
    CHECK(report.find("tc_direct") != std::string::npos);
    CHECK(diagnose.summary.find("sufficient_ok") != std::string::npos);

    RunConfig scan_cfg = cfg;
    scan_cfg.inputs.checkpoint.clear();
    scan_cfg.scan.components = {1, 2};
    scan_cfg.train.epochs = 1;
    (void)cmd_scan(scan_cfg);
    const std::string scan_text = read_file(dir.file("out") + "/scan.csv");
    CHECK(scan_text.rfind("components,best_cost,improvement\n", 0) == 0);
    CHECK(scan_text.find("saturation,") != std::string::npos);
}

TEST_CASE("pretrain command seeds a shared classifier") {
    TempDir dir("inclass_io_pre");
    RunConfig cfg;
    cfg.seed = 23;
    cfg.data.model = "blobs";
    cfg.data.n = 500;
    cfg.data.blob_per_class = 20;
    cfg.out_dir = dir.file("out");
    (void)cmd_generate(cfg);
    CHECK(fs::exists(dir.file("out") + "/dataset.jsonl"));
    CHECK(fs::exists(dir.file("out") + "/pool.jsonl"));

    cfg.inputs.dataset = dir.file("out") + "/pool.jsonl";
    cfg.net.components = 10;
    cfg.net.shared = true;
    cfg.pretrain.epochs = 2;
    cfg.pretrain.batch_size = 20;
    cfg.pretrain.noise = 0.4;
    (void)cmd_pretrain(cfg);
    const InClassNet net = load_checkpoint(dir.file("out") + "/checkpoint.txt");
    CHECK(net.paramset_count() == 1);
    CHECK(net.variate_count() == 2);
    CHECK(net.components() == 10);
    CHECK(net.variate_dim(0) == 16);
}

TEST_CASE("diagnostics report renders matrices") {
    DiagnosticsReport report;
    report.mu = Tensor2(2, 2, 0.5);
    report.pairwise_mu.assign(2, Tensor2(2, 2, 0.25));
    report.sufficient_ok = true;
    const std::string text = render_diagnostics_report(report);
    CHECK(text.find("mu 2 2") != std::string::npos);
    CHECK(text.find("pairwise_mu 1 2") != std::string::npos);
    CHECK(text.find("sufficient_ok 1") != std::string::npos);
}

TEST_CASE("unwritable output directory raises an io error") {
    TempDir dir("inclass_io_unwritable");
    // A file where the directory should go makes creation fail.
    write_file(dir.file("blocker"), "x");
    RunConfig cfg;
    cfg.data.n = 10;
    cfg.out_dir = dir.file("blocker") + "/nested";
    CHECK_THROWS_AS((void)cmd_generate(cfg), io_error);
}
