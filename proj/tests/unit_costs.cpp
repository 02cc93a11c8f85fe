#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "inclass/costs.hpp"
#include "inclass/synthetic.hpp"
#include "test_support.hpp"

using namespace inclass;

namespace {

BatchOutputs uniform_outputs(std::size_t n, std::size_t c, std::size_t v_count) {
    BatchOutputs out;
    out.beta.assign(v_count, Tensor2(n, c, 1.0 / static_cast<double>(c)));
    return out;
}

/// Hard one-hot outputs from true checkerboard labels on both variates.
BatchOutputs checkerboard_hard_outputs(std::size_t n, std::uint64_t seed) {
    const GeneratedDataset gen = sample_checkerboard(n, seed);
    BatchOutputs out;
    out.beta.assign(2, Tensor2(n, 2, 0.0));
    for (std::size_t r = 0; r < n; ++r) {
        const int label = (*gen.data.labels)[r];
        out.beta[0].at(r, static_cast<std::size_t>(label)) = 1.0;
        out.beta[1].at(r, static_cast<std::size_t>(label)) = 1.0;
    }
    return out;
}

InClassNet small_net(std::size_t v_count, std::size_t c, std::size_t width,
                     std::uint64_t seed) {
    NetSpec spec;
    spec.variate_dims.assign(v_count, 1);
    spec.hidden = {width};
    spec.components = c;
    return build_inclass_net(spec, seed);
}

std::vector<Tensor2> random_batches(std::size_t v_count, std::size_t n, std::uint64_t seed) {
    SplitMix64 rng(seed);
    std::vector<Tensor2> batches;
    for (std::size_t v = 0; v < v_count; ++v)
        batches.push_back(testutil::random_batch(n, 1, rng));
    return batches;
}

} // namespace

TEST_CASE("neg_ctc is zero for uniform outputs") {
    for (std::size_t v_count : {2, 3}) {
        for (std::size_t c : {1, 2, 5}) {
            const BatchOutputs outputs = uniform_outputs(64, c, v_count);
            CHECK(std::abs(neg_ctc_cost(outputs)) < 1e-12);
        }
    }
}

TEST_CASE("neg_ctc is zero for any input-ignoring classifier") {
    // Row-constant outputs carry no dependence between variates.
    BatchOutputs outputs;
    for (std::size_t v = 0; v < 2; ++v) {
        Tensor2 beta(128, 3);
        for (std::size_t r = 0; r < 128; ++r) {
            beta.at(r, 0) = 0.2;
            beta.at(r, 1) = 0.5;
            beta.at(r, 2) = 0.3;
        }
        outputs.beta.push_back(std::move(beta));
    }
    CHECK(std::abs(neg_ctc_cost(outputs)) < 1e-12);
    CHECK(std::abs(unnorm_neg_ctc_cost(outputs)) < 1e-12);
}

TEST_CASE("neg_ctc on hard checkerboard labels approaches -ln 2") {
    const BatchOutputs outputs = checkerboard_hard_outputs(10000, 1234);
    const double cost = neg_ctc_cost(outputs);
    CHECK(std::abs(cost + std::log(2.0)) < 0.02);
    // Independent oracle: with one-hot outputs the cost telescopes to the
    // negative entropy of the empirical class split.
    const double p = outputs.beta[0].column_means()[0];
    const double entropy = -(p * std::log(p) + (1.0 - p) * std::log(1.0 - p));
    CHECK(cost == doctest::Approx(-entropy).epsilon(1e-10));
}

TEST_CASE("neg_cmi equals neg_ctc for two variates") {
    SplitMix64 rng(77);
    BatchOutputs outputs;
    outputs.beta.push_back(testutil::random_simplex_rows(128, 3, rng));
    outputs.beta.push_back(testutil::random_simplex_rows(128, 3, rng));
    CHECK(std::abs(neg_cmi_cost(outputs) - neg_ctc_cost(outputs)) < 1e-12);
    CHECK(std::abs(unnorm_neg_cmi_cost(outputs) - unnorm_neg_ctc_cost(outputs)) < 1e-12);

    BatchOutputs three = uniform_outputs(16, 2, 3);
    CHECK_THROWS_AS((void)neg_cmi_cost(three), dimension_error);
    CHECK_THROWS_AS((void)unnorm_neg_cmi_cost(three), dimension_error);
    CHECK_THROWS_AS((void)neg_mi_cost(three), dimension_error);
}

TEST_CASE("unnorm dominates neg_ctc on random batches") {
    SplitMix64 rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t c = 2 + rng.next_index(3);
        const std::size_t v_count = 2 + rng.next_index(2);
        BatchOutputs outputs;
        for (std::size_t v = 0; v < v_count; ++v)
            outputs.beta.push_back(testutil::random_simplex_rows(64, c, rng));
        const double gap = unnorm_neg_ctc_cost(outputs) - neg_ctc_cost(outputs);
        CHECK(gap >= -1e-12);
    }
    // Equality at exactly uniform outputs (column means all 1/C).
    const BatchOutputs uniform = uniform_outputs(32, 4, 2);
    CHECK(std::abs(unnorm_neg_ctc_cost(uniform) - neg_ctc_cost(uniform)) < 1e-12);
}

TEST_CASE("degenerate pseudo weight raises with component and variate") {
    BatchOutputs outputs;
    Tensor2 bx(32, 2, 0.0);
    for (std::size_t r = 0; r < 32; ++r) bx.at(r, 0) = 1.0;  // phi_1x = 0
    outputs.beta.push_back(bx);
    outputs.beta.push_back(Tensor2(32, 2, 0.5));
    try {
        (void)neg_ctc_cost(outputs);
        FAIL("expected degenerate_component_error");
    } catch (const degenerate_component_error& e) {
        CHECK(e.component() == 1);
        CHECK(e.variate() == 0);
    }
}

TEST_CASE("regularizer terms") {
    const std::vector<double> uniform4 = {0.25, 0.25, 0.25, 0.25};
    RegularizerConfig cfg;
    cfg.lambda = 2.0;

    cfg.kind = RegularizerKind::shannon;
    CHECK(regularizer_term(uniform4, cfg) ==
          doctest::Approx(-2.0 * std::log(4.0)).epsilon(1e-12));

    cfg.kind = RegularizerKind::tikhonov;
    CHECK(regularizer_term(uniform4, cfg) == doctest::Approx(-2.0 / 4.0).epsilon(1e-12));

    cfg.kind = RegularizerKind::known_weights;
    cfg.lambda = 1.0;
    cfg.target_weights = {0.4, 0.6};
    const std::vector<double> w = {0.4, 0.6};
    CHECK(regularizer_term(w, cfg) == doctest::Approx(0.6730116670092565).epsilon(1e-9));

    const std::vector<double> degenerate = {0.0, 1.0};
    CHECK_THROWS_AS((void)regularizer_term(degenerate, cfg), numeric_error);
}

TEST_CASE("neg_tc basics") {
    // Row-constant outputs factorise exactly.
    BatchOutputs constant;
    Tensor2 bx(128, 2);
    Tensor2 by(128, 3);
    for (std::size_t r = 0; r < 128; ++r) {
        bx.at(r, 0) = 0.3;
        bx.at(r, 1) = 0.7;
        by.at(r, 0) = 0.2;
        by.at(r, 1) = 0.5;
        by.at(r, 2) = 0.3;
    }
    constant.beta = {bx, by};
    CHECK(std::abs(neg_tc_cost(constant)) < 1e-12);

    // Perfectly correlated one-hot labels with an even split: -ln 2.
    SplitMix64 rng(5);
    const std::size_t n = 10000;
    BatchOutputs correlated;
    correlated.beta.assign(2, Tensor2(n, 2, 0.0));
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t label = rng.next_index(2);
        correlated.beta[0].at(r, label) = 1.0;
        correlated.beta[1].at(r, label) = 1.0;
    }
    CHECK(std::abs(neg_tc_cost(correlated) + std::log(2.0)) < 0.02);
    CHECK(std::abs(neg_mi_cost(correlated) - neg_tc_cost(correlated)) < 1e-15);

    // Independent labels with different class counts: zero up to noise.
    const std::size_t big = 50000;
    BatchOutputs independent;
    independent.beta = {Tensor2(big, 2, 0.0), Tensor2(big, 3, 0.0)};
    for (std::size_t r = 0; r < big; ++r) {
        independent.beta[0].at(r, rng.next_index(2)) = 1.0;
        independent.beta[1].at(r, rng.next_index(3)) = 1.0;
    }
    CHECK(std::abs(neg_tc_cost(independent)) < 0.01);
}

TEST_CASE("cross entropy values") {
    const std::size_t n = 8, c = 4;
    Tensor2 perfect(n, c, 0.0);
    std::vector<int> labels(n);
    for (std::size_t r = 0; r < n; ++r) {
        labels[r] = static_cast<int>(r % c);
        perfect.at(r, static_cast<std::size_t>(labels[r])) = 1.0;
    }
    CHECK(std::abs(cross_entropy_supervised(perfect, labels)) < 1e-9);

    Tensor2 uniform(n, c, 1.0 / c);
    CHECK(cross_entropy_supervised(uniform, labels) ==
          doctest::Approx(std::log(4.0)).epsilon(1e-12));

    Tensor2 pair(1, 2);
    pair.at(0, 0) = 0.25;
    pair.at(0, 1) = 0.75;
    const std::vector<int> one = {1};
    CHECK(cross_entropy_supervised(pair, one) ==
          doctest::Approx(0.28768207245178085).epsilon(1e-12));

    const std::vector<int> bad = {4};
    Tensor2 row(1, 4, 0.25);
    CHECK_THROWS_AS((void)cross_entropy_supervised(row, bad), invalid_input_error);
}

TEST_CASE("costs are invariant under component permutation") {
    SplitMix64 rng(301);
    BatchOutputs outputs;
    outputs.beta.push_back(testutil::random_simplex_rows(200, 4, rng));
    outputs.beta.push_back(testutil::random_simplex_rows(200, 4, rng));

    const std::vector<std::size_t> perm = {2, 0, 3, 1};
    BatchOutputs permuted;
    for (const Tensor2& b : outputs.beta) {
        Tensor2 p(b.rows(), b.cols());
        for (std::size_t r = 0; r < b.rows(); ++r)
            for (std::size_t i = 0; i < b.cols(); ++i) p.at(r, i) = b.at(r, perm[i]);
        permuted.beta.push_back(std::move(p));
    }
    CHECK(std::abs(neg_ctc_cost(outputs) - neg_ctc_cost(permuted)) < 1e-12);
    CHECK(std::abs(unnorm_neg_ctc_cost(outputs) - unnorm_neg_ctc_cost(permuted)) < 1e-12);
    CHECK(std::abs(neg_tc_cost(outputs) - neg_tc_cost(permuted)) < 1e-12);
}

TEST_CASE("batch gradients match finite differences") {
    struct Case {
        CostKind kind;
        std::size_t v_count;
        std::size_t c;
        RegularizerConfig reg;
    };
    std::vector<Case> cases = {
        {CostKind::neg_ctc, 2, 2, {}},
        {CostKind::neg_cmi, 2, 3, {}},
        {CostKind::unnorm_neg_ctc, 2, 2, {}},
        {CostKind::neg_ctc, 3, 2, {}},
        {CostKind::neg_tc, 2, 2, {}},
        {CostKind::neg_tc, 3, 2, {}},
    };
    RegularizerConfig shannon{RegularizerKind::shannon, 0.5, {}};
    cases.push_back({CostKind::neg_ctc, 2, 2, shannon});
    RegularizerConfig tikhonov{RegularizerKind::tikhonov, 0.7, {}};
    cases.push_back({CostKind::neg_cmi, 2, 2, tikhonov});
    RegularizerConfig known{RegularizerKind::known_weights, 0.3, {0.3, 0.7}};
    cases.push_back({CostKind::neg_ctc, 2, 2, known});

    std::uint64_t seed = 1000;
    for (const Case& test_case : cases) {
        InClassNet net = small_net(test_case.v_count, test_case.c, 8, seed++);
        const std::vector<Tensor2> batches = random_batches(test_case.v_count, 256, seed++);
        const CostGradients cg =
            cost_gradient_batch(net, batches, test_case.kind, test_case.reg);
        CHECK(cg.cost ==
              doctest::Approx(cost_value(net, batches, test_case.kind, test_case.reg))
                  .epsilon(1e-12));
        const std::vector<double> analytic = testutil::flatten_gradients(cg);
        const std::vector<double> numeric =
            testutil::fd_cost_gradient(net, batches, test_case.kind, test_case.reg);
        CHECK(testutil::max_relative_error(analytic, numeric) < 1e-4);
    }
}

TEST_CASE("gradient at a uniform-output net has zero final bias gradient") {
    InClassNet net = small_net(2, 3, 8, 4242);
    for (std::size_t k = 0; k < net.paramset_count(); ++k) {
        auto& last = net.paramset(k).layers().back();
        last.weights.fill(0.0);
        std::fill(last.bias.begin(), last.bias.end(), 0.0);
    }
    const std::vector<Tensor2> batches = random_batches(2, 128, 17);
    const CostGradients cg = cost_gradient_batch(net, batches, CostKind::neg_ctc);
    for (std::size_t k = 0; k < net.paramset_count(); ++k) {
        const std::size_t params = net.paramset(k).parameter_count();
        for (std::size_t b = 0; b < 3; ++b)  // final three entries are the output bias
            CHECK(std::abs(cg.paramset_grads[k][params - 1 - b]) < 1e-12);
    }
}

TEST_CASE("gradient is invariant under row permutation of the batch") {
    InClassNet net = small_net(2, 2, 8, 555);
    const std::vector<Tensor2> batches = random_batches(2, 64, 556);

    std::vector<std::size_t> perm(64);
    for (std::size_t i = 0; i < 64; ++i) perm[i] = (i * 29 + 11) % 64;
    std::vector<Tensor2> permuted;
    for (const Tensor2& b : batches) permuted.push_back(b.gather_rows(perm));

    const auto g0 =
        testutil::flatten_gradients(cost_gradient_batch(net, batches, CostKind::neg_ctc));
    const auto g1 =
        testutil::flatten_gradients(cost_gradient_batch(net, permuted, CostKind::neg_ctc));
    for (std::size_t i = 0; i < g0.size(); ++i) CHECK(std::abs(g0[i] - g1[i]) < 1e-12);
}

TEST_CASE("moving gradients at decay zero equal batch gradients") {
    for (std::size_t v_count : {2, 3}) {
        InClassNet net = small_net(v_count, 2, 8, 808 + v_count);
        const std::vector<Tensor2> batches = random_batches(v_count, 200, 809 + v_count);

        MovingEstimates est = make_moving_estimates(2, v_count, 0.0);
        const auto moving = testutil::flatten_gradients(
            cost_gradient_moving(net, batches, est, CostKind::neg_ctc));
        const auto batch =
            testutil::flatten_gradients(cost_gradient_batch(net, batches, CostKind::neg_ctc));
        REQUIRE(moving.size() == batch.size());
        for (std::size_t i = 0; i < moving.size(); ++i)
            CHECK(std::abs(moving[i] - batch[i]) < 1e-10);
    }
}

TEST_CASE("moving gradients match finite differences at decay zero") {
    // The moving-mode gradient with exact in-batch statistics must agree with
    // the finite-difference derivative of the batch cost.
    InClassNet net = small_net(2, 2, 8, 7001);
    const std::vector<Tensor2> batches = random_batches(2, 256, 7002);
    MovingEstimates est = make_moving_estimates(2, 2, 0.0);
    const auto analytic =
        testutil::flatten_gradients(cost_gradient_moving(net, batches, est, CostKind::neg_cmi));
    const auto numeric = testutil::fd_cost_gradient(net, batches, CostKind::neg_cmi);
    CHECK(testutil::max_relative_error(analytic, numeric) < 1e-4);
}

TEST_CASE("moving estimates reach a fixed point on stationary data") {
    InClassNet net = small_net(2, 2, 8, 909);
    const std::vector<Tensor2> batches = random_batches(2, 128, 910);

    MovingEstimates est = make_moving_estimates(2, 2, 0.9);
    for (int burn = 0; burn < 400; ++burn)
        (void)cost_gradient_moving(net, batches, est, CostKind::neg_ctc);

    const auto first =
        testutil::flatten_gradients(cost_gradient_moving(net, batches, est, CostKind::neg_ctc));
    const auto second =
        testutil::flatten_gradients(cost_gradient_moving(net, batches, est, CostKind::neg_ctc));
    for (std::size_t i = 0; i < first.size(); ++i)
        CHECK(std::abs(first[i] - second[i]) < 1e-10);
}

TEST_CASE("moving estimate columns stay on the simplex") {
    InClassNet net = small_net(2, 3, 8, 4321);
    MovingEstimates est = make_moving_estimates(3, 2, 0.7);
    SplitMix64 rng(22);
    for (int step = 0; step < 25; ++step) {
        std::vector<Tensor2> batches;
        for (std::size_t v = 0; v < 2; ++v)
            batches.push_back(testutil::random_batch(64, 1, rng));
        (void)cost_gradient_moving(net, batches, est, CostKind::neg_ctc);
        for (std::size_t v = 0; v < 2; ++v) {
            double sum = 0.0;
            for (std::size_t i = 0; i < 3; ++i) {
                const double phi = est.phi_hat.at(i, v);
                CHECK(phi >= 0.0);
                CHECK(phi <= 1.0);
                sum += phi;
            }
            CHECK(std::abs(sum - 1.0) < 1e-6);
        }
    }
}
