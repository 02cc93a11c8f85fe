#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "inclass/extraction.hpp"
#include "inclass/synthetic.hpp"
#include "test_support.hpp"

using namespace inclass;

namespace {

/// Classifier with row-constant outputs, one output vector per variate.
class ConstantClassifier : public VariateClassifier {
public:
    explicit ConstantClassifier(std::vector<std::vector<double>> beta)
        : beta_(std::move(beta)) {}

    std::size_t variate_count() const override { return beta_.size(); }
    std::size_t class_count(std::size_t v) const override { return beta_[v].size(); }
    std::size_t variate_dim(std::size_t) const override { return 1; }
    Tensor2 eval(std::size_t v, const Tensor2& batch) const override {
        Tensor2 out(batch.rows(), beta_[v].size());
        for (std::size_t r = 0; r < batch.rows(); ++r)
            for (std::size_t i = 0; i < beta_[v].size(); ++i) out.at(r, i) = beta_[v][i];
        return out;
    }

private:
    std::vector<std::vector<double>> beta_;
};

Dataset scalar_dataset(std::size_t n, std::size_t v_count, std::uint64_t seed) {
    SplitMix64 rng(seed);
    Dataset data;
    for (std::size_t v = 0; v < v_count; ++v)
        data.variates.push_back(testutil::random_batch(n, 1, rng, -3.0, 3.0));
    return data;
}

PseudoWeights fixed_pseudo(const Tensor2& phi) {
    PseudoWeights pw;
    pw.phi = phi;
    pw.w_tilde.resize(phi.rows());
    for (std::size_t i = 0; i < phi.rows(); ++i) {
        double log_sum = 0.0;
        for (std::size_t v = 0; v < phi.cols(); ++v) log_sum += std::log(phi.at(i, v));
        pw.w_tilde[i] = std::exp(log_sum / static_cast<double>(phi.cols()));
    }
    return pw;
}

} // namespace

TEST_CASE("pseudo weights of a uniform classifier are uniform") {
    const ConstantClassifier clf({{0.25, 0.25, 0.25, 0.25}, {0.25, 0.25, 0.25, 0.25}});
    const Dataset data = scalar_dataset(500, 2, 1);
    const PseudoWeights pw = estimate_pseudo_weights(clf, data);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(pw.w_tilde[i] == doctest::Approx(0.25).epsilon(1e-12));
        for (std::size_t v = 0; v < 2; ++v)
            CHECK(pw.phi.at(i, v) == doctest::Approx(0.25).epsilon(1e-12));
    }
    // Column sums are 1 by construction.
    for (std::size_t v = 0; v < 2; ++v) {
        double sum = 0.0;
        for (std::size_t i = 0; i < 4; ++i) sum += pw.phi.at(i, v);
        CHECK(std::abs(sum - 1.0) < 1e-9);
    }
}

TEST_CASE("unnormalised weights are geometric means") {
    const ConstantClassifier clf({{0.2, 0.8}, {0.5, 0.5}});
    const Dataset data = scalar_dataset(100, 2, 2);
    const PseudoWeights pw = estimate_pseudo_weights(clf, data);
    CHECK(pw.w_tilde[0] == doctest::Approx(std::sqrt(0.10)).epsilon(1e-12));
    CHECK(pw.w_tilde[1] == doctest::Approx(std::sqrt(0.40)).epsilon(1e-12));
    CHECK(pw.w_tilde[0] == doctest::Approx(0.31622776601683794).epsilon(1e-12));
    CHECK(pw.w_tilde[1] == doctest::Approx(0.63245553203367588).epsilon(1e-12));

    const std::vector<double> w = mixture_weights(pw);
    CHECK(w[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(w[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("mixture weights reject a vanished component") {
    PseudoWeights pw;
    pw.phi = Tensor2(2, 2, 0.5);
    pw.w_tilde = {0.0, 1.0};
    CHECK_THROWS_AS((void)mixture_weights(pw), degenerate_component_error);
}

TEST_CASE("corrected classifier and densities reject a floored pseudo weight") {
    const ConstantClassifier clf({{0.5, 0.5}, {0.5, 0.5}});
    PseudoWeights pw;
    pw.phi = Tensor2(2, 2, 0.5);
    pw.phi.at(1, 0) = 1e-9;
    pw.w_tilde = {0.5, 0.5};
    Tensor2 batch(1, 1, 0.0);
    CHECK_THROWS_AS((void)cic_classifier_batch(clf, pw, 0, batch), degenerate_component_error);

    const MarginalEstimator marginal =
        MarginalEstimator::analytic([](double) { return 1.0; }, 0.0, 1.0);
    const std::vector<double> grid = {0.1, 0.5, 0.9};
    CHECK_THROWS_AS((void)component_density(clf, pw, marginal, 0, grid),
                    degenerate_component_error);
}

TEST_CASE("component density requires a one-dimensional variate") {
    class WideClassifier : public VariateClassifier {
    public:
        std::size_t variate_count() const override { return 1; }
        std::size_t class_count(std::size_t) const override { return 2; }
        std::size_t variate_dim(std::size_t) const override { return 3; }
        Tensor2 eval(std::size_t, const Tensor2& batch) const override {
            return Tensor2(batch.rows(), 2, 0.5);
        }
    };
    const WideClassifier clf;
    PseudoWeights pw;
    pw.phi = Tensor2(2, 1, 0.5);
    pw.w_tilde = {0.5, 0.5};
    const MarginalEstimator marginal =
        MarginalEstimator::analytic([](double) { return 1.0; }, 0.0, 1.0);
    const std::vector<double> grid = {0.5};
    CHECK_THROWS_AS((void)component_density(clf, pw, marginal, 0, grid), config_error);
}

TEST_CASE("cic classifier hand values") {
    // Equal pseudo-weight columns: alpha reduces to beta.
    {
        const ConstantClassifier clf({{0.3, 0.7}, {0.3, 0.7}});
        Tensor2 phi(2, 2);
        phi.at(0, 0) = phi.at(0, 1) = 0.3;
        phi.at(1, 0) = phi.at(1, 1) = 0.7;
        const PseudoWeights pw = fixed_pseudo(phi);
        const std::vector<double> alpha = cic_classifier(clf, pw, 0, std::vector<double>{0.1});
        CHECK(alpha[0] == doctest::Approx(0.3).epsilon(1e-12));
        CHECK(alpha[1] == doctest::Approx(0.7).epsilon(1e-12));
    }
    // Asymmetric pseudo weights.
    {
        const ConstantClassifier clf({{0.5, 0.5}, {0.5, 0.5}});
        Tensor2 phi(2, 2);
        phi.at(0, 0) = 0.25;
        phi.at(1, 0) = 0.75;
        phi.at(0, 1) = 0.5;
        phi.at(1, 1) = 0.5;
        const PseudoWeights pw = fixed_pseudo(phi);
        const std::vector<double> alpha = cic_classifier(clf, pw, 0, std::vector<double>{0.1});
        CHECK(alpha[0] == doctest::Approx(0.63397459621556135).epsilon(1e-9));
        CHECK(alpha[1] == doctest::Approx(0.36602540378443865).epsilon(1e-9));
    }
}

TEST_CASE("cic classifier rows sum to one on random nets") {
    NetSpec spec;
    spec.variate_dims = {1, 1};
    spec.components = 3;
    const InClassNet net = build_inclass_net(spec, 5);
    const Dataset data = scalar_dataset(1000, 2, 6);
    const PseudoWeights pw = estimate_pseudo_weights(net, data);
    for (std::size_t v = 0; v < 2; ++v) {
        const Tensor2 alpha = cic_classifier_batch(net, pw, v, data.variates[v]);
        for (std::size_t r = 0; r < alpha.rows(); ++r) {
            double sum = 0.0;
            for (std::size_t i = 0; i < alpha.cols(); ++i) sum += alpha.at(r, i);
            CHECK(std::abs(sum - 1.0) < 1e-9);
        }
    }
}

TEST_CASE("aggregate classifier values") {
    // Uniform inputs stay uniform.
    {
        const ConstantClassifier clf({{0.5, 0.5}, {0.5, 0.5}});
        const PseudoWeights pw = fixed_pseudo(Tensor2(2, 2, 0.5));
        const std::vector<double> agg =
            aggregate_classifier(clf, pw, {{0.0}, {0.0}});
        CHECK(agg[0] == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(agg[1] == doctest::Approx(0.5).epsilon(1e-12));
    }
    // One-hot on both variates pins the component for any positive weights.
    {
        const ConstantClassifier clf({{1.0, 0.0}, {1.0, 0.0}});
        Tensor2 phi(2, 2);
        phi.at(0, 0) = 0.7;
        phi.at(0, 1) = 0.2;
        phi.at(1, 0) = 0.3;
        phi.at(1, 1) = 0.8;
        const std::vector<double> agg =
            aggregate_classifier(clf, fixed_pseudo(phi), {{0.0}, {0.0}});
        CHECK(agg[0] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(agg[1] == doctest::Approx(0.0).epsilon(1e-12));
    }
    // Hand-evaluated bivariate case.
    {
        const ConstantClassifier clf({{0.6, 0.4}, {0.7, 0.3}});
        const PseudoWeights pw = fixed_pseudo(Tensor2(2, 2, 0.5));
        const std::vector<double> agg =
            aggregate_classifier(clf, pw, {{0.0}, {0.0}});
        CHECK(agg[0] == doctest::Approx(7.0 / 9.0).epsilon(1e-9));
        CHECK(agg[1] == doctest::Approx(2.0 / 9.0).epsilon(1e-9));
        CHECK(std::abs(agg[0] - 0.7778) < 1e-4);
        CHECK(std::abs(agg[1] - 0.2222) < 1e-4);
    }
}

TEST_CASE("component density reduces to the marginal for uniform beta") {
    const ConstantClassifier clf({{0.5, 0.5}, {0.5, 0.5}});
    const Dataset data = scalar_dataset(5000, 2, 7);
    const PseudoWeights pw = estimate_pseudo_weights(clf, data);
    const std::vector<double> column = data.variates[0].column(0);
    const MarginalEstimator marginal = MarginalEstimator::histogram(column, 0);
    const std::vector<double> grid = default_grid(column);
    const auto f = component_density(clf, pw, marginal, 0, grid);
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const double truth = marginal.density(grid[g]);
        CHECK(f[0][g] == doctest::Approx(truth).epsilon(1e-12));
        CHECK(f[1][g] == doctest::Approx(truth).epsilon(1e-12));
    }
}

TEST_CASE("reconstruction identity holds for random nets") {
    NetSpec spec;
    spec.variate_dims = {1, 1};
    spec.components = 4;
    const InClassNet net = build_inclass_net(spec, 29);
    const Dataset data = scalar_dataset(3000, 2, 30);
    const PseudoWeights pw = estimate_pseudo_weights(net, data);
    const std::vector<double> w = mixture_weights(pw);
    for (std::size_t v = 0; v < 2; ++v) {
        const std::vector<double> column = data.variates[v].column(0);
        const MarginalEstimator marginal = MarginalEstimator::histogram(column, 0);
        const std::vector<double> grid = default_grid(column);
        const auto f = component_density(net, pw, marginal, v, grid);
        const auto p = model_marginal(net, pw, marginal, v, grid);
        for (std::size_t g = 0; g < grid.size(); ++g) {
            double mix = 0.0;
            for (std::size_t i = 0; i < 4; ++i) mix += w[i] * f[i][g];
            CHECK(std::abs(mix - p[g]) < 1e-9);
        }
    }
}

TEST_CASE("extraction is equivariant under component permutation") {
    NetSpec spec;
    spec.variate_dims = {1, 1};
    spec.components = 3;
    InClassNet net = build_inclass_net(spec, 31);
    const Dataset data = scalar_dataset(2000, 2, 32);

    const ExtractedModel before = extract_model(net, data);
    const std::vector<std::size_t> perm = {2, 0, 1};
    net.permute_components(perm);
    const ExtractedModel after = extract_model(net, data);

    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(after.weights[i] == doctest::Approx(before.weights[perm[i]]).epsilon(1e-12));
        for (std::size_t v = 0; v < 2; ++v)
            for (std::size_t g = 0; g < before.grids[v].size(); ++g) {
                CHECK(after.f[v][i][g] ==
                      doctest::Approx(before.f[v][perm[i]][g]).epsilon(1e-9));
                CHECK(after.alpha[v][i][g] ==
                      doctest::Approx(before.alpha[v][perm[i]][g]).epsilon(1e-9));
            }
    }
}

TEST_CASE("histogram marginal estimator") {
    SplitMix64 rng(41);
    std::vector<double> sample(100000);
    for (double& x : sample) x = rng.next_uniform(0.0, 4.0);
    const MarginalEstimator hist = MarginalEstimator::histogram(sample, 40);
    for (int b = 0; b < 40; ++b) {
        const double x = (b + 0.5) * 0.1;
        CHECK(std::abs(hist.density(x) - 0.25) < 0.05);
    }
    // Integrates to one by construction over its own bins.
    double mass = 0.0;
    const double width = (hist.support_hi() - hist.support_lo()) / 40.0;
    for (int b = 0; b < 40; ++b)
        mass += hist.density(hist.support_lo() + (b + 0.5) * width) * width;
    CHECK(std::abs(mass - 1.0) < 1e-9);
    CHECK(hist.density(-1.0) == 0.0);
    CHECK(hist.density(5.0) == 0.0);

    const std::vector<double> empty;
    CHECK_THROWS_AS((void)MarginalEstimator::histogram(empty, 10), invalid_input_error);
}

TEST_CASE("kde with Silverman bandwidth approximates a normal density") {
    SplitMix64 rng(43);
    std::vector<double> sample(100000);
    for (double& x : sample) x = rng.next_normal();
    const MarginalEstimator kde = MarginalEstimator::kde(sample, 0.0);
    CHECK(kde.bandwidth() > 0.0);

    std::vector<double> grid(201), err(201);
    constexpr double kInvSqrt2Pi = 0.3989422804014327;
    for (std::size_t g = 0; g < 201; ++g) {
        grid[g] = -4.0 + 8.0 * static_cast<double>(g) / 200.0;
        const double truth = kInvSqrt2Pi * std::exp(-0.5 * grid[g] * grid[g]);
        err[g] = std::abs(kde.density(grid[g]) - truth);
    }
    CHECK(trapezoid(grid, err) < 0.05);
}

TEST_CASE("extraction from exact oracle classifiers recovers the model") {
    const MixtureSpec spec = two_gaussian_spec();
    const OracleClassifier oracle(spec);
    const GeneratedDataset gen = sample_mixture(spec, 50000, 47);

    MarginalConfig mc;
    mc.kind = MarginalKind::analytic;
    mc.analytic_model = spec;
    const ExtractedModel model = extract_model(oracle, gen.data, mc);

    CHECK(std::abs(model.weights[0] - 0.4) < 0.01);
    CHECK(std::abs(model.weights[1] - 0.6) < 0.01);
    for (std::size_t v = 0; v < 2; ++v) {
        for (std::size_t i = 0; i < 2; ++i) {
            std::vector<double> err(model.grids[v].size());
            for (std::size_t g = 0; g < model.grids[v].size(); ++g)
                err[g] = std::abs(model.f[v][i][g] -
                                  spec.components[i][v].pdf(model.grids[v][g]));
            CHECK(trapezoid(model.grids[v], err) < 0.02);
        }
    }
}

TEST_CASE("multi-dimensional variates keep weights but no densities") {
    const LabeledPool pool = make_blob_pool(40, 51);
    const GeneratedDataset corpus = build_paired_corpus(pool, 2000, 53);
    NetSpec spec;
    spec.variate_dims = {16, 16};
    spec.components = 10;
    spec.sharing = {0, 0};
    const InClassNet net = build_inclass_net(spec, 55);
    const ExtractedModel model = extract_model(net, corpus.data);
    CHECK(model.weights.size() == 10);
    CHECK_FALSE(model.has_density[0]);
    CHECK_FALSE(model.has_density[1]);
    CHECK(model.f[0].empty());
}

TEST_CASE("default grid spans the central quantile range") {
    SplitMix64 rng(57);
    std::vector<double> sample(10000);
    for (double& x : sample) x = rng.next_normal();
    const std::vector<double> grid = default_grid(sample, 101);
    CHECK(grid.size() == 101);
    CHECK(grid.front() > -4.5);
    CHECK(grid.front() < -2.5);
    CHECK(grid.back() > 2.5);
    CHECK(grid.back() < 4.5);
    for (std::size_t g = 1; g < grid.size(); ++g) CHECK(grid[g] > grid[g - 1]);
}
