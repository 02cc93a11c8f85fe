#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "inclass/classifier.hpp"
#include "inclass/net.hpp"
#include "inclass/rng.hpp"

namespace inclass {

/// One-dimensional sampling distribution used in ground-truth mixture
/// specifications. Piecewise-uniform segments are half-open [lo, hi) with
/// mass proportional to length.
struct Distribution1D {
    enum class Kind { normal, uniform, piecewise_uniform };
    Kind kind = Kind::normal;
    double mean = 0.0, sd = 1.0;  // normal
    double lo = 0.0, hi = 1.0;    // uniform
    std::vector<std::pair<double, double>> segments;

    static Distribution1D make_normal(double mean, double sd);
    static Distribution1D make_uniform(double lo, double hi);
    static Distribution1D make_piecewise_uniform(std::vector<std::pair<double, double>> segments);

    double pdf(double x) const;
    double cdf(double x) const;
    double sample(SplitMix64& rng) const;
};

/// Ground-truth conditional-independence mixture: weights plus one
/// distribution per (component, variate). Variates are one-dimensional here;
/// high-dimensional corpora are built separately (see build_paired_corpus).
struct MixtureSpec {
    std::vector<double> weights;
    std::vector<std::vector<Distribution1D>> components;  // [component][variate]

    std::size_t component_count() const { return weights.size(); }
    std::size_t variate_count() const { return components.empty() ? 0 : components[0].size(); }
    void validate() const;

    double marginal_pdf(std::size_t v, double x) const;
    double marginal_cdf(std::size_t v, double x) const;
};

struct GeneratedDataset {
    Dataset data;  // variates plus true component labels
    std::optional<MixtureSpec> spec;
    std::uint64_t seed = 0;
};

/// Samples N points: component index multinomial by the weights, then each
/// variate independently from its component distribution. Reproducible
/// bitwise from the seed.
GeneratedDataset sample_mixture(const MixtureSpec& spec, std::size_t n, std::uint64_t seed);

// Built-in example models.

/// Two equally-shaped bivariate Gaussian components at means -1 and +1
/// (sd 1.5 on both variates), weights (0.4, 0.6).
MixtureSpec two_gaussian_spec();

/// Two-component mixture whose samples tile the bright cells of a 4x4
/// checkerboard on [0,4)^2: component 0 has x and y in [0,1) u [2,3),
/// component 1 the complement cells, weights (0.5, 0.5).
MixtureSpec checkerboard_spec();

/// Four trivariate Gaussian components with weights (0.22, 0.28, 0.18, 0.32).
MixtureSpec four_gaussian_spec();

/// Single component with x and y independently uniform on [0,4): zero total
/// correlation.
MixtureSpec independent_uniform_spec();

/// Component membership of a point under the checkerboard mixture (cell
/// boundaries belong to the cell on the right/top).
int checkerboard_component(double x, double y);

GeneratedDataset sample_checkerboard(std::size_t n, std::uint64_t seed);

/// True classifier of a known mixture: alpha_i = w_i f_i(x) / sum_j w_j f_j(x).
/// Throws undefined_point_error when every component density vanishes at x.
std::vector<double> oracle_true_classifier(const MixtureSpec& spec, std::size_t v, double x);

/// VariateClassifier view of a mixture's true classifiers, for feeding the
/// extraction and diagnostics paths with exact inputs.
class OracleClassifier : public VariateClassifier {
public:
    explicit OracleClassifier(MixtureSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

    std::size_t variate_count() const override { return spec_.variate_count(); }
    std::size_t class_count(std::size_t) const override { return spec_.component_count(); }
    std::size_t variate_dim(std::size_t) const override { return 1; }
    Tensor2 eval(std::size_t v, const Tensor2& batch) const override;

    const MixtureSpec& spec() const { return spec_; }

private:
    MixtureSpec spec_;
};

/// A pool of labelled items used to assemble paired corpora.
struct LabeledPool {
    Tensor2 items;  // n×d
    std::vector<int> labels;
    std::size_t class_count = 0;
};

/// Ten classes of 16-dimensional unit-sd Gaussian blobs whose means sit on a
/// scaled axis arrangement with pairwise distance 4.
LabeledPool make_blob_pool(std::size_t per_class, std::uint64_t seed);

/// Paired-sample corpus: per datapoint a class is drawn uniformly, then two
/// items of that class independently with replacement. Both variates share
/// the class label.
GeneratedDataset build_paired_corpus(const LabeledPool& pool, std::size_t n, std::uint64_t seed);

} // namespace inclass
