#include "inclass/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace inclass {

namespace {
constexpr double kInvSqrt2Pi = 0.3989422804014326779399461;
}

Distribution1D Distribution1D::make_normal(double mean, double sd) {
    if (!(sd > 0.0)) throw config_error("normal distribution: sd must be positive");
    Distribution1D d;
    d.kind = Kind::normal;
    d.mean = mean;
    d.sd = sd;
    return d;
}

Distribution1D Distribution1D::make_uniform(double lo, double hi) {
    if (!(hi > lo)) throw config_error("uniform distribution: empty support");
    Distribution1D d;
    d.kind = Kind::uniform;
    d.lo = lo;
    d.hi = hi;
    return d;
}

Distribution1D Distribution1D::make_piecewise_uniform(
    std::vector<std::pair<double, double>> segments) {
    if (segments.empty()) throw config_error("piecewise uniform: no segments");
    for (const auto& [lo, hi] : segments)
        if (!(hi > lo)) throw config_error("piecewise uniform: empty segment");
    Distribution1D d;
    d.kind = Kind::piecewise_uniform;
    d.segments = std::move(segments);
    return d;
}

double Distribution1D::pdf(double x) const {
    switch (kind) {
        case Kind::normal: {
            const double z = (x - mean) / sd;
            return kInvSqrt2Pi / sd * std::exp(-0.5 * z * z);
        }
        case Kind::uniform:
            return (x >= lo && x < hi) ? 1.0 / (hi - lo) : 0.0;
        case Kind::piecewise_uniform: {
            double total = 0.0;
            bool inside = false;
            for (const auto& [a, b] : segments) {
                total += b - a;
                inside = inside || (x >= a && x < b);
            }
            return inside ? 1.0 / total : 0.0;
        }
    }
    return 0.0;
}

double Distribution1D::cdf(double x) const {
    switch (kind) {
        case Kind::normal:
            return 0.5 * std::erfc(-(x - mean) / (sd * std::sqrt(2.0)));
        case Kind::uniform:
            if (x <= lo) return 0.0;
            if (x >= hi) return 1.0;
            return (x - lo) / (hi - lo);
        case Kind::piecewise_uniform: {
            double total = 0.0;
            for (const auto& [a, b] : segments) total += b - a;
            double mass = 0.0;
            for (const auto& [a, b] : segments) {
                if (x >= b)
                    mass += b - a;
                else if (x > a)
                    mass += x - a;
            }
            return mass / total;
        }
    }
    return 0.0;
}

double Distribution1D::sample(SplitMix64& rng) const {
    switch (kind) {
        case Kind::normal:
            return mean + sd * rng.next_normal();
        case Kind::uniform:
            return rng.next_uniform(lo, hi);
        case Kind::piecewise_uniform: {
            double total = 0.0;
            for (const auto& [a, b] : segments) total += b - a;
            double u = rng.next_double() * total;
            for (const auto& [a, b] : segments) {
                const double len = b - a;
                if (u < len) return a + u;
                u -= len;
            }
            return segments.back().second;  // unreachable up to rounding
        }
    }
    return 0.0;
}

void MixtureSpec::validate() const {
    if (weights.empty()) throw config_error("mixture spec: no components");
    double sum = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw config_error("mixture spec: negative weight");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw config_error("mixture spec: weights must sum to 1");
    if (components.size() != weights.size())
        throw config_error("mixture spec: one distribution row per component required");
    const std::size_t v_count = components[0].size();
    if (v_count == 0) throw config_error("mixture spec: no variates");
    for (const auto& row : components)
        if (row.size() != v_count)
            throw config_error("mixture spec: ragged component/variate table");
}

double MixtureSpec::marginal_pdf(std::size_t v, double x) const {
    double p = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) p += weights[i] * components[i][v].pdf(x);
    return p;
}

double MixtureSpec::marginal_cdf(std::size_t v, double x) const {
    double p = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) p += weights[i] * components[i][v].cdf(x);
    return p;
}

GeneratedDataset sample_mixture(const MixtureSpec& spec, std::size_t n, std::uint64_t seed) {
    spec.validate();
    if (n == 0) throw config_error("sample_mixture: n must be positive");
    const std::size_t v_count = spec.variate_count();
    const std::size_t c = spec.component_count();

    GeneratedDataset out;
    out.spec = spec;
    out.seed = seed;
    out.data.variates.assign(v_count, Tensor2(n, 1));
    std::vector<int> labels(n);

    SplitMix64 rng(seed);
    for (std::size_t r = 0; r < n; ++r) {
        const double u = rng.next_double();
        std::size_t comp = c - 1;
        double acc = 0.0;
        for (std::size_t i = 0; i < c; ++i) {
            acc += spec.weights[i];
            if (u < acc) {
                comp = i;
                break;
            }
        }
        labels[r] = static_cast<int>(comp);
        for (std::size_t v = 0; v < v_count; ++v)
            out.data.variates[v].at(r, 0) = spec.components[comp][v].sample(rng);
    }
    out.data.labels = std::move(labels);
    return out;
}

MixtureSpec two_gaussian_spec() {
    MixtureSpec spec;
    spec.weights = {0.4, 0.6};
    spec.components = {
        {Distribution1D::make_normal(-1.0, 1.5), Distribution1D::make_normal(-1.0, 1.5)},
        {Distribution1D::make_normal(+1.0, 1.5), Distribution1D::make_normal(+1.0, 1.5)},
    };
    return spec;
}

MixtureSpec checkerboard_spec() {
    const std::vector<std::pair<double, double>> even = {{0.0, 1.0}, {2.0, 3.0}};
    const std::vector<std::pair<double, double>> odd = {{1.0, 2.0}, {3.0, 4.0}};
    MixtureSpec spec;
    spec.weights = {0.5, 0.5};
    spec.components = {
        {Distribution1D::make_piecewise_uniform(even), Distribution1D::make_piecewise_uniform(even)},
        {Distribution1D::make_piecewise_uniform(odd), Distribution1D::make_piecewise_uniform(odd)},
    };
    return spec;
}

MixtureSpec four_gaussian_spec() {
    auto normal = Distribution1D::make_normal;
    MixtureSpec spec;
    spec.weights = {0.22, 0.28, 0.18, 0.32};
    spec.components = {
        {normal(-1.0, 1.5), normal(-1.0, 1.5), normal(-1.0, 1.5)},
        {normal(+1.0, 1.5), normal(+1.0, 1.5), normal(0.0, 1.5)},
        {normal(-1.5, 1.5), normal(+1.5, 1.5), normal(+1.0, 1.5)},
        {normal(+1.5, 1.5), normal(-1.5, 1.5), normal(+2.0, 2.5)},
    };
    return spec;
}

MixtureSpec independent_uniform_spec() {
    MixtureSpec spec;
    spec.weights = {1.0};
    spec.components = {
        {Distribution1D::make_uniform(0.0, 4.0), Distribution1D::make_uniform(0.0, 4.0)},
    };
    return spec;
}

int checkerboard_component(double x, double y) {
    // On the mixture's support x and y fall in the same band parity, so the
    // x band alone decides membership.
    (void)y;
    const int cell = static_cast<int>(std::floor(x));
    return (cell == 0 || cell == 2) ? 0 : 1;
}

GeneratedDataset sample_checkerboard(std::size_t n, std::uint64_t seed) {
    return sample_mixture(checkerboard_spec(), n, seed);
}

std::vector<double> oracle_true_classifier(const MixtureSpec& spec, std::size_t v, double x) {
    const std::size_t c = spec.component_count();
    std::vector<double> alpha(c);
    double total = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
        alpha[i] = spec.weights[i] * spec.components[i][v].pdf(x);
        total += alpha[i];
    }
    if (total <= 0.0)
        throw undefined_point_error("oracle classifier: zero density at x = " +
                                    std::to_string(x));
    for (double& a : alpha) a /= total;
    return alpha;
}

Tensor2 OracleClassifier::eval(std::size_t v, const Tensor2& batch) const {
    if (batch.cols() != 1)
        throw dimension_error("oracle classifier: variates are one-dimensional");
    Tensor2 out(batch.rows(), spec_.component_count());
    for (std::size_t r = 0; r < batch.rows(); ++r) {
        const std::vector<double> alpha = oracle_true_classifier(spec_, v, batch.at(r, 0));
        for (std::size_t i = 0; i < alpha.size(); ++i) out.at(r, i) = alpha[i];
    }
    return out;
}

LabeledPool make_blob_pool(std::size_t per_class, std::uint64_t seed) {
    if (per_class == 0) throw config_error("blob pool: per_class must be positive");
    constexpr std::size_t kClasses = 10;
    constexpr std::size_t kDim = 16;
    // Means on scaled axes: distance between any two class means is exactly 4.
    const double scale = 4.0 / std::sqrt(2.0);

    LabeledPool pool;
    pool.class_count = kClasses;
    pool.items = Tensor2(per_class * kClasses, kDim);
    pool.labels.resize(per_class * kClasses);
    SplitMix64 rng(seed);
    std::size_t row = 0;
    for (std::size_t c = 0; c < kClasses; ++c) {
        for (std::size_t k = 0; k < per_class; ++k, ++row) {
            pool.labels[row] = static_cast<int>(c);
            for (std::size_t d = 0; d < kDim; ++d)
                pool.items.at(row, d) = (d == c ? scale : 0.0) + rng.next_normal();
        }
    }
    return pool;
}

GeneratedDataset build_paired_corpus(const LabeledPool& pool, std::size_t n,
                                     std::uint64_t seed) {
    if (n == 0) throw config_error("paired corpus: n must be positive");
    if (pool.class_count == 0) throw config_error("paired corpus: empty pool");
    std::vector<std::vector<std::size_t>> by_class(pool.class_count);
    for (std::size_t r = 0; r < pool.labels.size(); ++r) {
        const int label = pool.labels[r];
        if (label < 0 || static_cast<std::size_t>(label) >= pool.class_count)
            throw config_error("paired corpus: label out of range in pool");
        by_class[static_cast<std::size_t>(label)].push_back(r);
    }
    for (std::size_t c = 0; c < pool.class_count; ++c)
        if (by_class[c].empty())
            throw config_error("paired corpus: class " + std::to_string(c) + " is empty");

    const std::size_t dim = pool.items.cols();
    GeneratedDataset out;
    out.seed = seed;
    out.data.variates.assign(2, Tensor2(n, dim));
    std::vector<int> labels(n);
    SplitMix64 rng(seed);
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t c = rng.next_index(pool.class_count);
        labels[r] = static_cast<int>(c);
        for (std::size_t v = 0; v < 2; ++v) {
            const std::size_t pick = by_class[c][rng.next_index(by_class[c].size())];
            const double* src = pool.items.row_ptr(pick);
            double* dst = out.data.variates[v].row_ptr(r);
            for (std::size_t d = 0; d < dim; ++d) dst[d] = src[d];
        }
    }
    out.data.labels = std::move(labels);
    return out;
}

} // namespace inclass
