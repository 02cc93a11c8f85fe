#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "inclass/classifier.hpp"
#include "inclass/nn.hpp"

namespace inclass {

/// Training/evaluation data: one matrix per variate (shared row count) and
/// optional integer component labels kept for evaluation only.
struct Dataset {
    std::vector<Tensor2> variates;
    std::optional<std::vector<int>> labels;

    std::size_t variate_count() const { return variates.size(); }
    std::size_t rows() const { return variates.empty() ? 0 : variates[0].rows(); }

    void validate() const;
};

/// V classifier networks, one per variate, with optional weight sharing:
/// `sharing[v]` names the parameter set backing variate v, so several
/// variates may be served by one underlying network.
class InClassNet : public VariateClassifier {
public:
    InClassNet() = default;
    InClassNet(std::vector<MLPClassifier> paramsets, std::vector<std::size_t> sharing,
               std::uint64_t seed);

    std::size_t variate_count() const override { return sharing_.size(); }
    std::size_t class_count(std::size_t v) const override {
        return paramsets_[sharing_[v]].output_dim();
    }
    std::size_t variate_dim(std::size_t v) const override {
        return paramsets_[sharing_[v]].input_dim();
    }
    Tensor2 eval(std::size_t v, const Tensor2& batch) const override {
        return paramsets_[sharing_[v]].forward(batch);
    }

    std::size_t paramset_count() const { return paramsets_.size(); }
    MLPClassifier& paramset(std::size_t k) { return paramsets_[k]; }
    const MLPClassifier& paramset(std::size_t k) const { return paramsets_[k]; }
    std::size_t paramset_of(std::size_t v) const { return sharing_[v]; }
    const std::vector<std::size_t>& sharing() const { return sharing_; }

    const MLPClassifier& classifier(std::size_t v) const { return paramsets_[sharing_[v]]; }

    /// All class counts equal (standard mixture mode) or per-variate
    /// (multi-label mode).
    bool uniform_class_count() const;

    /// Component count in standard mode; throws if class counts differ.
    std::size_t components() const;

    /// Total trainable parameter count over distinct parameter sets.
    std::size_t parameter_count() const;

    std::uint64_t seed() const { return seed_; }

    /// Applies a permutation to the component indices of every classifier by
    /// reordering final-layer rows. Costs and extracted models permute
    /// accordingly.
    void permute_components(const std::vector<std::size_t>& perm);

private:
    std::vector<MLPClassifier> paramsets_;
    std::vector<std::size_t> sharing_;  // variate -> paramset id
    std::uint64_t seed_ = 0;
};

struct NetSpec {
    std::vector<std::size_t> variate_dims;
    std::vector<std::size_t> hidden = {32, 32, 32};
    std::size_t components = 2;
    /// Empty means no sharing (one parameter set per variate); otherwise a
    /// map variate -> parameter-set id, with ids forming 0..K-1.
    std::vector<std::size_t> sharing;
};

/// Builds a deterministic, seeded InClass net. Sharing is only allowed
/// between variates with equal input widths.
InClassNet build_inclass_net(const NetSpec& spec, std::uint64_t seed);

} // namespace inclass
