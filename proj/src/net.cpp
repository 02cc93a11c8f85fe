#include "inclass/net.hpp"

#include <algorithm>
#include <string>

namespace inclass {

void Dataset::validate() const {
    if (variates.empty()) throw config_error("Dataset: no variates");
    const std::size_t n = variates[0].rows();
    for (std::size_t v = 1; v < variates.size(); ++v)
        if (variates[v].rows() != n)
            throw dimension_error("Dataset: variate " + std::to_string(v) +
                                  " row count differs from variate 0");
    if (labels && labels->size() != n)
        throw dimension_error("Dataset: label count differs from row count");
    for (std::size_t v = 0; v < variates.size(); ++v) variates[v].check_finite("Dataset");
}

InClassNet::InClassNet(std::vector<MLPClassifier> paramsets, std::vector<std::size_t> sharing,
                       std::uint64_t seed)
    : paramsets_(std::move(paramsets)), sharing_(std::move(sharing)), seed_(seed) {
    for (std::size_t id : sharing_)
        if (id >= paramsets_.size())
            throw config_error("InClassNet: sharing map references unknown parameter set");
}

bool InClassNet::uniform_class_count() const {
    for (std::size_t v = 1; v < variate_count(); ++v)
        if (class_count(v) != class_count(0)) return false;
    return true;
}

std::size_t InClassNet::components() const {
    if (!uniform_class_count())
        throw config_error("InClassNet: class counts differ across variates");
    return class_count(0);
}

std::size_t InClassNet::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : paramsets_) n += p.parameter_count();
    return n;
}

void InClassNet::permute_components(const std::vector<std::size_t>& perm) {
    for (auto& net : paramsets_) {
        if (perm.size() != net.output_dim())
            throw dimension_error("permute_components: permutation length mismatch");
        DenseLayer& last = net.layers().back();
        Tensor2 w = last.weights;
        std::vector<double> b = last.bias;
        for (std::size_t i = 0; i < perm.size(); ++i) {
            for (std::size_t c = 0; c < last.in_dim(); ++c)
                last.weights.at(i, c) = w.at(perm[i], c);
            last.bias[i] = b[perm[i]];
        }
    }
}

InClassNet build_inclass_net(const NetSpec& spec, std::uint64_t seed) {
    if (spec.variate_dims.empty()) throw config_error("build_inclass_net: no variates");
    if (spec.components == 0) throw config_error("build_inclass_net: zero components");
    for (std::size_t d : spec.variate_dims)
        if (d == 0) throw config_error("build_inclass_net: zero variate width");

    const std::size_t v_count = spec.variate_dims.size();
    std::vector<std::size_t> sharing = spec.sharing;
    if (sharing.empty()) {
        sharing.resize(v_count);
        for (std::size_t v = 0; v < v_count; ++v) sharing[v] = v;
    }
    if (sharing.size() != v_count)
        throw config_error("build_inclass_net: sharing map length differs from variate count");

    std::size_t num_sets = 0;
    for (std::size_t id : sharing) num_sets = std::max(num_sets, id + 1);
    std::vector<std::size_t> set_dim(num_sets, 0);
    for (std::size_t v = 0; v < v_count; ++v) {
        const std::size_t id = sharing[v];
        if (set_dim[id] == 0) {
            set_dim[id] = spec.variate_dims[v];
        } else if (set_dim[id] != spec.variate_dims[v]) {
            throw config_error("build_inclass_net: variates with unequal input widths "
                               "cannot share parameters (variate " +
                               std::to_string(v) + ")");
        }
    }
    for (std::size_t k = 0; k < num_sets; ++k)
        if (set_dim[k] == 0)
            throw config_error("build_inclass_net: parameter set " + std::to_string(k) +
                               " has no variates assigned");

    SplitMix64 rng(seed);
    std::vector<MLPClassifier> paramsets;
    paramsets.reserve(num_sets);
    for (std::size_t k = 0; k < num_sets; ++k)
        paramsets.emplace_back(set_dim[k], spec.hidden, spec.components, rng);
    return InClassNet(std::move(paramsets), std::move(sharing), seed);
}

} // namespace inclass
