#pragma once

#include <cstddef>

#include "inclass/tensor.hpp"

namespace inclass {

/// A per-variate simplex-valued classifier: anything that maps rows of
/// variate v to class-membership probabilities. Implemented by trained
/// networks and by analytic oracles, so extraction and diagnostics can run
/// on either.
class VariateClassifier {
public:
    virtual ~VariateClassifier() = default;

    virtual std::size_t variate_count() const = 0;
    virtual std::size_t class_count(std::size_t v) const = 0;
    virtual std::size_t variate_dim(std::size_t v) const = 0;

    /// Evaluates variate v on a batch (N×dim_v), returning N×C_v rows on the
    /// simplex.
    virtual Tensor2 eval(std::size_t v, const Tensor2& batch) const = 0;
};

} // namespace inclass
