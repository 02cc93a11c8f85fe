#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "inclass/rng.hpp"
#include "inclass/tensor.hpp"

namespace inclass {

enum class Activation { relu, linear };

struct DenseLayer {
    Tensor2 weights;           // out×in
    std::vector<double> bias;  // out
    Activation activation = Activation::relu;

    std::size_t in_dim() const { return weights.cols(); }
    std::size_t out_dim() const { return weights.rows(); }
    std::size_t parameter_count() const { return weights.size() + bias.size(); }
};

/// Numerically stable softmax: a constant shift of the logits leaves the
/// output unchanged, so the row maximum is subtracted before exponentiation.
std::vector<double> softmax(std::span<const double> logits);

/// In-place softmax over every row of a logits matrix.
void softmax_rows(Tensor2& logits);

/// Dense feed-forward classifier. Hidden layers use ReLU, the final layer is
/// linear and feeds a softmax head, so forward outputs lie on the C-simplex.
class MLPClassifier {
public:
    MLPClassifier() = default;

    /// He-uniform init for ReLU layers, Glorot-uniform for the final layer.
    MLPClassifier(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                  std::size_t output_dim, SplitMix64& rng);

    std::size_t input_dim() const { return input_dim_; }
    std::size_t output_dim() const { return output_dim_; }
    std::size_t parameter_count() const;

    const std::vector<DenseLayer>& layers() const { return layers_; }
    std::vector<DenseLayer>& layers() { return layers_; }

    /// Fixed (non-trainable) affine input transform applied before the first
    /// layer: x -> (x - shift) * scale per dimension. Set once from training
    /// data so ReLU hinges start inside the data range; persisted alongside
    /// the weights.
    void set_input_transform(std::vector<double> shift, std::vector<double> scale);
    bool has_input_transform() const { return !input_shift_.empty(); }
    const std::vector<double>& input_shift() const { return input_shift_; }
    const std::vector<double>& input_scale() const { return input_scale_; }

    /// Batch forward pass: batch is N×input_dim, the result N×C with every
    /// row on the simplex.
    Tensor2 forward(const Tensor2& batch) const;

    /// Gradient of sum(upstream ⊙ forward(batch)) with respect to all
    /// parameters, in the flat parameter order of get_parameters().
    std::vector<double> backward(const Tensor2& batch, const Tensor2& upstream) const;

    /// Flat parameter vector: per layer, weights row-major then bias.
    std::vector<double> get_parameters() const;
    void set_parameters(std::span<const double> params);

private:
    Tensor2 forward_serial(const Tensor2& batch) const;
    Tensor2 apply_input_transform(const Tensor2& batch) const;

    std::size_t input_dim_ = 0;
    std::size_t output_dim_ = 0;
    std::vector<DenseLayer> layers_;
    std::vector<double> input_shift_;
    std::vector<double> input_scale_;
};

/// Adam optimizer state bound to one flat parameter vector.
struct AdamState {
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    std::uint64_t step_count = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-7;

    static AdamState for_parameter_count(std::size_t n, double lr = 1e-3) {
        AdamState s;
        s.first_moment.assign(n, 0.0);
        s.second_moment.assign(n, 0.0);
        s.lr = lr;
        return s;
    }
};

/// One Adam update with bias correction. Throws optimizer_error with the
/// offending index when a gradient entry is not finite.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);

/// Thread count for large-batch forward evaluation. Rows are partitioned, so
/// outputs are identical regardless of the setting. Default 1.
void set_eval_threads(unsigned threads);
unsigned eval_threads();

} // namespace inclass
