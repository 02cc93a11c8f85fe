#include "inclass/nn.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>

namespace inclass {

std::vector<double> softmax(std::span<const double> logits) {
    for (double z : logits)
        if (!std::isfinite(z)) throw invalid_input_error("softmax: non-finite logit");
    double mx = logits[0];
    for (double z : logits) mx = std::max(mx, z);
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        sum += out[i];
    }
    const double inv = 1.0 / sum;
    for (double& v : out) v *= inv;
    return out;
}

void softmax_rows(Tensor2& logits) {
    const std::size_t c = logits.cols();
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        double* p = logits.row_ptr(r);
        double mx = p[0];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, p[j]);
        if (!std::isfinite(mx)) throw invalid_input_error("softmax: non-finite logit");
        double sum = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            p[j] = std::exp(p[j] - mx);
            sum += p[j];
        }
        const double inv = 1.0 / sum;
        for (std::size_t j = 0; j < c; ++j) p[j] *= inv;
    }
}

MLPClassifier::MLPClassifier(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                             std::size_t output_dim, SplitMix64& rng)
    : input_dim_(input_dim), output_dim_(output_dim) {
    if (input_dim == 0 || output_dim == 0)
        throw config_error("MLPClassifier: zero input or output width");
    std::vector<std::size_t> widths;
    widths.push_back(input_dim);
    for (std::size_t h : hidden) {
        if (h == 0) throw config_error("MLPClassifier: zero hidden width");
        widths.push_back(h);
    }
    widths.push_back(output_dim);

    layers_.reserve(widths.size() - 1);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const std::size_t fan_in = widths[l];
        const std::size_t fan_out = widths[l + 1];
        const bool final_layer = (l + 2 == widths.size());
        DenseLayer layer;
        layer.weights = Tensor2(fan_out, fan_in);
        layer.bias.assign(fan_out, 0.0);
        layer.activation = final_layer ? Activation::linear : Activation::relu;
        // He-uniform for ReLU, Glorot-uniform into the softmax head.
        const double limit = final_layer
                                 ? std::sqrt(6.0 / static_cast<double>(fan_in + fan_out))
                                 : std::sqrt(6.0 / static_cast<double>(fan_in));
        for (double& w : layer.weights.data()) w = rng.next_uniform(-limit, limit);
        layers_.push_back(std::move(layer));
    }
}

std::size_t MLPClassifier::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.parameter_count();
    return n;
}

namespace {

void dense_forward(const DenseLayer& layer, const Tensor2& input, Tensor2& pre, Tensor2& post) {
    matmul_nt(input, layer.weights, pre);
    const std::size_t c = pre.cols();
    for (std::size_t r = 0; r < pre.rows(); ++r) {
        double* p = pre.row_ptr(r);
        for (std::size_t j = 0; j < c; ++j) p[j] += layer.bias[j];
    }
    post = pre;
    if (layer.activation == Activation::relu) {
        for (double& v : post.data()) v = v > 0.0 ? v : 0.0;
    }
}

} // namespace

namespace {
unsigned g_eval_threads = 1;
}

void set_eval_threads(unsigned threads) { g_eval_threads = threads == 0 ? 1 : threads; }
unsigned eval_threads() { return g_eval_threads; }

Tensor2 MLPClassifier::forward(const Tensor2& batch) const {
    if (batch.cols() != input_dim_)
        throw dimension_error("forward: batch has " + std::to_string(batch.cols()) +
                              " columns, network expects " + std::to_string(input_dim_));
    const std::size_t n = batch.rows();
    if (g_eval_threads > 1 && n >= 4096) {
        // Row-partitioned evaluation; identical output to the serial path.
        const unsigned workers =
            static_cast<unsigned>(std::min<std::size_t>(g_eval_threads, n));
        Tensor2 out(n, output_dim_);
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&, w]() {
                const std::size_t begin = n * w / workers;
                const std::size_t end = n * (w + 1) / workers;
                if (begin == end) return;
                Tensor2 part(end - begin, batch.cols());
                for (std::size_t r = begin; r < end; ++r)
                    for (std::size_t c = 0; c < batch.cols(); ++c)
                        part.at(r - begin, c) = batch.at(r, c);
                const Tensor2 result = forward_serial(part);
                for (std::size_t r = begin; r < end; ++r)
                    for (std::size_t c = 0; c < output_dim_; ++c)
                        out.at(r, c) = result.at(r - begin, c);
            });
        }
        for (auto& t : pool) t.join();
        return out;
    }
    return forward_serial(batch);
}

Tensor2 MLPClassifier::forward_serial(const Tensor2& batch) const {
    Tensor2 cur = apply_input_transform(batch);
    Tensor2 pre, post;
    for (const auto& layer : layers_) {
        dense_forward(layer, cur, pre, post);
        cur = std::move(post);
    }
    softmax_rows(cur);
    return cur;
}

Tensor2 MLPClassifier::apply_input_transform(const Tensor2& batch) const {
    if (input_shift_.empty()) return batch;
    Tensor2 out = batch;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        double* p = out.row_ptr(r);
        for (std::size_t c = 0; c < input_dim_; ++c)
            p[c] = (p[c] - input_shift_[c]) * input_scale_[c];
    }
    return out;
}

void MLPClassifier::set_input_transform(std::vector<double> shift, std::vector<double> scale) {
    if (shift.size() != input_dim_ || scale.size() != input_dim_)
        throw dimension_error("input transform: length must equal the input width");
    input_shift_ = std::move(shift);
    input_scale_ = std::move(scale);
}

std::vector<double> MLPClassifier::backward(const Tensor2& batch, const Tensor2& upstream) const {
    if (batch.cols() != input_dim_)
        throw dimension_error("backward: batch width mismatch");
    const std::size_t n = batch.rows();
    const std::size_t num_layers = layers_.size();

    // Forward with caches.
    std::vector<Tensor2> inputs(num_layers);   // input to each layer
    std::vector<Tensor2> pre_act(num_layers);  // pre-activation of each layer
    Tensor2 cur = apply_input_transform(batch);
    for (std::size_t l = 0; l < num_layers; ++l) {
        inputs[l] = cur;
        Tensor2 pre, post;
        dense_forward(layers_[l], cur, pre, post);
        pre_act[l] = std::move(pre);
        cur = std::move(post);
    }
    Tensor2 probs = cur;
    softmax_rows(probs);

    if (upstream.rows() != n || upstream.cols() != output_dim_)
        throw dimension_error("backward: upstream gradient shape mismatch");

    // Softmax Jacobian: delta_i = p_i (u_i - sum_j u_j p_j).
    Tensor2 delta(n, output_dim_);
    for (std::size_t r = 0; r < n; ++r) {
        const double* p = probs.row_ptr(r);
        const double* u = upstream.row_ptr(r);
        double dot = 0.0;
        for (std::size_t j = 0; j < output_dim_; ++j) dot += u[j] * p[j];
        double* d = delta.row_ptr(r);
        for (std::size_t j = 0; j < output_dim_; ++j) d[j] = p[j] * (u[j] - dot);
    }
    if (layers_.back().activation == Activation::relu) {
        const Tensor2& pre = pre_act[num_layers - 1];
        for (std::size_t i = 0; i < delta.size(); ++i)
            if (pre.data()[i] <= 0.0) delta.data()[i] = 0.0;
    }

    std::vector<double> grad(parameter_count(), 0.0);
    // Flat offsets of each layer's weight block.
    std::vector<std::size_t> offset(num_layers);
    {
        std::size_t off = 0;
        for (std::size_t l = 0; l < num_layers; ++l) {
            offset[l] = off;
            off += layers_[l].parameter_count();
        }
    }

    // Loop invariant: delta holds dcost/d(pre-activation of layer l).
    for (std::size_t l = num_layers; l-- > 0;) {
        const DenseLayer& layer = layers_[l];
        Tensor2 grad_w;
        matmul_tn(delta, inputs[l], grad_w);  // out×in
        double* gw = grad.data() + offset[l];
        for (std::size_t i = 0; i < grad_w.size(); ++i) gw[i] = grad_w.data()[i];
        double* gb = grad.data() + offset[l] + layer.weights.size();
        for (std::size_t r = 0; r < n; ++r) {
            const double* d = delta.row_ptr(r);
            for (std::size_t j = 0; j < layer.out_dim(); ++j) gb[j] += d[j];
        }
        if (l == 0) break;
        Tensor2 below;
        matmul_nn(delta, layer.weights, below);  // N×in
        const Tensor2& pre_below = pre_act[l - 1];
        if (layers_[l - 1].activation == Activation::relu) {
            for (std::size_t i = 0; i < below.size(); ++i)
                if (pre_below.data()[i] <= 0.0) below.data()[i] = 0.0;
        }
        delta = std::move(below);
    }
    return grad;
}

std::vector<double> MLPClassifier::get_parameters() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (const auto& l : layers_) {
        out.insert(out.end(), l.weights.data().begin(), l.weights.data().end());
        out.insert(out.end(), l.bias.begin(), l.bias.end());
    }
    return out;
}

void MLPClassifier::set_parameters(std::span<const double> params) {
    if (params.size() != parameter_count())
        throw dimension_error("set_parameters: length mismatch");
    std::size_t off = 0;
    for (auto& l : layers_) {
        std::copy(params.begin() + off, params.begin() + off + l.weights.size(),
                  l.weights.data().begin());
        off += l.weights.size();
        std::copy(params.begin() + off, params.begin() + off + l.bias.size(), l.bias.begin());
        off += l.bias.size();
    }
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads) {
    if (params.size() != grads.size() || params.size() != state.first_moment.size())
        throw dimension_error("adam_step: parameter/gradient/state length mismatch");
    for (std::size_t i = 0; i < grads.size(); ++i)
        if (!std::isfinite(grads[i]))
            throw optimizer_error("adam_step: non-finite gradient", i);

    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        double& m = state.first_moment[i];
        double& v = state.second_moment[i];
        m = state.beta1 * m + (1.0 - state.beta1) * grads[i];
        v = state.beta2 * v + (1.0 - state.beta2) * grads[i] * grads[i];
        const double m_hat = m / bc1;
        const double v_hat = v / bc2;
        params[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
}

} // namespace inclass
