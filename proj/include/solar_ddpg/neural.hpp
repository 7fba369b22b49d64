#pragma once

// Small dense feed-forward networks: rectifier hidden layers, identity or
// logistic output, exact reverse-mode gradients and Adam. Samples are the
// columns of the input matrix, so a single vector is a batch of one.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "solar_ddpg/errors.hpp"

namespace solar_ddpg::nn {

enum class Activation { Identity, Relu, Sigmoid };

inline const char* activation_name(Activation a) {
    switch (a) {
        case Activation::Identity: return "identity";
        case Activation::Relu: return "relu";
        case Activation::Sigmoid: return "sigmoid";
    }
    return "?";
}

inline Activation activation_from_name(const std::string& name) {
    if (name == "identity") return Activation::Identity;
    if (name == "relu") return Activation::Relu;
    if (name == "sigmoid") return Activation::Sigmoid;
    throw FormatError("unknown activation '" + name + "'");
}

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct DenseLayer {
    Matrix<Scalar> weight;  // out x in
    Vector<Scalar> bias;    // out

    Eigen::Index inputs() const { return weight.cols(); }
    Eigen::Index outputs() const { return weight.rows(); }
};

/// Parameters of a fully connected network. Also used to hold gradients and
/// optimizer moments, which share the parameter shape.
template <typename Scalar>
struct MlpParams {
    std::vector<DenseLayer<Scalar>> layers;
    Activation hidden_activation = Activation::Relu;
    Activation output_activation = Activation::Identity;

    Eigen::Index input_size() const { return layers.front().inputs(); }
    Eigen::Index output_size() const { return layers.back().outputs(); }

    std::vector<int> layer_sizes() const {
        std::vector<int> sizes{static_cast<int>(input_size())};
        for (const auto& l : layers) sizes.push_back(static_cast<int>(l.outputs()));
        return sizes;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
        return n;
    }

    bool same_shape(const MlpParams& other) const {
        if (layers.size() != other.layers.size()) return false;
        for (std::size_t i = 0; i < layers.size(); ++i)
            if (layers[i].weight.rows() != other.layers[i].weight.rows() ||
                layers[i].weight.cols() != other.layers[i].weight.cols())
                return false;
        return true;
    }

    MlpParams zeros_like() const {
        MlpParams z = *this;
        for (auto& l : z.layers) {
            l.weight.setZero();
            l.bias.setZero();
        }
        return z;
    }

    bool all_finite() const {
        for (const auto& l : layers)
            if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
        return true;
    }

    // Visits every scalar parameter in a fixed order (layer, weight col-major, bias).
    template <typename Fn>
    void for_each(Fn&& fn) {
        for (auto& l : layers) {
            for (Eigen::Index i = 0; i < l.weight.size(); ++i) fn(l.weight.data()[i]);
            for (Eigen::Index i = 0; i < l.bias.size(); ++i) fn(l.bias.data()[i]);
        }
    }

    bool operator==(const MlpParams& o) const {
        if (!same_shape(o) || hidden_activation != o.hidden_activation || output_activation != o.output_activation)
            return false;
        for (std::size_t i = 0; i < layers.size(); ++i)
            if (layers[i].weight != o.layers[i].weight || layers[i].bias != o.layers[i].bias) return false;
        return true;
    }
};

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
template <typename Scalar = double>
MlpParams<Scalar> init_mlp(const std::vector<int>& layer_sizes, Activation output_activation, std::uint64_t seed) {
    if (layer_sizes.size() < 2) throw ConfigError("an MLP needs at least an input and an output size");
    for (int s : layer_sizes)
        if (s <= 0) throw ConfigError("MLP layer sizes must be positive");

    std::mt19937_64 rng(seed);
    MlpParams<Scalar> p;
    p.output_activation = output_activation;
    for (std::size_t i = 0; i + 1 < layer_sizes.size(); ++i) {
        const int in = layer_sizes[i];
        const int out = layer_sizes[i + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        DenseLayer<Scalar> layer{Matrix<Scalar>(out, in), Vector<Scalar>::Zero(out)};
        for (Eigen::Index k = 0; k < layer.weight.size(); ++k) layer.weight.data()[k] = static_cast<Scalar>(dist(rng));
        p.layers.push_back(std::move(layer));
    }
    return p;
}

template <typename Scalar>
struct ForwardCache {
    Matrix<Scalar> input;
    std::vector<Matrix<Scalar>> pre;   // affine outputs per layer
    std::vector<Matrix<Scalar>> post;  // activated outputs per layer
};

namespace detail {

template <typename Derived>
auto activate(const Eigen::MatrixBase<Derived>& z, Activation a) {
    using Scalar = typename Derived::Scalar;
    Matrix<Scalar> out;
    switch (a) {
        case Activation::Identity: out = z; break;
        case Activation::Relu: out = z.cwiseMax(Scalar(0)); break;
        case Activation::Sigmoid: out = (Scalar(1) + (-z.array()).exp()).inverse().matrix(); break;
    }
    return out;
}

// d(activation)/dz applied to an upstream gradient.
template <typename Scalar>
Matrix<Scalar> activation_backward(const Matrix<Scalar>& pre, const Matrix<Scalar>& post, const Matrix<Scalar>& grad,
                                   Activation a) {
    switch (a) {
        case Activation::Identity: return grad;
        case Activation::Relu: return (pre.array() > Scalar(0)).select(grad, Scalar(0));
        case Activation::Sigmoid: return (grad.array() * post.array() * (Scalar(1) - post.array())).matrix();
    }
    return grad;
}

template <typename Scalar>
Activation layer_activation(const MlpParams<Scalar>& p, std::size_t i) {
    return i + 1 == p.layers.size() ? p.output_activation : p.hidden_activation;
}

}  // namespace detail

/// Output only; no cache kept.
template <typename Scalar, typename Derived>
Matrix<Scalar> predict(const MlpParams<Scalar>& params, const Eigen::MatrixBase<Derived>& input) {
    if (input.rows() != params.input_size())
        throw ShapeError("input has " + std::to_string(input.rows()) + " rows, network expects " +
                         std::to_string(params.input_size()));
    Matrix<Scalar> a = input;
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        const auto& l = params.layers[i];
        Matrix<Scalar> z(l.outputs(), a.cols());
        z.noalias() = l.weight * a;
        z.colwise() += l.bias;
        a = detail::activate(z, detail::layer_activation(params, i));
    }
    return a;
}

template <typename Scalar, typename Derived>
std::pair<Matrix<Scalar>, ForwardCache<Scalar>> forward(const MlpParams<Scalar>& params,
                                                        const Eigen::MatrixBase<Derived>& input) {
    if (input.rows() != params.input_size())
        throw ShapeError("input has " + std::to_string(input.rows()) + " rows, network expects " +
                         std::to_string(params.input_size()));
    ForwardCache<Scalar> cache;
    cache.input = input;
    cache.pre.reserve(params.layers.size());
    cache.post.reserve(params.layers.size());
    const Matrix<Scalar>* a = &cache.input;
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        const auto& l = params.layers[i];
        Matrix<Scalar> z(l.outputs(), a->cols());
        z.noalias() = l.weight * *a;
        z.colwise() += l.bias;
        cache.post.push_back(detail::activate(z, detail::layer_activation(params, i)));
        cache.pre.push_back(std::move(z));
        a = &cache.post.back();
    }
    return {cache.post.back(), std::move(cache)};
}

/// Gradients of sum_j <output_grad_j, output_j> over batch columns j, with
/// respect to parameters and input.
template <typename Scalar, typename Derived>
std::pair<MlpParams<Scalar>, Matrix<Scalar>> backward(const MlpParams<Scalar>& params, const ForwardCache<Scalar>& cache,
                                                      const Eigen::MatrixBase<Derived>& output_grad) {
    const std::size_t n = params.layers.size();
    bool matches = cache.pre.size() == n && cache.post.size() == n && cache.input.rows() == params.input_size();
    for (std::size_t i = 0; matches && i < n; ++i)
        matches = cache.pre[i].rows() == params.layers[i].outputs() && cache.pre[i].cols() == cache.input.cols();
    if (!matches) throw ContractViolation("forward cache does not belong to these parameters");
    if (output_grad.rows() != params.output_size() || output_grad.cols() != cache.input.cols())
        throw ShapeError("output gradient shape does not match the cached forward pass");

    MlpParams<Scalar> grads;
    grads.hidden_activation = params.hidden_activation;
    grads.output_activation = params.output_activation;
    grads.layers.resize(n);

    Matrix<Scalar> upstream = output_grad;
    for (std::size_t k = n; k-- > 0;) {
        const auto& l = params.layers[k];
        Matrix<Scalar> dz = detail::activation_backward(cache.pre[k], cache.post[k], upstream,
                                                        detail::layer_activation(params, k));
        const Matrix<Scalar>& prev = k == 0 ? cache.input : cache.post[k - 1];
        grads.layers[k].weight.noalias() = dz * prev.transpose();
        grads.layers[k].bias = dz.rowwise().sum();
        Matrix<Scalar> next(l.inputs(), dz.cols());
        next.noalias() = l.weight.transpose() * dz;
        upstream = std::move(next);
    }
    return {std::move(grads), std::move(upstream)};
}

/// Central differences of scalar_fn(predict(params, input)) per parameter,
/// with step h = rel_step * max(1, |theta|). The default rel_step is the cube
/// root of machine epsilon, which balances truncation and rounding error.
template <typename Scalar, typename Derived>
MlpParams<Scalar> finite_diff_grad(const MlpParams<Scalar>& params, const Eigen::MatrixBase<Derived>& input,
                                   const std::function<Scalar(const Matrix<Scalar>&)>& scalar_fn,
                                   Scalar rel_step = std::cbrt(std::numeric_limits<Scalar>::epsilon())) {
    MlpParams<Scalar> probe = params;
    MlpParams<Scalar> grads = params.zeros_like();
    const Matrix<Scalar> x = input;

    std::vector<Scalar*> slots;
    probe.for_each([&](Scalar& v) { slots.push_back(&v); });
    std::vector<Scalar*> out_slots;
    grads.for_each([&](Scalar& v) { out_slots.push_back(&v); });

    for (std::size_t i = 0; i < slots.size(); ++i) {
        const Scalar original = *slots[i];
        const Scalar h = rel_step * std::max(Scalar(1), std::abs(original));
        *slots[i] = original + h;
        const Scalar up = scalar_fn(predict(probe, x));
        *slots[i] = original - h;
        const Scalar down = scalar_fn(predict(probe, x));
        *slots[i] = original;
        *out_slots[i] = (up - down) / (Scalar(2) * h);
    }
    return grads;
}

template <typename Scalar>
struct AdamState {
    MlpParams<Scalar> first_moment;
    MlpParams<Scalar> second_moment;
    std::int64_t step = 0;
    Scalar beta1 = Scalar(0.9);
    Scalar beta2 = Scalar(0.999);
    Scalar epsilon = Scalar(1e-8);

    bool operator==(const AdamState&) const = default;
};

template <typename Scalar>
AdamState<Scalar> make_adam_state(const MlpParams<Scalar>& params) {
    AdamState<Scalar> s;
    s.first_moment = params.zeros_like();
    s.second_moment = params.zeros_like();
    return s;
}

/// One bias-corrected Adam step, in place. Parameters are left untouched if
/// any gradient is non-finite.
template <typename Scalar>
void adam_update(MlpParams<Scalar>& params, const MlpParams<Scalar>& grads, AdamState<Scalar>& state, Scalar lr) {
    if (!params.same_shape(grads) || !params.same_shape(state.first_moment) || !params.same_shape(state.second_moment))
        throw ShapeError("adam_update: parameter, gradient and moment shapes differ");
    if (!(lr > Scalar(0))) throw ConfigError("learning rate must be positive");
    if (!grads.all_finite()) throw NumericError("non-finite gradient in adam_update");

    state.step += 1;
    const Scalar bc1 = Scalar(1) - std::pow(state.beta1, static_cast<Scalar>(state.step));
    const Scalar bc2 = Scalar(1) - std::pow(state.beta2, static_cast<Scalar>(state.step));
    const Scalar b1 = state.beta1;
    const Scalar b2 = state.beta2;
    const Scalar eps = state.epsilon;

    auto apply = [&](auto& p, const auto& g, auto& m, auto& v) {
        m.array() = b1 * m.array() + (Scalar(1) - b1) * g.array();
        v.array() = b2 * v.array() + (Scalar(1) - b2) * g.array().square();
        p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
    };
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        apply(params.layers[i].weight, grads.layers[i].weight, state.first_moment.layers[i].weight,
              state.second_moment.layers[i].weight);
        apply(params.layers[i].bias, grads.layers[i].bias, state.first_moment.layers[i].bias,
              state.second_moment.layers[i].bias);
    }
}

}  // namespace solar_ddpg::nn
