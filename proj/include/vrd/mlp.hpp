#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace vrd {

enum class Activation : std::uint32_t { Identity = 0, Relu = 1 };

struct Layer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> weights;  // out x in, row-major
    std::vector<double> biases;   // out
    Activation activation = Activation::Identity;
};

struct MlpParams {
    std::vector<Layer> layers;

    std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().in; }
    std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().out; }
    std::size_t param_count() const;
};

// Per-layer post-activation values kept for the backward pass.
struct MlpCache {
    std::vector<double> input;
    std::vector<std::vector<double>> pre;   // pre-activation per layer
    std::vector<std::vector<double>> post;  // post-activation per layer
};

// Gradient buffers shaped like MlpParams.
struct MlpGrads {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;

    explicit MlpGrads(const MlpParams& params);
    void clear();
    void scale(double s);
    void add(const MlpGrads& other);
};

// Hidden layers get the given activation, the final layer is linear.
// Weights fan-in-scaled uniform, biases zero; deterministic in rng state.
MlpParams make_mlp(const std::vector<std::size_t>& dims, Activation hidden_activation,
                   std::mt19937_64& rng);

std::vector<double> mlp_forward(const MlpParams& params, std::span<const double> x,
                                MlpCache* cache = nullptr);

// Backpropagates d_out (dLoss/dOutput), accumulates into grads, returns dLoss/dInput.
std::vector<double> mlp_backward(const MlpParams& params, const MlpCache& cache,
                                 std::span<const double> d_out, MlpGrads& grads);

// Numerically stable softmax (max subtraction).
std::vector<double> softmax(std::span<const double> logits);

// SGD with momentum; velocity buffers shaped like the parameters.
struct SgdState {
    std::vector<std::vector<double>> w_velocity;
    std::vector<std::vector<double>> b_velocity;

    explicit SgdState(const MlpParams& params);
};

void sgd_step(MlpParams& params, const MlpGrads& grads, SgdState& state, double lr,
              double momentum);

// Flat views used by the finite-difference gradient oracle in tests and
// by checkpoint serialization.
std::vector<double*> param_pointers(MlpParams& params);
std::vector<const double*> param_pointers(const MlpParams& params);
std::vector<double> flatten_grads(const MlpGrads& grads);

}  // namespace vrd
