#include "vrd/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vrd {

std::size_t MlpParams::param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.biases.size();
    return n;
}

MlpGrads::MlpGrads(const MlpParams& params) {
    weights.reserve(params.layers.size());
    biases.reserve(params.layers.size());
    for (const auto& l : params.layers) {
        weights.emplace_back(l.weights.size(), 0.0);
        biases.emplace_back(l.biases.size(), 0.0);
    }
}

void MlpGrads::clear() {
    for (auto& w : weights) std::fill(w.begin(), w.end(), 0.0);
    for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0);
}

void MlpGrads::scale(double s) {
    for (auto& w : weights)
        for (auto& v : w) v *= s;
    for (auto& b : biases)
        for (auto& v : b) v *= s;
}

void MlpGrads::add(const MlpGrads& other) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        for (std::size_t i = 0; i < weights[l].size(); ++i) weights[l][i] += other.weights[l][i];
        for (std::size_t i = 0; i < biases[l].size(); ++i) biases[l][i] += other.biases[l][i];
    }
}

MlpParams make_mlp(const std::vector<std::size_t>& dims, Activation hidden_activation,
                   std::mt19937_64& rng) {
    if (dims.size() < 2) throw std::invalid_argument("mlp needs at least input and output dims");
    MlpParams params;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        if (dims[i] == 0 || dims[i + 1] == 0) throw std::invalid_argument("zero layer dimension");
        Layer layer;
        layer.in = dims[i];
        layer.out = dims[i + 1];
        layer.activation = (i + 2 == dims.size()) ? Activation::Identity : hidden_activation;
        const double bound = std::sqrt(1.0 / static_cast<double>(layer.in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        layer.weights.resize(layer.in * layer.out);
        for (auto& w : layer.weights) w = dist(rng);
        layer.biases.assign(layer.out, 0.0);
        params.layers.push_back(std::move(layer));
    }
    return params;
}

std::vector<double> mlp_forward(const MlpParams& params, std::span<const double> x,
                                MlpCache* cache) {
    if (x.size() != params.input_dim()) {
        throw std::invalid_argument("mlp input dim mismatch: got " + std::to_string(x.size()) +
                                    ", expected " + std::to_string(params.input_dim()));
    }
    std::vector<double> cur(x.begin(), x.end());
    if (cache) {
        cache->input = cur;
        cache->pre.clear();
        cache->post.clear();
    }
    for (const auto& layer : params.layers) {
        std::vector<double> next(layer.out);
        for (std::size_t o = 0; o < layer.out; ++o) {
            double acc = layer.biases[o];
            const double* w = layer.weights.data() + o * layer.in;
            for (std::size_t i = 0; i < layer.in; ++i) acc += w[i] * cur[i];
            next[o] = acc;
        }
        if (cache) cache->pre.push_back(next);
        if (layer.activation == Activation::Relu) {
            for (auto& v : next) v = std::max(v, 0.0);
        }
        if (cache) cache->post.push_back(next);
        cur = std::move(next);
    }
    return cur;
}

std::vector<double> mlp_backward(const MlpParams& params, const MlpCache& cache,
                                 std::span<const double> d_out, MlpGrads& grads) {
    std::vector<double> delta(d_out.begin(), d_out.end());
    for (std::size_t li = params.layers.size(); li-- > 0;) {
        const auto& layer = params.layers[li];
        if (layer.activation == Activation::Relu) {
            for (std::size_t o = 0; o < layer.out; ++o) {
                if (cache.pre[li][o] <= 0.0) delta[o] = 0.0;
            }
        }
        const std::vector<double>& in = li == 0 ? cache.input : cache.post[li - 1];
        auto& gw = grads.weights[li];
        auto& gb = grads.biases[li];
        std::vector<double> d_in(layer.in, 0.0);
        for (std::size_t o = 0; o < layer.out; ++o) {
            const double d = delta[o];
            gb[o] += d;
            double* gwr = gw.data() + o * layer.in;
            const double* w = layer.weights.data() + o * layer.in;
            for (std::size_t i = 0; i < layer.in; ++i) {
                gwr[i] += d * in[i];
                d_in[i] += d * w[i];
            }
        }
        delta = std::move(d_in);
    }
    return delta;
}

std::vector<double> softmax(std::span<const double> logits) {
    double m = logits[0];
    for (double v : logits) m = std::max(m, v);
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - m);
        sum += out[i];
    }
    for (auto& v : out) v /= sum;
    return out;
}

SgdState::SgdState(const MlpParams& params) {
    for (const auto& l : params.layers) {
        w_velocity.emplace_back(l.weights.size(), 0.0);
        b_velocity.emplace_back(l.biases.size(), 0.0);
    }
}

void sgd_step(MlpParams& params, const MlpGrads& grads, SgdState& state, double lr,
              double momentum) {
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        auto& layer = params.layers[l];
        for (std::size_t i = 0; i < layer.weights.size(); ++i) {
            auto& v = state.w_velocity[l][i];
            v = momentum * v - lr * grads.weights[l][i];
            layer.weights[i] += v;
        }
        for (std::size_t i = 0; i < layer.biases.size(); ++i) {
            auto& v = state.b_velocity[l][i];
            v = momentum * v - lr * grads.biases[l][i];
            layer.biases[i] += v;
        }
    }
}

std::vector<double*> param_pointers(MlpParams& params) {
    std::vector<double*> ptrs;
    for (auto& l : params.layers) {
        for (auto& w : l.weights) ptrs.push_back(&w);
        for (auto& b : l.biases) ptrs.push_back(&b);
    }
    return ptrs;
}

std::vector<const double*> param_pointers(const MlpParams& params) {
    std::vector<const double*> ptrs;
    for (const auto& l : params.layers) {
        for (const auto& w : l.weights) ptrs.push_back(&w);
        for (const auto& b : l.biases) ptrs.push_back(&b);
    }
    return ptrs;
}

std::vector<double> flatten_grads(const MlpGrads& grads) {
    std::vector<double> out;
    for (std::size_t l = 0; l < grads.weights.size(); ++l) {
        out.insert(out.end(), grads.weights[l].begin(), grads.weights[l].end());
        out.insert(out.end(), grads.biases[l].begin(), grads.biases[l].end());
    }
    return out;
}

}  // namespace vrd
