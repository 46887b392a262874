#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "doctest.h"
#include "grad_check.hpp"
#include "vrd/mlp.hpp"

using namespace vrd;

TEST_CASE("init shapes and determinism") {
    std::mt19937_64 rng_a(5);
    std::mt19937_64 rng_b(5);
    auto a = make_mlp({22, 64, 64, 10}, Activation::Relu, rng_a);
    auto b = make_mlp({22, 64, 64, 10}, Activation::Relu, rng_b);
    REQUIRE(a.layers.size() == 3);
    CHECK(a.layers[0].in == 22);
    CHECK(a.layers[0].out == 64);
    CHECK(a.layers[2].out == 10);
    CHECK(a.layers[0].activation == Activation::Relu);
    CHECK(a.layers[2].activation == Activation::Identity);
    for (std::size_t l = 0; l < 3; ++l) {
        CHECK(a.layers[l].weights == b.layers[l].weights);
        for (double bias : a.layers[l].biases) CHECK(bias == 0.0);
    }
    std::mt19937_64 rng_c(6);
    auto c = make_mlp({22, 64, 64, 10}, Activation::Relu, rng_c);
    CHECK(a.layers[0].weights != c.layers[0].weights);
}

TEST_CASE("forward of zero weights is the bias") {
    MlpParams params;
    params.layers.push_back({3, 2, std::vector<double>(6, 0.0), {0.5, -1.0}, Activation::Identity});
    auto y = mlp_forward(params, std::vector<double>{1, 2, 3});
    CHECK(y[0] == 0.5);
    CHECK(y[1] == -1.0);
    CHECK_THROWS(mlp_forward(params, std::vector<double>{1, 2}));
}

TEST_CASE("softmax properties") {
    auto p = softmax(std::vector<double>{0.0, 0.0, 0.0, 0.0});
    for (double v : p) CHECK(v == doctest::Approx(0.25));
    // shift invariance
    auto a = softmax(std::vector<double>{1.0, -2.0, 0.5});
    auto b = softmax(std::vector<double>{1001.0, 998.0, 1000.5});
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(std::abs(a[i] - b[i]) <= 1e-9);
        CHECK(a[i] > 0.0);
        sum += a[i];
    }
    CHECK(std::abs(sum - 1.0) <= 1e-6);
}

TEST_CASE("analytic gradients match central differences") {
    std::mt19937_64 rng(41);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        auto params = make_mlp({4, 6, 5, 3}, Activation::Relu, rng);
        std::vector<double> x(4);
        for (auto& v : x) v = normal(rng);
        const int target = static_cast<int>(rng() % 3);

        auto loss = [&]() {
            auto probs = softmax(mlp_forward(params, x));
            return -std::log(probs[static_cast<std::size_t>(target)]);
        };

        MlpCache cache;
        auto probs = softmax(mlp_forward(params, x, &cache));
        std::vector<double> d_logits = probs;
        d_logits[static_cast<std::size_t>(target)] -= 1.0;
        MlpGrads grads(params);
        mlp_backward(params, cache, d_logits, grads);

        CHECK(vrd_test::checked_max_rel_error(param_pointers(params), flatten_grads(grads),
                                              loss) < vrd_test::kGradTol);
    }
}

TEST_CASE("backward returns the input gradient") {
    std::mt19937_64 rng(42);
    auto params = make_mlp({3, 4, 2}, Activation::Relu, rng);
    std::vector<double> x{0.3, -0.7, 1.2};
    auto loss = [&]() {
        auto y = mlp_forward(params, x);
        return y[0] * 2.0 + y[1];
    };
    MlpCache cache;
    mlp_forward(params, x, &cache);
    MlpGrads grads(params);
    auto d_in = mlp_backward(params, cache, std::vector<double>{2.0, 1.0}, grads);

    std::vector<double*> xs{&x[0], &x[1], &x[2]};
    CHECK(vrd_test::checked_max_rel_error(xs, d_in, loss) < vrd_test::kGradTol);
}

TEST_CASE("sgd with zero learning rate is a no-op") {
    std::mt19937_64 rng(43);
    auto params = make_mlp({3, 4, 2}, Activation::Relu, rng);
    const auto snapshot = params;
    MlpGrads grads(params);
    for (auto& g : grads.weights)
        for (auto& v : g) v = 1.0;
    SgdState state(params);
    sgd_step(params, grads, state, 0.0, 0.9);
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        CHECK(params.layers[l].weights == snapshot.layers[l].weights);
        CHECK(params.layers[l].biases == snapshot.layers[l].biases);
    }
}

TEST_CASE("sgd moves against the gradient") {
    std::mt19937_64 rng(44);
    auto params = make_mlp({2, 2}, Activation::Identity, rng);
    MlpGrads grads(params);
    grads.weights[0][0] = 1.0;
    SgdState state(params);
    const double before = params.layers[0].weights[0];
    sgd_step(params, grads, state, 0.1, 0.0);
    CHECK(params.layers[0].weights[0] == doctest::Approx(before - 0.1));
}
