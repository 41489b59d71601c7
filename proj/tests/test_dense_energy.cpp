#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dsebm/dense_energy.hpp"
#include "dsebm/gradcheck.hpp"
#include "dsebm/numerics.hpp"
#include "oracles.hpp"

using namespace dsebm;

namespace {

DenseEnergyParams zero_one_layer(std::size_t d, std::size_t k) {
    DenseEnergyParams p;
    p.layers.push_back({Tensor::zeros({d, k}), Tensor::zeros({k})});
    p.prior_center = Tensor::zeros({d});
    return p;
}

DenseEnergyParams random_net(const std::vector<std::size_t>& dims, RngStream& rng) {
    DenseEnergyParams p = make_dense_params(
        dims[0], std::vector<std::size_t>(dims.begin() + 1, dims.end()), rng);
    for (Tensor* t : p.tensors()) {
        for (double& v : t->data) v = 0.8 * rng.next_gaussian();
    }
    return p;
}

}  // namespace

TEST_CASE("energy of the all-zero one-layer model") {
    DenseEnergyParams p = zero_one_layer(3, 4);
    DenseForward fwd = dense_forward(p, Tensor::zeros({3}));
    // each of the 4 units contributes softplus(0) = log 2
    CHECK(fwd.energy == doctest::Approx(-2.772588722239781).epsilon(1e-15));
    CHECK(fwd.activations.size() == 2);
    CHECK(fwd.preactivations.size() == 1);
}

TEST_CASE("zero weights leave only the bias softplus terms at x = prior") {
    DenseEnergyParams p = zero_one_layer(3, 5);
    RngStream rng(21);
    for (double& v : p.layers[0].bias.data) v = rng.next_gaussian();
    p.prior_center = rng.gaussian_tensor({3}, 1.0);
    double expected = 0.0;
    for (double b : p.layers[0].bias.data) expected -= softplus(b);
    CHECK(dense_forward(p, p.prior_center).energy == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("multi-layer energy matches the scalar-loop oracle") {
    RngStream rng(31);
    DenseEnergyParams p = random_net({3, 5, 2}, rng);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor x = rng.gaussian_tensor({3}, 1.0);
        CHECK(dense_forward(p, x).energy ==
              doctest::Approx(oracle::dense_energy_ref(p, x)).epsilon(1e-12));
    }
}

TEST_CASE("score of a zero-weight model is x minus the prior center") {
    DenseEnergyParams p = zero_one_layer(4, 3);
    RngStream rng(5);
    p.prior_center = rng.gaussian_tensor({4}, 1.0);
    Tensor x = rng.gaussian_tensor({4}, 1.0);
    Tensor score = dense_score(p, x);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(score.data[i] == doctest::Approx(x.data[i] - p.prior_center.data[i]).epsilon(1e-15));
    }
}

TEST_CASE("score matches finite differences of the energy") {
    RngStream rng(17);
    SUBCASE("one layer 4 -> 3") {
        DenseEnergyParams p = random_net({4, 3}, rng);
        Tensor x = rng.gaussian_tensor({4}, 1.0);
        Tensor numeric =
            finite_diff_grad([&](const Tensor& t) { return dense_forward(p, t).energy; }, x);
        CHECK(max_rel_error(dense_score(p, x), numeric) < 1e-6);
    }
    SUBCASE("three layers, ten points") {
        DenseEnergyParams p = random_net({5, 6, 4, 3}, rng);
        for (int trial = 0; trial < 10; ++trial) {
            Tensor x = rng.gaussian_tensor({5}, 1.0);
            Tensor numeric =
                finite_diff_grad([&](const Tensor& t) { return dense_forward(p, t).energy; }, x);
            CHECK(max_rel_error(dense_score(p, x), numeric) < 1e-6);
        }
    }
}

TEST_CASE("one-layer reconstruction equals the closed form on 100 random instances") {
    RngStream rng(101);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t d = 1 + rng.next_index(8);
        const std::size_t k = 1 + rng.next_index(8);
        DenseEnergyParams p = random_net({d, k}, rng);
        Tensor x = rng.gaussian_tensor({d}, 1.0);
        Tensor rec = dense_reconstruct(p, x);
        Tensor closed =
            oracle::one_layer_dae_ref(p.layers[0].weight, p.layers[0].bias, p.prior_center, x);
        for (std::size_t i = 0; i < d; ++i) {
            CHECK(rec.data[i] == doctest::Approx(closed.data[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("zero weights reconstruct to the prior center; prior is a fixed point") {
    DenseEnergyParams p = zero_one_layer(3, 4);
    RngStream rng(23);
    p.prior_center = rng.gaussian_tensor({3}, 1.0);
    Tensor x = rng.gaussian_tensor({3}, 1.0);
    CHECK(dense_reconstruct(p, x).data == p.prior_center.data);
    // the prior center has zero score, hence reconstructs to itself
    CHECK(squared_norm(dense_score(p, p.prior_center)) == 0.0);
    CHECK(dense_reconstruct(p, p.prior_center).data == p.prior_center.data);
}

TEST_CASE("reconstruction plus score recovers the input exactly") {
    RngStream rng(37);
    DenseEnergyParams p = random_net({4, 6, 3}, rng);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor x = rng.gaussian_tensor({4}, 1.0);
        Tensor score = dense_score(p, x);
        Tensor rebuilt = dense_reconstruct(p, x);
        rebuilt += score;
        // f is literally x - score, so recombination differs from x by at
        // most one rounding each way
        for (std::size_t i = 0; i < x.numel(); ++i) {
            const double scale = std::max({1.0, std::abs(x.data[i]), std::abs(score.data[i])});
            CHECK(std::abs(rebuilt.data[i] - x.data[i]) <= 1e-14 * scale);
        }
    }
}

TEST_CASE("energy is translation-covariant with its prior when weights vanish") {
    DenseEnergyParams p = zero_one_layer(3, 4);
    RngStream rng(41);
    for (double& v : p.layers[0].bias.data) v = rng.next_gaussian();
    p.prior_center = rng.gaussian_tensor({3}, 1.0);
    Tensor x = rng.gaussian_tensor({3}, 1.0);
    Tensor shift = rng.gaussian_tensor({3}, 1.0);
    const double before = dense_forward(p, x).energy;
    DenseEnergyParams shifted = p;
    shifted.prior_center += shift;
    Tensor x_shifted = x;
    x_shifted += shift;
    CHECK(dense_forward(shifted, x_shifted).energy == doctest::Approx(before).epsilon(1e-12));
}

TEST_CASE("perfect reconstruction yields all-zero parameter gradients") {
    DenseEnergyParams p = zero_one_layer(3, 4);
    RngStream rng(43);
    p.prior_center = rng.gaussian_tensor({3}, 1.0);
    Tensor noisy = rng.gaussian_tensor({3}, 1.0);
    // with zero weights f(noisy) == prior center; picking that as the clean
    // target makes the residual vanish
    DenseEnergyParams grad = DenseEnergyParams::zeros_like(p);
    const double loss = dense_param_grad(p, p.prior_center, noisy, grad);
    CHECK(loss == 0.0);
    for (const Tensor* t : grad.tensors()) {
        for (double v : t->data) CHECK(v == 0.0);
    }
}

TEST_CASE("parameter gradients match finite differences of the loss") {
    RngStream rng(47);
    DenseEnergyParams p = random_net({4, 5, 3}, rng);
    Tensor clean = rng.gaussian_tensor({4}, 1.0);
    Tensor noisy = rng.gaussian_tensor({4}, 1.0);
    DenseEnergyParams analytic = DenseEnergyParams::zeros_like(p);
    dense_param_grad(p, clean, noisy, analytic);

    DenseEnergyParams probe = p;
    auto probe_tensors = probe.tensors();
    auto analytic_tensors = analytic.tensors();
    const double h = 1e-5;
    for (std::size_t t = 0; t < probe_tensors.size(); ++t) {
        Tensor numeric = Tensor::zeros(probe_tensors[t]->shape);
        for (std::size_t i = 0; i < probe_tensors[t]->numel(); ++i) {
            const double saved = probe_tensors[t]->data[i];
            auto loss = [&](double v) {
                probe_tensors[t]->data[i] = v;
                Tensor residual = dense_reconstruct(probe, noisy);
                residual -= clean;
                return 0.5 * squared_norm(residual);
            };
            const double above = loss(saved + h);
            const double below = loss(saved - h);
            probe_tensors[t]->data[i] = saved;
            numeric.data[i] = (above - below) / (2.0 * h);
        }
        CHECK(max_rel_error(*analytic_tensors[t], numeric) < 1e-5);
    }
}

TEST_CASE("gradients are linear in the residual at a fixed noisy point") {
    RngStream rng(53);
    DenseEnergyParams p = random_net({3, 4}, rng);
    Tensor noisy = rng.gaussian_tensor({3}, 1.0);
    Tensor clean = rng.gaussian_tensor({3}, 1.0);
    Tensor rec = dense_reconstruct(p, noisy);

    // doubled residual: clean' = 2*clean - f(noisy)
    Tensor clean_doubled = clean;
    clean_doubled *= 2.0;
    clean_doubled -= rec;

    DenseEnergyParams g1 = DenseEnergyParams::zeros_like(p);
    DenseEnergyParams g2 = DenseEnergyParams::zeros_like(p);
    dense_param_grad(p, clean, noisy, g1);
    dense_param_grad(p, clean_doubled, noisy, g2);
    auto t1 = g1.tensors(), t2 = g2.tensors();
    for (std::size_t t = 0; t < t1.size(); ++t) {
        for (std::size_t i = 0; i < t1[t]->numel(); ++i) {
            CHECK(t2[t]->data[i] == doctest::Approx(2.0 * t1[t]->data[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("layer shape chaining is validated") {
    DenseEnergyParams p;
    p.prior_center = Tensor::zeros({3});
    p.layers.push_back({Tensor::zeros({3, 4}), Tensor::zeros({4})});
    p.layers.push_back({Tensor::zeros({5, 2}), Tensor::zeros({2})});  // 4 != 5
    CHECK_THROWS_AS(dense_forward(p, Tensor::zeros({3})), std::invalid_argument);
    CHECK_THROWS_AS(dense_forward(zero_one_layer(3, 4), Tensor::zeros({7})),
                    std::invalid_argument);
}
