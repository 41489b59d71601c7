#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dsebm/datasets.hpp"
#include "dsebm/errors.hpp"
#include "dsebm/dense_energy.hpp"
#include "dsebm/numerics.hpp"
#include "dsebm/training.hpp"

using namespace dsebm;

namespace {

std::vector<Sample> gaussian_inlier_samples(std::size_t n, std::uint64_t seed) {
    LabeledDataset raw = synth_gaussians(2 * n, 2, 6.0, seed);
    LabeledDataset split = make_contaminated(raw, {"normal"}, 0.2, 0.5, seed + 1);
    std::vector<Sample> out;
    NormStats stats = fit_norm_stats(split.samples(Split::train));
    for (const Sample& s : split.samples(Split::train)) out.push_back(stats.apply(s));
    return out;
}

EnergyModel fresh_dense_model(std::size_t d, std::uint64_t seed) {
    RngStream rng(seed);
    return make_dense_params(d, {8, 4}, rng);
}

}  // namespace

TEST_CASE("corrupt with zero sigma is the identity") {
    RngStream rng(1);
    Tensor x = rng.gaussian_tensor({5}, 1.0);
    Sample noisy = corrupt(Sample(x), 0.0, rng);
    CHECK(std::get<Tensor>(noisy).data == x.data);
}

TEST_CASE("corruption variance approaches sigma squared") {
    RngStream rng(2);
    const double sigma = 0.7;
    const std::size_t draws = 100000;
    Tensor x = Tensor::zeros({1});
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i = 0; i < draws; ++i) {
        const double v = std::get<Tensor>(corrupt(Sample(x), sigma, rng)).data[0];
        sum += v;
        sum_sq += v * v;
    }
    const double mean = sum / draws;
    const double var = sum_sq / draws - mean * mean;
    CHECK(var == doctest::Approx(sigma * sigma).epsilon(0.03));
}

TEST_CASE("corruption replays under a fixed seed") {
    Tensor x = Tensor::vector({1.0, -2.0, 0.5});
    RngStream a(77), b(77);
    Sample na = corrupt(Sample(x), 0.3, a);
    Sample nb = corrupt(Sample(x), 0.3, b);
    CHECK(std::get<Tensor>(na).data == std::get<Tensor>(nb).data);

    Sequence seq;
    seq.steps.push_back(x);
    seq.steps.push_back(x);
    RngStream c(78), d(78);
    Sample sc = corrupt(Sample(seq), 0.3, c);
    Sample sd = corrupt(Sample(seq), 0.3, d);
    for (int t = 0; t < 2; ++t) {
        CHECK(std::get<Sequence>(sc).steps[t].data == std::get<Sequence>(sd).steps[t].data);
    }
}

TEST_CASE("identity reconstruction turns the objective into the noise power") {
    // f(x + eps) = x + eps makes the objective mean ||eps||^2, expectation
    // d * sigma^2.
    RngStream rng(3);
    const double sigma = 0.5;
    const std::size_t d = 4;
    std::vector<Sample> batch;
    for (int i = 0; i < 3000; ++i) batch.push_back(Sample(rng.gaussian_tensor({d}, 1.0)));
    RngStream noise(4);
    const double objective =
        dae_objective_with([](const Sample& s) { return s; }, batch, sigma, noise);
    CHECK(objective == doctest::Approx(d * sigma * sigma).epsilon(0.05));
}

TEST_CASE("objective with a perfect fixed-point model and zero noise is zero") {
    DenseEnergyParams p;
    p.layers.push_back({Tensor::zeros({2, 3}), Tensor::zeros({3})});
    p.prior_center = Tensor::vector({0.25, -0.5});
    EnergyModel model = p;
    std::vector<Sample> batch{Sample(Tensor::vector({0.25, -0.5}))};
    RngStream rng(5);
    CHECK(dae_objective(model, batch, 0.0, rng) == 0.0);
}

TEST_CASE("objective is invariant under batch permutation") {
    RngStream rng(6);
    std::vector<Sample> batch;
    for (int i = 0; i < 16; ++i) batch.push_back(Sample(rng.gaussian_tensor({3}, 1.0)));
    EnergyModel model = fresh_dense_model(3, 6);

    RngStream n1(91), n2(91);
    const double forward_order = dae_objective(model, batch, 0.2, n1);
    std::vector<Sample> reversed(batch.rbegin(), batch.rend());
    const double reverse_order = dae_objective(model, reversed, 0.2, n2);
    CHECK(forward_order == reverse_order);
}

TEST_CASE("training halves the objective on the synthetic inlier set") {
    std::vector<Sample> samples = gaussian_inlier_samples(400, 11);
    EnergyModel model = fresh_dense_model(2, 12);
    TrainConfig config;
    config.epochs = 50;
    config.batch_size = 64;
    config.learning_rate = 0.05;
    config.noise_sigma = 0.1;
    config.seed = 13;
    TrainTrace trace = train(model, samples, config);
    REQUIRE(trace.epochs.size() == 50);
    CHECK(trace.epochs.back().mean_objective < 0.5 * trace.epochs.front().mean_objective);
}

TEST_CASE("zero learning rate leaves parameters untouched and the trace flat") {
    std::vector<Sample> samples = gaussian_inlier_samples(300, 21);
    EnergyModel model = fresh_dense_model(2, 22);
    std::vector<const Tensor*> before_tensors;
    for (Tensor* t : param_tensors(model)) before_tensors.push_back(t);
    const std::uint64_t before = checksum_tensors(before_tensors);

    TrainConfig config;
    config.epochs = 6;
    config.learning_rate = 0.0;
    config.seed = 23;
    TrainTrace trace = train(model, samples, config);

    std::vector<const Tensor*> after_tensors;
    for (Tensor* t : param_tensors(model)) after_tensors.push_back(t);
    CHECK(checksum_tensors(after_tensors) == before);
    CHECK(trace.final_checksum == before);

    // fresh corruption each epoch: values fluctuate but stay near one level
    double lo = trace.epochs[0].mean_objective, hi = lo;
    bool all_equal = true;
    for (const EpochStats& e : trace.epochs) {
        lo = std::min(lo, e.mean_objective);
        hi = std::max(hi, e.mean_objective);
        if (e.mean_objective != trace.epochs[0].mean_objective) all_equal = false;
    }
    CHECK((hi - lo) / hi < 0.5);
    CHECK_FALSE(all_equal);  // one corruption draw per sample per epoch
}

TEST_CASE("training replays bitwise under a fixed seed") {
    std::vector<Sample> samples = gaussian_inlier_samples(200, 31);
    TrainConfig config;
    config.epochs = 8;
    config.batch_size = 32;
    config.seed = 33;

    EnergyModel m1 = fresh_dense_model(2, 32);
    EnergyModel m2 = fresh_dense_model(2, 32);
    TrainTrace t1 = train(m1, samples, config);
    TrainTrace t2 = train(m2, samples, config);
    CHECK(t1.final_checksum == t2.final_checksum);
    REQUIRE(t1.epochs.size() == t2.epochs.size());
    for (std::size_t e = 0; e < t1.epochs.size(); ++e) {
        CHECK(t1.epochs[e].mean_objective == t2.epochs[e].mean_objective);
    }
}

TEST_CASE("small steps decrease the per-batch objective at least 95 percent of the time") {
    std::vector<Sample> samples = gaussian_inlier_samples(256, 41);
    EnergyModel model = fresh_dense_model(2, 42);
    RngStream rng(43);
    const double lr = 1e-4;
    const std::size_t batch_size = 32;

    std::size_t decreased = 0, steps = 0;
    for (int epoch = 0; epoch < 12; ++epoch) {
        for (std::size_t begin = 0; begin + batch_size <= samples.size(); begin += batch_size) {
            std::vector<Sample> noisy;
            for (std::size_t i = begin; i < begin + batch_size; ++i) {
                noisy.push_back(corrupt(samples[i], 0.1, rng));
            }
            auto batch_objective = [&]() {
                double total = 0.0;
                for (std::size_t i = 0; i < batch_size; ++i) {
                    Tensor residual = std::get<Tensor>(model_reconstruct(model, noisy[i]));
                    residual -= std::get<Tensor>(samples[begin + i]);
                    total += squared_norm(residual);
                }
                return total / batch_size;
            };
            const double before = batch_objective();
            EnergyModel grad = zeros_like(model);
            for (std::size_t i = 0; i < batch_size; ++i) {
                model_param_grad(model, samples[begin + i], noisy[i], grad, 1.0 / batch_size);
            }
            auto params = param_tensors(model);
            auto grads = param_tensors(grad);
            for (std::size_t t = 0; t < params.size(); ++t) {
                for (std::size_t i = 0; i < params[t]->numel(); ++i) {
                    params[t]->data[i] -= lr * grads[t]->data[i];
                }
            }
            if (batch_objective() < before) ++decreased;
            ++steps;
        }
    }
    CHECK(static_cast<double>(decreased) / static_cast<double>(steps) >= 0.95);
}

TEST_CASE("divergent settings abort with a numerical diagnostic") {
    std::vector<Sample> samples = gaussian_inlier_samples(100, 51);
    EnergyModel model = fresh_dense_model(2, 52);
    TrainConfig config;
    config.epochs = 60;
    config.learning_rate = 1e4;
    config.seed = 53;
    CHECK_THROWS_AS(train(model, samples, config), NumericError);
}

TEST_CASE("config validation") {
    TrainConfig config;
    config.batch_size = 0;
    CHECK_THROWS_AS(config.validate(), DataError);
    config = TrainConfig{};
    config.momentum = 1.0;
    CHECK_THROWS_AS(config.validate(), DataError);
    config = TrainConfig{};
    config.noise_sigma = -0.1;
    CHECK_THROWS_AS(config.validate(), DataError);
}

TEST_CASE("train_on_dataset fits normalization and recenters the prior") {
    LabeledDataset raw = synth_gaussians(600, 2, 6.0, 61);
    LabeledDataset split = make_contaminated(raw, {"normal"}, 0.2, 0.5, 62);
    TrainConfig config;
    config.epochs = 10;
    config.batch_size = 64;
    config.seed = 63;
    TrainResult result = train_on_dataset(fresh_dense_model(2, 64), split, config);
    CHECK(result.model.norm.enabled);
    CHECK(result.model.norm.mean.shape == std::vector<std::size_t>{2});
    CHECK(result.trace.epochs.size() == 10);
    // outliers in the training split are rejected
    LabeledDataset poisoned = split;
    for (auto& item : poisoned.items) item.split = Split::train;
    CHECK_THROWS_AS(train_on_dataset(fresh_dense_model(2, 64), poisoned, config), DataError);
}
