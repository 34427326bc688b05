#include "gradcheck.hpp"
#include "uhisr/neural.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace uhisr;

static_assert(TrainableModel<Mlp>);

TEST_SUITE("neural") {

TEST_CASE("dense spec shapes and parameter counts") {
    MlpSpec s = MlpSpec::dense(3, {50, 50}, Activation::Linear);
    CHECK(s.sizes == std::vector<int>{3, 50, 50, 1});
    CHECK(s.activations ==
          std::vector<Activation>{Activation::LeakyRelu, Activation::LeakyRelu, Activation::Linear});
    // 3*50+50 + 50*50+50 + 50+1
    CHECK(s.parameter_count() == 2801);
    MlpSpec bad = s;
    bad.activations.pop_back();
    CHECK_THROWS_AS(bad.validate(), ShapeError);
}

TEST_CASE("initialisation is bounded by the fan-in rule") {
    Rng rng = make_stream(31, 0);
    MlpParams p = init_mlp(MlpSpec::dense(4, {16}, Activation::Linear), rng);
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        const double bound = std::sqrt(1.0 / static_cast<double>(p.weights[l].cols()));
        CHECK(p.weights[l].cwiseAbs().maxCoeff() <= bound);
        CHECK(p.weights[l].cwiseAbs().maxCoeff() > 0.5 * bound);
        CHECK(p.biases[l].isZero());
    }
    Rng again = make_stream(31, 0);
    CHECK(init_mlp(MlpSpec::dense(4, {16}, Activation::Linear), again) == p);
}

TEST_CASE("forward pass on a hand-built network") {
    MlpSpec spec{{2, 2, 1}, {Activation::LeakyRelu, Activation::Linear}, 0.01};
    MlpParams p = zero_mlp(spec);
    p.weights[0] << 1, -1, 0.5, 2;
    p.biases[0] << 0, -1;
    p.weights[1] << 2, 3;
    p.biases[1] << 0.5;
    Vector x(2);
    x << 1, 2;
    // hidden pre-activations (-1, 3.5) -> (-0.01, 3.5); output 2*-0.01 + 3*3.5 + 0.5
    CHECK(forward_one(p, x)[0] == doctest::Approx(10.98).epsilon(1e-15));
    p.spec.activations.back() = Activation::Sigmoid;
    CHECK(forward_one(p, x)[0] == doctest::Approx(1.0 / (1.0 + std::exp(-10.98))).epsilon(1e-15));
    CHECK_THROWS_AS(forward(p, Matrix::Zero(3, 1)), ShapeError);
}

TEST_CASE("backward matches central differences") {
    Rng rng = make_stream(32, 0);
    for (int trial = 0; trial < 5; ++trial) {
        MlpParams p = testgen::random_network(rng);
        Matrix X = testgen::random_matrix(rng, p.spec.inputs(), 3);
        Matrix R = testgen::random_matrix(rng, 1, 3);
        auto r = testgen::check_gradients(p, X, R);
        CHECK(r.max_rel_error <= 1e-5);
        CHECK(r.coordinates == p.spec.parameter_count() + static_cast<std::size_t>(X.size()));
    }
}

TEST_CASE("mean squared error and its gradient") {
    Matrix pred(1, 4), target(1, 4), grad;
    pred << 1, 2, 3, 4;
    target << 1, 2, 3, 6;
    CHECK(mse(pred, target, &grad) == 1.0);
    Matrix expect(1, 4);
    expect << 0, 0, 0, -1;
    CHECK(grad.isApprox(expect));
    CHECK(batch_rmse(pred, target) == 1.0);
    CHECK_THROWS_AS(mse(pred, Matrix::Zero(1, 3)), ShapeError);
}

TEST_CASE("first Adam step moves each parameter by about the learning rate") {
    MlpSpec spec{{1, 1}, {Activation::Linear}, 0.01};
    MlpParams p = zero_mlp(spec);
    p.weights[0](0, 0) = 1.0;
    Gradients g = Gradients::zeros_like(p);
    g.weights[0](0, 0) = 0.3;
    g.biases[0](0) = -2.0;
    AdamState st(p);
    AdamConfig cfg;
    adam_step(p, g, st, cfg);
    // Bias-corrected moments equal g and g^2 after one step.
    CHECK(p.weights[0](0, 0) == doctest::Approx(1.0 - 0.01 * 0.3 / (0.3 + 1e-8)).epsilon(1e-14));
    CHECK(p.biases[0](0) == doctest::Approx(0.01 * 2.0 / (2.0 + 1e-8)).epsilon(1e-14));
    CHECK(st.step == 1);
}

TEST_CASE("training fits a linear target and keeps the best checkpoint") {
    Rng rng = make_stream(33, 0);
    Matrix X = testgen::random_matrix(rng, 2, 400);
    Matrix y = (X.row(0) - 2.0 * X.row(1)).eval();
    Matrix Xv = testgen::random_matrix(rng, 2, 50);
    Matrix yv = (Xv.row(0) - 2.0 * Xv.row(1)).eval();
    MlpParams init = init_mlp(MlpSpec::dense(2, {16, 16}, Activation::Linear), rng);
    TrainConfig cfg;
    cfg.epochs = 200;
    cfg.batch_size = 64;
    cfg.seed = 9;
    auto [best, hist] = train(init, X, y, Xv, yv, cfg);
    CHECK(hist.train_loss.size() == 200);
    CHECK(hist.best_valid_rmse < 0.05);
    CHECK(hist.best_valid_rmse == doctest::Approx(batch_rmse(forward(best, Xv), yv)).epsilon(1e-12));
    for (double v : hist.valid_rmse) CHECK(v >= hist.best_valid_rmse);
    auto again = train(init, X, y, Xv, yv, cfg);
    CHECK(again.first == best);
    CHECK(again.second == hist);
}

TEST_CASE("non-finite losses abort training") {
    Matrix X = Matrix::Ones(1, 4);
    Matrix y = Matrix::Constant(1, 4, std::nan(""));
    Rng rng = make_stream(34, 0);
    MlpParams init = init_mlp(MlpSpec::dense(1, {4}, Activation::Linear), rng);
    TrainConfig cfg;
    cfg.epochs = 2;
    CHECK_THROWS_AS(train(init, X, y, X, y, cfg), TrainingError);
    cfg.epochs = 0;
    CHECK_THROWS(cfg.validate());
}

TEST_CASE("epoch shuffles are permutations that change per epoch") {
    auto a = detail::epoch_order(100, 5, 0);
    auto b = detail::epoch_order(100, 5, 1);
    CHECK(std::set<std::size_t>(a.begin(), a.end()).size() == 100);
    CHECK(a != b);
    CHECK(a == detail::epoch_order(100, 5, 0));
}

}
