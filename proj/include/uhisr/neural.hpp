#pragma once

#include "uhisr/random.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace uhisr {

/// Column-major batches: one column per sample, one row per feature.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation : std::uint8_t { Linear = 0, LeakyRelu = 1, Sigmoid = 2 };

std::string_view activation_name(Activation a);

struct MlpSpec {
    std::vector<int> sizes;                // input, hidden..., output
    std::vector<Activation> activations;   // one per layer (sizes.size() - 1)
    double leak = 0.01;

    std::size_t layers() const { return activations.size(); }
    int inputs() const { return sizes.front(); }
    int outputs() const { return sizes.back(); }
    std::size_t parameter_count() const;
    void validate() const;
    bool operator==(const MlpSpec&) const = default;

    /// inputs -> hidden... -> 1 with leaky-rectifier hidden layers.
    static MlpSpec dense(int inputs, std::vector<int> hidden, Activation output);
};

struct MlpParams {
    MlpSpec spec;
    std::vector<Matrix> weights;  // layer l: sizes[l+1] x sizes[l]
    std::vector<Vector> biases;

    bool operator==(const MlpParams& other) const;
};

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Uniform weights in +-sqrt(1/fan_in), zero biases.
MlpParams init_mlp(const MlpSpec& spec, Rng& rng);
MlpParams zero_mlp(const MlpSpec& spec);

struct ForwardCache {
    std::vector<Matrix> inputs;           // input to each layer
    std::vector<Matrix> pre_activations;  // affine output of each layer
    Matrix output;
};

Matrix forward(const MlpParams& p, const Matrix& X);
Matrix forward(const MlpParams& p, const Matrix& X, ForwardCache& cache);
Vector forward_one(const MlpParams& p, const Vector& x);

struct Gradients {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;

    static Gradients zeros_like(const MlpParams& p);
};

/// Gradients of a scalar loss given dLoss/dOutput for the cached batch.
/// Also returns dLoss/dInput through `input_grad` when it is non-null.
Gradients backward(const MlpParams& p, const ForwardCache& cache, const Matrix& output_grad,
                   Matrix* input_grad = nullptr);

/// Mean squared error over all entries; fills dLoss/dPrediction.
double mse(const Matrix& prediction, const Matrix& target, Matrix* grad = nullptr);

struct AdamConfig {
    double learning_rate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    std::vector<Matrix> m_weights, v_weights;
    std::vector<Vector> m_biases, v_biases;
    std::int64_t step = 0;

    explicit AdamState(const MlpParams& p);
    AdamState() = default;
};

void adam_step(MlpParams& p, const Gradients& g, AdamState& state, const AdamConfig& cfg);

struct TrainConfig {
    int epochs = 1000;
    int batch_size = 2048;
    AdamConfig adam{};
    std::uint64_t seed = 0;

    void validate() const;
};

struct TrainHistory {
    std::vector<double> train_loss;  // mean minibatch MSE per epoch
    std::vector<double> valid_rmse;
    int best_epoch = -1;             // 0-based
    double best_valid_rmse = 0.0;

    bool operator==(const TrainHistory&) const = default;
};

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Anything trainable by minibatch descent on a 1 x n target.
template <typename M>
concept TrainableModel = std::copyable<M> && requires(M& m, const M& cm, const Matrix& X,
                                                       const Matrix& y, const AdamConfig& cfg) {
    { cm.predict(X) } -> std::convertible_to<Matrix>;
    { m.fit_batch(X, y, cfg) } -> std::convertible_to<double>;
};

/// Minibatch MSE descent with a fresh shuffle per epoch and best-validation
/// checkpointing; `model` ends up holding the best checkpoint.
template <TrainableModel M>
TrainHistory train_model(M& model, const Matrix& X_train, const Matrix& y_train,
                         const Matrix& X_valid, const Matrix& y_valid, const TrainConfig& cfg,
                         const std::function<void(int, const TrainHistory&)>& on_epoch = {});

/// A single MLP with its optimiser state.
class Mlp {
public:
    explicit Mlp(MlpParams params) : params_(std::move(params)), adam_(params_) {}

    Matrix predict(const Matrix& X) const { return forward(params_, X); }
    double fit_batch(const Matrix& X, const Matrix& y, const AdamConfig& cfg);

    const MlpParams& params() const { return params_; }

private:
    MlpParams params_;
    AdamState adam_;
};

/// Trains an MLP on columns X (features x samples) and row-vector y.
std::pair<MlpParams, TrainHistory> train(const MlpParams& init, const Matrix& X_train,
                                         const Matrix& y_train, const Matrix& X_valid,
                                         const Matrix& y_valid, const TrainConfig& cfg);

double batch_rmse(const Matrix& prediction, const Matrix& target);

// ---------------------------------------------------------------- template

namespace detail {
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch);
Matrix gather_columns(const Matrix& M, const std::vector<std::size_t>& idx, std::size_t begin,
                      std::size_t end);
}  // namespace detail

template <TrainableModel M>
TrainHistory train_model(M& model, const Matrix& X_train, const Matrix& y_train,
                         const Matrix& X_valid, const Matrix& y_valid, const TrainConfig& cfg,
                         const std::function<void(int, const TrainHistory&)>& on_epoch) {
    cfg.validate();
    const auto n = static_cast<std::size_t>(X_train.cols());
    if (n == 0 || X_valid.cols() == 0) throw std::invalid_argument("training needs non-empty splits");
    if (y_train.cols() != X_train.cols() || y_valid.cols() != X_valid.cols())
        throw ShapeError("feature and target sample counts differ");

    TrainHistory history;
    M best = model;
    const auto batch = static_cast<std::size_t>(cfg.batch_size);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = detail::epoch_order(n, cfg.seed, epoch);
        double loss_sum = 0.0;
        int batches = 0;
        for (std::size_t begin = 0; begin < n; begin += batch) {
            const std::size_t end = std::min(n, begin + batch);
            Matrix xb = detail::gather_columns(X_train, order, begin, end);
            Matrix yb = detail::gather_columns(y_train, order, begin, end);
            const double loss = model.fit_batch(xb, yb, cfg.adam);
            if (!std::isfinite(loss))
                throw TrainingError("non-finite training loss at epoch " + std::to_string(epoch + 1) +
                                    ", batch starting at row " + std::to_string(begin));
            loss_sum += loss;
            ++batches;
        }
        const double valid = batch_rmse(model.predict(X_valid), y_valid);
        if (!std::isfinite(valid))
            throw TrainingError("non-finite validation RMSE at epoch " + std::to_string(epoch + 1));
        history.train_loss.push_back(loss_sum / batches);
        history.valid_rmse.push_back(valid);
        if (history.best_epoch < 0 || valid < history.best_valid_rmse) {
            history.best_epoch = epoch;
            history.best_valid_rmse = valid;
            best = model;
        }
        if (on_epoch) on_epoch(epoch, history);
    }
    model = best;
    return history;
}

}  // namespace uhisr
