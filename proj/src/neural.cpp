#include "uhisr/neural.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace uhisr {

std::string_view activation_name(Activation a) {
    switch (a) {
    case Activation::Linear: return "linear";
    case Activation::LeakyRelu: return "leaky_relu";
    case Activation::Sigmoid: return "sigmoid";
    }
    return "?";
}

std::size_t MlpSpec::parameter_count() const {
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l)
        total += static_cast<std::size_t>(sizes[l] + 1) * static_cast<std::size_t>(sizes[l + 1]);
    return total;
}

void MlpSpec::validate() const {
    if (sizes.size() < 2) throw ShapeError("MLP needs at least one layer");
    if (activations.size() != sizes.size() - 1)
        throw ShapeError("MLP needs one activation per layer");
    for (int s : sizes)
        if (s <= 0) throw ShapeError("MLP layer sizes must be positive");
    if (!std::isfinite(leak)) throw ShapeError("leak slope must be finite");
}

MlpSpec MlpSpec::dense(int inputs, std::vector<int> hidden, Activation output) {
    MlpSpec s;
    s.sizes.push_back(inputs);
    for (int h : hidden) {
        s.sizes.push_back(h);
        s.activations.push_back(Activation::LeakyRelu);
    }
    s.sizes.push_back(1);
    s.activations.push_back(output);
    return s;
}

bool MlpParams::operator==(const MlpParams& other) const {
    if (!(spec == other.spec) || weights.size() != other.weights.size()) return false;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (weights[l].rows() != other.weights[l].rows() || weights[l].cols() != other.weights[l].cols())
            return false;
        if (weights[l] != other.weights[l] || biases[l] != other.biases[l]) return false;
    }
    return true;
}

MlpParams zero_mlp(const MlpSpec& spec) {
    spec.validate();
    MlpParams p;
    p.spec = spec;
    for (std::size_t l = 0; l < spec.layers(); ++l) {
        p.weights.push_back(Matrix::Zero(spec.sizes[l + 1], spec.sizes[l]));
        p.biases.push_back(Vector::Zero(spec.sizes[l + 1]));
    }
    return p;
}

MlpParams init_mlp(const MlpSpec& spec, Rng& rng) {
    MlpParams p = zero_mlp(spec);
    for (std::size_t l = 0; l < spec.layers(); ++l) {
        const double bound = std::sqrt(1.0 / spec.sizes[l]);
        std::uniform_real_distribution<double> dist(-bound, bound);
        Matrix& W = p.weights[l];
        // Filled row by row so the draw order matches the persisted layout.
        for (Eigen::Index r = 0; r < W.rows(); ++r)
            for (Eigen::Index c = 0; c < W.cols(); ++c) W(r, c) = dist(rng);
    }
    return p;
}

namespace {

void check_input(const MlpParams& p, const Matrix& X) {
    if (X.rows() != p.spec.inputs())
        throw ShapeError("input has " + std::to_string(X.rows()) + " features, network expects " +
                         std::to_string(p.spec.inputs()));
}

void activate(Matrix& Z, Activation a, double leak) {
    switch (a) {
    case Activation::Linear: break;
    case Activation::LeakyRelu:
        Z = Z.unaryExpr([leak](double z) { return z > 0.0 ? z : leak * z; });
        break;
    case Activation::Sigmoid:
        Z = Z.unaryExpr([](double z) {
            if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
            const double e = std::exp(z);
            return e / (1.0 + e);
        });
        break;
    }
}

}  // namespace

Matrix forward(const MlpParams& p, const Matrix& X) {
    check_input(p, X);
    Matrix A = X;
    for (std::size_t l = 0; l < p.spec.layers(); ++l) {
        Matrix Z = p.weights[l] * A;
        Z.colwise() += p.biases[l];
        activate(Z, p.spec.activations[l], p.spec.leak);
        A = std::move(Z);
    }
    return A;
}

Matrix forward(const MlpParams& p, const Matrix& X, ForwardCache& cache) {
    check_input(p, X);
    cache.inputs.clear();
    cache.pre_activations.clear();
    Matrix A = X;
    for (std::size_t l = 0; l < p.spec.layers(); ++l) {
        Matrix Z = p.weights[l] * A;
        Z.colwise() += p.biases[l];
        cache.inputs.push_back(std::move(A));
        cache.pre_activations.push_back(Z);
        activate(Z, p.spec.activations[l], p.spec.leak);
        A = std::move(Z);
    }
    cache.output = A;
    return A;
}

Vector forward_one(const MlpParams& p, const Vector& x) {
    Matrix X = x;
    return forward(p, X).col(0);
}

Gradients Gradients::zeros_like(const MlpParams& p) {
    Gradients g;
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        g.weights.push_back(Matrix::Zero(p.weights[l].rows(), p.weights[l].cols()));
        g.biases.push_back(Vector::Zero(p.biases[l].size()));
    }
    return g;
}

Gradients backward(const MlpParams& p, const ForwardCache& cache, const Matrix& output_grad,
                   Matrix* input_grad) {
    const std::size_t L = p.spec.layers();
    if (cache.pre_activations.size() != L) throw ShapeError("cache does not match network");
    if (output_grad.rows() != cache.output.rows() || output_grad.cols() != cache.output.cols())
        throw ShapeError("output gradient shape does not match cached output");

    Gradients g;
    g.weights.resize(L);
    g.biases.resize(L);
    Matrix delta = output_grad;
    for (std::size_t l = L; l-- > 0;) {
        const Matrix& Z = cache.pre_activations[l];
        switch (p.spec.activations[l]) {
        case Activation::Linear: break;
        case Activation::LeakyRelu: {
            const double leak = p.spec.leak;
            delta = delta.cwiseProduct(Z.unaryExpr([leak](double z) { return z > 0.0 ? 1.0 : leak; }));
            break;
        }
        case Activation::Sigmoid: {
            Matrix S = Z;
            activate(S, Activation::Sigmoid, 0.0);
            delta = delta.cwiseProduct(S.cwiseProduct((1.0 - S.array()).matrix()));
            break;
        }
        }
        g.weights[l] = delta * cache.inputs[l].transpose();
        g.biases[l] = delta.rowwise().sum();
        if (l > 0 || input_grad) delta = p.weights[l].transpose() * delta;
    }
    if (input_grad) *input_grad = std::move(delta);
    return g;
}

double mse(const Matrix& prediction, const Matrix& target, Matrix* grad) {
    if (prediction.rows() != target.rows() || prediction.cols() != target.cols())
        throw ShapeError("prediction and target shapes differ");
    const Matrix diff = prediction - target;
    const auto n = static_cast<double>(diff.size());
    if (grad) *grad = (2.0 / n) * diff;
    return diff.squaredNorm() / n;
}

double batch_rmse(const Matrix& prediction, const Matrix& target) {
    return std::sqrt(mse(prediction, target));
}

AdamState::AdamState(const MlpParams& p) {
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        m_weights.push_back(Matrix::Zero(p.weights[l].rows(), p.weights[l].cols()));
        v_weights.push_back(m_weights.back());
        m_biases.push_back(Vector::Zero(p.biases[l].size()));
        v_biases.push_back(m_biases.back());
    }
}

void adam_step(MlpParams& p, const Gradients& g, AdamState& s, const AdamConfig& cfg) {
    if (g.weights.size() != p.weights.size() || s.m_weights.size() != p.weights.size())
        throw ShapeError("gradient or optimiser state does not match network");
    ++s.step;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(s.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(s.step));
    auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
        param.array() -= cfg.learning_rate * (m.array() / c1) /
                         ((v.array() / c2).sqrt() + cfg.epsilon);
    };
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        update(p.weights[l], g.weights[l], s.m_weights[l], s.v_weights[l]);
        update(p.biases[l], g.biases[l], s.m_biases[l], s.v_biases[l]);
    }
}

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
    if (!(adam.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be > 0");
}

double Mlp::fit_batch(const Matrix& X, const Matrix& y, const AdamConfig& cfg) {
    ForwardCache cache;
    Matrix pred = forward(params_, X, cache);
    Matrix grad;
    const double loss = mse(pred, y, &grad);
    adam_step(params_, backward(params_, cache, grad), adam_, cfg);
    return loss;
}

std::pair<MlpParams, TrainHistory> train(const MlpParams& init, const Matrix& X_train,
                                         const Matrix& y_train, const Matrix& X_valid,
                                         const Matrix& y_valid, const TrainConfig& cfg) {
    Mlp model(init);
    TrainHistory h = train_model(model, X_train, y_train, X_valid, y_valid, cfg);
    return {model.params(), std::move(h)};
}

namespace detail {

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng = make_stream(seed, 0x5348'0000ull + static_cast<std::uint64_t>(epoch));
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
}

Matrix gather_columns(const Matrix& M, const std::vector<std::size_t>& idx, std::size_t begin,
                      std::size_t end) {
    Matrix out(M.rows(), static_cast<Eigen::Index>(end - begin));
    for (std::size_t k = begin; k < end; ++k)
        out.col(static_cast<Eigen::Index>(k - begin)) = M.col(static_cast<Eigen::Index>(idx[k]));
    return out;
}

}  // namespace detail

}  // namespace uhisr
