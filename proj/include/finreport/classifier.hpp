#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "finreport/error.hpp"

namespace finreport {

enum class Label : int { positive = 0, neutral = 1, negative = 2 };
inline constexpr int kNumClasses = 3;

const char* to_string(Label label);

// Cross-sectional return labels: rank descending (ties by symbol), top floor(n/5)
// (at least 1) positive, next floor(2n/5) neutral, last floor(n/5) negative, the
// band in between unlabeled. Fewer than five symbols: everything unlabeled.
std::map<std::string, std::optional<Label>> assign_labels(const std::map<std::string, double>& returns);

struct LabelCounts {
    std::size_t positive, neutral, negative;
};
LabelCounts expected_label_counts(std::size_t n);

// W_alpha ⊙ [x_news; x_factors]
template <typename Derived1, typename Derived2, typename Derived3>
auto fuse(const Eigen::MatrixBase<Derived1>& x_news, const Eigen::MatrixBase<Derived2>& x_factors,
          const Eigen::MatrixBase<Derived3>& w_alpha) {
    using Scalar = typename Derived3::Scalar;
    if (x_news.size() + x_factors.size() != w_alpha.size())
        throw ValidationError("fuse: input length " + std::to_string(x_news.size() + x_factors.size()) +
                              " does not match w_alpha length " + std::to_string(w_alpha.size()));
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> stacked(w_alpha.size());
    stacked << x_news, x_factors;
    return Eigen::Matrix<Scalar, Eigen::Dynamic, 1>(w_alpha.cwiseProduct(stacked));
}

// Fusion weights plus a two-layer ReLU MLP with a 3-way softmax head.
template <typename Scalar>
struct MlpParams {
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    Vec w_alpha;
    Mat w1;  // hidden x input
    Vec b1;
    Mat w2;  // 3 x hidden
    Vec b2;
    double dropout_rate = 0.1;

    // w_alpha = 1, biases = 0, weights ~ U(±sqrt(6 / (fan_in + fan_out))).
    static MlpParams init(Eigen::Index input_dim, Eigen::Index hidden_dim, std::uint64_t seed,
                          double dropout_rate = 0.1) {
        std::mt19937_64 rng(seed);
        MlpParams p;
        p.dropout_rate = dropout_rate;
        p.w_alpha = Vec::Ones(input_dim);
        auto glorot = [&](Eigen::Index rows, Eigen::Index cols) {
            const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
            std::uniform_real_distribution<double> u(-limit, limit);
            Mat m(rows, cols);
            for (Eigen::Index j = 0; j < cols; ++j)
                for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = Scalar(u(rng));
            return m;
        };
        p.w1 = glorot(hidden_dim, input_dim);
        p.b1 = Vec::Zero(hidden_dim);
        p.w2 = glorot(kNumClasses, hidden_dim);
        p.b2 = Vec::Zero(kNumClasses);
        return p;
    }

    static MlpParams zeros(Eigen::Index input_dim, Eigen::Index hidden_dim) {
        MlpParams p;
        p.w_alpha = Vec::Zero(input_dim);
        p.w1 = Mat::Zero(hidden_dim, input_dim);
        p.b1 = Vec::Zero(hidden_dim);
        p.w2 = Mat::Zero(kNumClasses, hidden_dim);
        p.b2 = Vec::Zero(kNumClasses);
        return p;
    }

    Eigen::Index input_dim() const { return w1.cols(); }
    Eigen::Index hidden_dim() const { return w1.rows(); }
    Eigen::Index parameter_count() const {
        return w_alpha.size() + w1.size() + b1.size() + w2.size() + b2.size();
    }

    bool all_finite() const {
        return w_alpha.allFinite() && w1.allFinite() && b1.allFinite() && w2.allFinite() &&
               b2.allFinite();
    }

    // Visits every tensor as a flat view, in declaration order.
    template <typename Fn>
    void for_each_tensor(Fn&& fn) {
        fn("w_alpha", Eigen::Map<Vec>(w_alpha.data(), w_alpha.size()));
        fn("w1", Eigen::Map<Vec>(w1.data(), w1.size()));
        fn("b1", Eigen::Map<Vec>(b1.data(), b1.size()));
        fn("w2", Eigen::Map<Vec>(w2.data(), w2.size()));
        fn("b2", Eigen::Map<Vec>(b2.data(), b2.size()));
    }

    friend bool operator==(const MlpParams& a, const MlpParams& b) {
        return a.dropout_rate == b.dropout_rate && a.w_alpha == b.w_alpha && a.w1 == b.w1 &&
               a.b1 == b.b1 && a.w2 == b.w2 && a.b2 == b.b2;
    }
};

using Mlp = MlpParams<double>;

// Column-wise numerically stable softmax.
template <typename Derived>
auto softmax(const Eigen::MatrixBase<Derived>& logits) {
    using Scalar = typename Derived::Scalar;
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out = logits;
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
        out.col(j).array() -= out.col(j).maxCoeff();
        out.col(j) = out.col(j).array().exp().matrix();
        out.col(j) /= out.col(j).sum();
    }
    return out;
}

// Class probabilities for one fused feature vector. With training = true a
// seeded inverted-dropout mask is applied after the hidden activation.
template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, 3, 1> forward(const MlpParams<Scalar>& params, const Eigen::MatrixBase<Derived>& x,
                                    bool training = false, std::mt19937_64* rng = nullptr) {
    if (x.size() != params.input_dim())
        throw ValidationError("forward: input length " + std::to_string(x.size()) + ", expected " +
                              std::to_string(params.input_dim()));
    using Vec = typename MlpParams<Scalar>::Vec;
    Vec hidden = (params.w1 * x + params.b1).cwiseMax(Scalar(0));
    if (training && params.dropout_rate > 0.0) {
        if (rng == nullptr) throw std::invalid_argument("forward: dropout needs an rng");
        std::bernoulli_distribution keep(1.0 - params.dropout_rate);
        const Scalar scale = Scalar(1.0 / (1.0 - params.dropout_rate));
        for (Eigen::Index i = 0; i < hidden.size(); ++i) hidden(i) = keep(*rng) ? hidden(i) * scale : Scalar(0);
    }
    const Vec logits = params.w2 * hidden + params.b2;
    if (!logits.allFinite()) throw NumericalError("forward: non-finite logits");
    return softmax(logits);
}

// Fusion followed by forward(), for stacked [news; factors] inputs.
template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, 3, 1> predict_proba(const MlpParams<Scalar>& params,
                                          const Eigen::MatrixBase<Derived>& stacked) {
    return forward(params, (params.w_alpha.cwiseProduct(stacked)).eval());
}

// -ln y[label]; y[label] is clamped at 1e-12 with a warning.
double cross_entropy(const Eigen::Ref<const Eigen::VectorXd>& y, Label label);

// Mean cross-entropy over the columns of `stacked` (pre-fusion inputs) and its
// gradient with respect to every tensor. Dropout masks, when given, are
// hidden x batch matrices of already-scaled keep factors.
struct LossAndGradient {
    double loss = 0.0;
    Mlp gradient;
};
LossAndGradient loss_and_gradient(const Mlp& params, const Eigen::MatrixXd& stacked,
                                  std::span<const Label> labels,
                                  const Eigen::MatrixXd* dropout_mask = nullptr);

double batch_loss(const Mlp& params, const Eigen::MatrixXd& stacked, std::span<const Label> labels);

enum class Optimizer { sgd, momentum };

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t batch_size = 32;
    std::size_t epochs = 50;
    std::uint64_t rng_seed = 0;
    Eigen::Index hidden_dim = 1024;
    double dropout_rate = 0.1;
    Optimizer optimizer = Optimizer::sgd;
    double momentum = 0.9;
};

struct EpochMetrics {
    std::size_t epoch;
    double train_loss;
    double train_accuracy;
    std::optional<double> validation_loss;
};

struct LabeledSet {
    Eigen::MatrixXd inputs;  // stacked [news; factors], one column per sample
    std::vector<Label> labels;

    std::size_t size() const { return labels.size(); }
};

struct TrainResult {
    Mlp params;
    std::vector<EpochMetrics> history;
};

// Mini-batch training on cross-entropy. Deterministic given config.rng_seed.
// With a validation set the params of the lowest validation-loss epoch are returned.
TrainResult train(const LabeledSet& data, const TrainConfig& config,
                  const LabeledSet* validation = nullptr);

Label predict_label(const Mlp& params, const Eigen::Ref<const Eigen::VectorXd>& stacked);

struct ClassificationMetrics {
    double accuracy = 0.0;
    double f1 = 0.0;
    double recall = 0.0;
    double precision = 0.0;
};

// Macro-averaged over the three classes.
ClassificationMetrics classification_metrics(std::span<const Label> predicted, std::span<const Label> truth);
ClassificationMetrics evaluate(const Mlp& params, const LabeledSet& data);

// Per-feature standardisation fitted on training inputs.
struct FeatureScaler {
    Eigen::VectorXd mean;
    Eigen::VectorXd scale;

    static FeatureScaler fit(const Eigen::MatrixXd& inputs);
    Eigen::MatrixXd apply(const Eigen::MatrixXd& inputs) const;
    Eigen::VectorXd apply(const Eigen::VectorXd& input) const;
};

struct Checkpoint {
    Mlp params;
    FeatureScaler scaler;
    TrainConfig config;
    Eigen::Index role_dim = 0;
    Eigen::Index edge_dim = 0;
    std::vector<std::string> factor_names;
    std::string config_hash;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);

// Rejects files whose tensor shapes disagree with each other or, when given,
// with expected_input_dim.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<Eigen::Index> expected_input_dim = std::nullopt);

}  // namespace finreport
