#include "finreport/classifier.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "finreport/diagnostics.hpp"

namespace finreport {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

const char* to_string(Label label) {
    switch (label) {
        case Label::positive: return "positive";
        case Label::neutral: return "neutral";
        case Label::negative: return "negative";
    }
    return "?";
}

LabelCounts expected_label_counts(std::size_t n) {
    if (n < 5) return {0, 0, 0};
    return {std::max<std::size_t>(1, n / 5), (2 * n) / 5, n / 5};
}

std::map<std::string, std::optional<Label>> assign_labels(const std::map<std::string, double>& returns) {
    std::map<std::string, std::optional<Label>> out;
    for (const auto& [symbol, r] : returns) out[symbol] = std::nullopt;
    const std::size_t n = returns.size();
    if (n < 5) {
        warn("only " + std::to_string(n) + " symbols on a date; all left unlabeled");
        return out;
    }
    std::vector<std::pair<std::string, double>> ranked(returns.begin(), returns.end());
    // map iteration is already symbol-ordered, so a stable sort keeps the tie-break.
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    const auto counts = expected_label_counts(n);
    for (std::size_t i = 0; i < counts.positive; ++i) out[ranked[i].first] = Label::positive;
    for (std::size_t i = counts.positive; i < counts.positive + counts.neutral; ++i)
        out[ranked[i].first] = Label::neutral;
    for (std::size_t i = n - counts.negative; i < n; ++i) out[ranked[i].first] = Label::negative;
    return out;
}

double cross_entropy(const Eigen::Ref<const VectorXd>& y, Label label) {
    constexpr double eps = 1e-12;
    double p = y(static_cast<Index>(label));
    if (p < eps) {
        warn("cross_entropy: probability of true class below 1e-12; clamped");
        p = eps;
    }
    return -std::log(p);
}

LossAndGradient loss_and_gradient(const Mlp& params, const MatrixXd& stacked,
                                  std::span<const Label> labels, const MatrixXd* dropout_mask) {
    const Index batch = stacked.cols();
    if (static_cast<std::size_t>(batch) != labels.size() || batch == 0)
        throw ValidationError("loss_and_gradient: inputs and labels differ in count");
    if (stacked.rows() != params.input_dim())
        throw ValidationError("loss_and_gradient: input dimension mismatch");

    const MatrixXd fused = params.w_alpha.asDiagonal() * stacked;
    const MatrixXd pre = (params.w1 * fused).colwise() + params.b1;
    MatrixXd act = pre.cwiseMax(0.0);
    if (dropout_mask) act = act.cwiseProduct(*dropout_mask);
    const MatrixXd logits = (params.w2 * act).colwise() + params.b2;
    if (!logits.allFinite()) throw NumericalError("training diverged: non-finite logits");
    const MatrixXd probs = softmax(logits);

    LossAndGradient out;
    MatrixXd delta = probs;
    for (Index j = 0; j < batch; ++j) {
        const auto k = static_cast<Index>(labels[static_cast<std::size_t>(j)]);
        out.loss -= std::log(std::max(probs(k, j), 1e-300));
        delta(k, j) -= 1.0;
    }
    out.loss /= static_cast<double>(batch);
    delta /= static_cast<double>(batch);

    auto& g = out.gradient;
    g.dropout_rate = params.dropout_rate;
    g.w2 = delta * act.transpose();
    g.b2 = delta.rowwise().sum();
    MatrixXd d_hidden = params.w2.transpose() * delta;
    if (dropout_mask) d_hidden = d_hidden.cwiseProduct(*dropout_mask);
    d_hidden = d_hidden.cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
    g.w1 = d_hidden * fused.transpose();
    g.b1 = d_hidden.rowwise().sum();
    const MatrixXd d_fused = params.w1.transpose() * d_hidden;
    g.w_alpha = d_fused.cwiseProduct(stacked).rowwise().sum();
    return out;
}

double batch_loss(const Mlp& params, const MatrixXd& stacked, std::span<const Label> labels) {
    double total = 0.0;
    for (Index j = 0; j < stacked.cols(); ++j) {
        const VectorXd y = predict_proba(params, stacked.col(j));
        total += cross_entropy(y, labels[static_cast<std::size_t>(j)]);
    }
    return total / static_cast<double>(stacked.cols());
}

Label predict_label(const Mlp& params, const Eigen::Ref<const VectorXd>& stacked) {
    const VectorXd y = predict_proba(params, stacked);
    Index best = 0;
    y.maxCoeff(&best);
    return static_cast<Label>(best);
}

namespace {

double accuracy_of(const Mlp& params, const LabeledSet& data) {
    std::size_t hits = 0;
    for (std::size_t j = 0; j < data.size(); ++j)
        hits += predict_label(params, data.inputs.col(static_cast<Index>(j))) == data.labels[j];
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

MatrixXd gather_columns(const MatrixXd& m, std::span<const std::size_t> idx) {
    MatrixXd out(m.rows(), static_cast<Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) out.col(static_cast<Index>(j)) = m.col(static_cast<Index>(idx[j]));
    return out;
}

}  // namespace

TrainResult train(const LabeledSet& data, const TrainConfig& config, const LabeledSet* validation) {
    if (data.size() == 0) throw ValidationError("train: empty labeled dataset");
    if (static_cast<std::size_t>(data.inputs.cols()) != data.size())
        throw ValidationError("train: inputs and labels differ in count");
    if (config.batch_size == 0) throw ValidationError("train: batch_size must be positive");
    if (!(config.dropout_rate >= 0.0 && config.dropout_rate < 1.0))
        throw ValidationError("train: dropout_rate must lie in [0, 1)");
    {
        std::array<std::size_t, kNumClasses> counts{};
        for (const auto l : data.labels) ++counts[static_cast<std::size_t>(l)];
        if (std::count(counts.begin(), counts.end(), 0u) >= 2)
            warn("train: degenerate dataset, all samples share one class");
    }

    std::mt19937_64 rng(config.rng_seed);
    TrainResult result;
    result.params = Mlp::init(data.inputs.rows(), config.hidden_dim, rng(), config.dropout_rate);
    Mlp& params = result.params;
    Mlp velocity = Mlp::zeros(params.input_dim(), params.hidden_dim());

    std::optional<Mlp> best;
    double best_val = std::numeric_limits<double>::infinity();

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            const std::span<const std::size_t> idx(order.data() + start, stop - start);
            const MatrixXd batch = gather_columns(data.inputs, idx);
            std::vector<Label> labels;
            for (const auto i : idx) labels.push_back(data.labels[i]);

            std::optional<MatrixXd> mask;
            if (config.dropout_rate > 0.0) {
                std::bernoulli_distribution keep(1.0 - config.dropout_rate);
                const double scale = 1.0 / (1.0 - config.dropout_rate);
                mask.emplace(params.hidden_dim(), batch.cols());
                for (Index j = 0; j < mask->cols(); ++j)
                    for (Index i = 0; i < mask->rows(); ++i) (*mask)(i, j) = keep(rng) ? scale : 0.0;
            }
            auto lg = loss_and_gradient(params, batch, labels, mask ? &*mask : nullptr);
            loss_sum += lg.loss * static_cast<double>(idx.size());

            const double lr = config.learning_rate;
            if (config.optimizer == Optimizer::momentum) {
                const double mu = config.momentum;
                velocity.w_alpha = mu * velocity.w_alpha - lr * lg.gradient.w_alpha;
                velocity.w1 = mu * velocity.w1 - lr * lg.gradient.w1;
                velocity.b1 = mu * velocity.b1 - lr * lg.gradient.b1;
                velocity.w2 = mu * velocity.w2 - lr * lg.gradient.w2;
                velocity.b2 = mu * velocity.b2 - lr * lg.gradient.b2;
                params.w_alpha += velocity.w_alpha;
                params.w1 += velocity.w1;
                params.b1 += velocity.b1;
                params.w2 += velocity.w2;
                params.b2 += velocity.b2;
            } else {
                params.w_alpha -= lr * lg.gradient.w_alpha;
                params.w1 -= lr * lg.gradient.w1;
                params.b1 -= lr * lg.gradient.b1;
                params.w2 -= lr * lg.gradient.w2;
                params.b2 -= lr * lg.gradient.b2;
            }
            if (!params.all_finite()) throw NumericalError("training diverged at epoch " + std::to_string(epoch));
        }
        EpochMetrics m{epoch, loss_sum / static_cast<double>(data.size()), accuracy_of(params, data), std::nullopt};
        if (validation != nullptr && validation->size() > 0) {
            m.validation_loss = batch_loss(params, validation->inputs, validation->labels);
            if (*m.validation_loss < best_val) {
                best_val = *m.validation_loss;
                best = params;
            }
        }
        result.history.push_back(m);
    }
    if (best) result.params = *best;
    return result;
}

ClassificationMetrics classification_metrics(std::span<const Label> predicted, std::span<const Label> truth) {
    if (predicted.size() != truth.size() || truth.empty())
        throw ValidationError("classification_metrics: empty or mismatched inputs");
    std::array<std::array<double, kNumClasses>, kNumClasses> confusion{};
    for (std::size_t i = 0; i < truth.size(); ++i)
        confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])] += 1.0;

    ClassificationMetrics m;
    double hits = 0.0;
    for (std::size_t k = 0; k < kNumClasses; ++k) {
        hits += confusion[k][k];
        double actual = 0.0, predicted_k = 0.0;
        for (std::size_t j = 0; j < kNumClasses; ++j) {
            actual += confusion[k][j];
            predicted_k += confusion[j][k];
        }
        if (actual == 0.0) warn(std::string("class ") + to_string(static_cast<Label>(k)) + " absent from dataset");
        const double recall = actual > 0.0 ? confusion[k][k] / actual : 0.0;
        const double precision = predicted_k > 0.0 ? confusion[k][k] / predicted_k : 0.0;
        const double f1 = recall + precision > 0.0 ? 2.0 * recall * precision / (recall + precision) : 0.0;
        m.recall += recall / kNumClasses;
        m.precision += precision / kNumClasses;
        m.f1 += f1 / kNumClasses;
    }
    m.accuracy = hits / static_cast<double>(truth.size());
    return m;
}

ClassificationMetrics evaluate(const Mlp& params, const LabeledSet& data) {
    std::vector<Label> predicted;
    for (Index j = 0; j < data.inputs.cols(); ++j) predicted.push_back(predict_label(params, data.inputs.col(j)));
    return classification_metrics(predicted, data.labels);
}

FeatureScaler FeatureScaler::fit(const MatrixXd& inputs) {
    FeatureScaler s;
    const double n = static_cast<double>(inputs.cols());
    s.mean = inputs.rowwise().mean();
    s.scale = VectorXd::Ones(inputs.rows());
    if (inputs.cols() > 1) {
        const MatrixXd centered = inputs.colwise() - s.mean;
        const VectorXd sd = (centered.rowwise().squaredNorm() / (n - 1.0)).cwiseSqrt();
        for (Index i = 0; i < sd.size(); ++i) s.scale(i) = sd(i) > 1e-12 ? sd(i) : 1.0;
    }
    return s;
}

MatrixXd FeatureScaler::apply(const MatrixXd& inputs) const {
    return scale.cwiseInverse().asDiagonal() * (inputs.colwise() - mean);
}

VectorXd FeatureScaler::apply(const VectorXd& input) const {
    return (input - mean).cwiseQuotient(scale);
}

namespace {

nlohmann::json tensor_json(const MatrixXd& m) {
    nlohmann::json j{{"rows", m.rows()}, {"cols", m.cols()}};
    std::vector<double> flat(static_cast<std::size_t>(m.size()));
    Eigen::Map<MatrixXd>(flat.data(), m.rows(), m.cols()) = m;
    j["data"] = flat;
    return j;
}

MatrixXd json_tensor(const nlohmann::json& j, const char* name) {
    const auto rows = j.at("rows").get<Index>();
    const auto cols = j.at("cols").get<Index>();
    const auto flat = j.at("data").get<std::vector<double>>();
    if (static_cast<Index>(flat.size()) != rows * cols)
        throw ValidationError(std::string("checkpoint tensor ") + name + " has wrong element count");
    return Eigen::Map<const MatrixXd>(flat.data(), rows, cols);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
    nlohmann::json j;
    j["format"] = "finreport-mlp";
    j["version"] = 1;
    j["config_hash"] = ck.config_hash;
    j["role_dim"] = ck.role_dim;
    j["edge_dim"] = ck.edge_dim;
    j["factor_names"] = ck.factor_names;
    j["config"] = {{"learning_rate", ck.config.learning_rate},
                   {"batch_size", ck.config.batch_size},
                   {"epochs", ck.config.epochs},
                   {"rng_seed", ck.config.rng_seed},
                   {"hidden_dim", ck.config.hidden_dim},
                   {"dropout_rate", ck.config.dropout_rate},
                   {"optimizer", ck.config.optimizer == Optimizer::sgd ? "sgd" : "momentum"},
                   {"momentum", ck.config.momentum}};
    j["dropout_rate"] = ck.params.dropout_rate;
    j["w_alpha"] = tensor_json(ck.params.w_alpha);
    j["w1"] = tensor_json(ck.params.w1);
    j["b1"] = tensor_json(ck.params.b1);
    j["w2"] = tensor_json(ck.params.w2);
    j["b2"] = tensor_json(ck.params.b2);
    j["scaler_mean"] = tensor_json(ck.scaler.mean);
    j["scaler_scale"] = tensor_json(ck.scaler.scale);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write checkpoint " + path.string());
    out << j.dump() << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path, std::optional<Index> expected_input_dim) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open checkpoint " + path.string());
    Checkpoint ck;
    try {
        const auto j = nlohmann::json::parse(in);
        if (j.at("format") != "finreport-mlp" || j.at("version") != 1)
            throw ValidationError("unsupported checkpoint format");
        ck.config_hash = j.at("config_hash").get<std::string>();
        ck.role_dim = j.at("role_dim").get<Index>();
        ck.edge_dim = j.at("edge_dim").get<Index>();
        ck.factor_names = j.at("factor_names").get<std::vector<std::string>>();
        const auto& c = j.at("config");
        ck.config.learning_rate = c.at("learning_rate").get<double>();
        ck.config.batch_size = c.at("batch_size").get<std::size_t>();
        ck.config.epochs = c.at("epochs").get<std::size_t>();
        ck.config.rng_seed = c.at("rng_seed").get<std::uint64_t>();
        ck.config.hidden_dim = c.at("hidden_dim").get<Index>();
        ck.config.dropout_rate = c.at("dropout_rate").get<double>();
        ck.config.optimizer = c.at("optimizer") == "momentum" ? Optimizer::momentum : Optimizer::sgd;
        ck.config.momentum = c.at("momentum").get<double>();
        ck.params.dropout_rate = j.at("dropout_rate").get<double>();
        ck.params.w_alpha = json_tensor(j.at("w_alpha"), "w_alpha");
        ck.params.w1 = json_tensor(j.at("w1"), "w1");
        ck.params.b1 = json_tensor(j.at("b1"), "b1");
        ck.params.w2 = json_tensor(j.at("w2"), "w2");
        ck.params.b2 = json_tensor(j.at("b2"), "b2");
        ck.scaler.mean = json_tensor(j.at("scaler_mean"), "scaler_mean");
        ck.scaler.scale = json_tensor(j.at("scaler_scale"), "scaler_scale");
    } catch (const ValidationError&) {
        throw;
    } catch (const std::exception& e) {
        throw ValidationError("corrupt checkpoint " + path.string() + ": " + e.what());
    }
    const auto& p = ck.params;
    const Index in_dim = p.w1.cols();
    const Index hidden = p.w1.rows();
    const bool consistent = p.w_alpha.size() == in_dim && p.b1.size() == hidden && p.w2.rows() == kNumClasses &&
                            p.w2.cols() == hidden && p.b2.size() == kNumClasses &&
                            ck.scaler.mean.size() == in_dim && ck.scaler.scale.size() == in_dim &&
                            in_dim == 3 * ck.role_dim + 3 * ck.edge_dim + static_cast<Index>(ck.factor_names.size());
    if (!consistent) throw ValidationError("checkpoint " + path.string() + " has inconsistent tensor shapes");
    if (expected_input_dim && *expected_input_dim != in_dim)
        throw ValidationError("checkpoint input dimension " + std::to_string(in_dim) + " does not match expected " +
                              std::to_string(*expected_input_dim));
    return ck;
}

}  // namespace finreport
