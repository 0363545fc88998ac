#include "pocl/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pocl/rng.hpp"

namespace pocl::nn {

namespace {

constexpr double kProbClamp = 1e-12;

void require_batch_matches(const ModelParams& model, const Matrix& batch) {
    if (batch.cols != model.arch.input_dim()) {
        throw ShapeError("batch has " + std::to_string(batch.cols) + " columns, model expects " +
                         std::to_string(model.arch.input_dim()));
    }
}

// z = x * W^T + b for one layer, x is n x in, W is out x in.
Matrix affine(const Matrix& x, const LayerParams& layer) {
    const std::size_t out_dim = layer.weights.rows;
    const std::size_t in_dim = layer.weights.cols;
    Matrix z(x.rows, out_dim);
    for (std::size_t r = 0; r < x.rows; ++r) {
        const double* xr = &x.data[r * in_dim];
        double* zr = &z.data[r * out_dim];
        for (std::size_t o = 0; o < out_dim; ++o) {
            const double* w = &layer.weights.data[o * in_dim];
            double acc = layer.biases[o];
            for (std::size_t i = 0; i < in_dim; ++i) {
                acc += w[i] * xr[i];
            }
            zr[o] = acc;
        }
    }
    return z;
}

void apply_relu(Matrix& m) {
    for (double& v : m.data) {
        v = v > 0.0 ? v : 0.0;
    }
}

// Row-wise softmax with max subtraction for stability.
void apply_softmax(Matrix& m) {
    for (std::size_t r = 0; r < m.rows; ++r) {
        double* row = &m.data[r * m.cols];
        const double mx = *std::max_element(row, row + m.cols);
        double sum = 0.0;
        for (std::size_t c = 0; c < m.cols; ++c) {
            row[c] = std::exp(row[c] - mx);
            sum += row[c];
        }
        for (std::size_t c = 0; c < m.cols; ++c) {
            row[c] /= sum;
        }
    }
}

struct ForwardTrace {
    // activations[0] is the input batch; activations[l+1] the output of layer l.
    std::vector<Matrix> activations;
    // pre_act[l] holds layer l's affine output before its activation.
    std::vector<Matrix> pre_act;
};

ForwardTrace forward_trace(const ModelParams& model, const Matrix& batch) {
    ForwardTrace t;
    t.activations.reserve(model.layers.size() + 1);
    t.pre_act.reserve(model.layers.size());
    t.activations.push_back(batch);
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        Matrix z = affine(t.activations.back(), model.layers[l]);
        t.pre_act.push_back(z);
        switch (model.arch.activations[l]) {
        case Activation::Relu:
            apply_relu(z);
            break;
        case Activation::Softmax:
            apply_softmax(z);
            break;
        }
        t.activations.push_back(std::move(z));
    }
    return t;
}

void check_labels(std::size_t rows, std::size_t classes, const std::vector<int>& labels) {
    if (labels.size() != rows) {
        throw ShapeError("got " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(rows) + " rows");
    }
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= classes) {
            throw DomainError("label " + std::to_string(y) + " outside [0, " +
                              std::to_string(classes) + ")");
        }
    }
}

} // namespace

ArchSpec ArchSpec::mlp(std::vector<std::size_t> sizes) {
    ArchSpec arch;
    arch.layer_sizes = std::move(sizes);
    arch.validate();
    arch.activations.assign(arch.layer_sizes.size() - 1, Activation::Relu);
    arch.activations.back() = Activation::Softmax;
    return arch;
}

std::size_t ArchSpec::max_layer_size() const {
    return *std::max_element(layer_sizes.begin(), layer_sizes.end());
}

void ArchSpec::validate() const {
    if (layer_sizes.size() < 2) {
        throw ConfigError("arch needs at least input and output sizes");
    }
    for (std::size_t s : layer_sizes) {
        if (s == 0) {
            throw ConfigError("arch layer sizes must be >= 1");
        }
    }
    if (!activations.empty() && activations.size() != layer_sizes.size() - 1) {
        throw ConfigError("arch has " + std::to_string(activations.size()) + " activations for " +
                          std::to_string(layer_sizes.size() - 1) + " layers");
    }
}

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for (const LayerParams& l : layers) {
        n += l.weights.data.size() + l.biases.size();
    }
    return n;
}

bool ModelParams::all_finite() const {
    for (const LayerParams& l : layers) {
        for (double v : l.weights.data) {
            if (!std::isfinite(v)) return false;
        }
        for (double v : l.biases) {
            if (!std::isfinite(v)) return false;
        }
    }
    return true;
}

void Dataset::validate() const {
    if (labels.empty() || features.rows == 0) {
        throw ConfigError("dataset is empty");
    }
    if (features.rows != labels.size()) {
        throw ShapeError("dataset has " + std::to_string(features.rows) + " feature rows and " +
                         std::to_string(labels.size()) + " labels");
    }
    if (classes == 0) {
        throw ConfigError("dataset class count must be >= 1");
    }
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= classes) {
            throw DomainError("dataset label " + std::to_string(y) + " outside [0, " +
                              std::to_string(classes) + ")");
        }
    }
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
    Dataset out;
    out.classes = classes;
    out.features = Matrix(indices.size(), features.cols);
    out.labels.reserve(indices.size());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const std::size_t src = indices[r];
        std::copy_n(&features.data[src * features.cols], features.cols,
                    &out.features.data[r * features.cols]);
        out.labels.push_back(labels[src]);
    }
    return out;
}

void Hyperparams::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw ConfigError("learning_rate must be > 0");
    }
    if (epochs < 1) {
        throw ConfigError("epochs must be >= 1");
    }
    if (batch_size < 1) {
        throw ConfigError("batch_size must be >= 1");
    }
}

ModelParams init_model(const ArchSpec& arch, std::uint64_t seed) {
    arch.validate();
    ModelParams model;
    model.arch = arch;
    if (model.arch.activations.empty()) {
        model.arch = ArchSpec::mlp(arch.layer_sizes);
    }
    Rng rng(Rng::derive(seed, {}, "nn.init"));
    model.layers.reserve(arch.layer_sizes.size() - 1);
    for (std::size_t l = 0; l + 1 < arch.layer_sizes.size(); ++l) {
        const std::size_t in_dim = arch.layer_sizes[l];
        const std::size_t out_dim = arch.layer_sizes[l + 1];
        LayerParams layer;
        layer.weights = Matrix(out_dim, in_dim);
        const double scale = 1.0 / std::sqrt(static_cast<double>(in_dim));
        for (double& w : layer.weights.data) {
            w = rng.uniform(-scale, scale);
        }
        layer.biases.assign(out_dim, 0.0);
        model.layers.push_back(std::move(layer));
    }
    return model;
}

Matrix forward(const ModelParams& model, const Matrix& batch) {
    require_batch_matches(model, batch);
    ForwardTrace t = forward_trace(model, batch);
    return std::move(t.activations.back());
}

double loss(const Matrix& probs, const std::vector<int>& labels) {
    check_labels(probs.rows, probs.cols, labels);
    double total = 0.0;
    for (std::size_t r = 0; r < probs.rows; ++r) {
        const double p = std::clamp(probs.at(r, static_cast<std::size_t>(labels[r])), kProbClamp, 1.0);
        total -= std::log(p);
    }
    return total / static_cast<double>(probs.rows);
}

double accuracy(const Matrix& probs, const std::vector<int>& labels) {
    check_labels(probs.rows, probs.cols, labels);
    std::size_t hits = 0;
    for (std::size_t r = 0; r < probs.rows; ++r) {
        const double* row = &probs.data[r * probs.cols];
        const std::size_t best = static_cast<std::size_t>(
            std::max_element(row, row + probs.cols) - row);
        if (best == static_cast<std::size_t>(labels[r])) {
            ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(probs.rows);
}

Gradients gradient(const ModelParams& model, const Matrix& batch, const std::vector<int>& labels) {
    require_batch_matches(model, batch);
    if (model.arch.activations.back() != Activation::Softmax) {
        throw ConfigError("gradient requires a softmax output layer");
    }
    check_labels(batch.rows, model.arch.output_dim(), labels);

    const ForwardTrace t = forward_trace(model, batch);
    const std::size_t n = batch.rows;
    const std::size_t L = model.layers.size();

    Gradients grads;
    grads.layers.resize(L);
    for (std::size_t l = 0; l < L; ++l) {
        grads.layers[l].weights = Matrix(model.layers[l].weights.rows, model.layers[l].weights.cols);
        grads.layers[l].biases.assign(model.layers[l].biases.size(), 0.0);
    }

    // delta starts as dL/dz for the softmax + cross-entropy output layer:
    // (p - onehot(y)) / n.
    Matrix delta = t.activations.back();
    for (std::size_t r = 0; r < n; ++r) {
        delta.at(r, static_cast<std::size_t>(labels[r])) -= 1.0;
    }
    for (double& v : delta.data) {
        v /= static_cast<double>(n);
    }

    for (std::size_t li = L; li-- > 0;) {
        const Matrix& input = t.activations[li]; // n x in_dim
        LayerParams& g = grads.layers[li];
        const std::size_t out_dim = g.weights.rows;
        const std::size_t in_dim = g.weights.cols;

        // dW = delta^T * input, db = column sums of delta.
        for (std::size_t r = 0; r < n; ++r) {
            const double* dr = &delta.data[r * out_dim];
            const double* xr = &input.data[r * in_dim];
            for (std::size_t o = 0; o < out_dim; ++o) {
                const double d = dr[o];
                if (d == 0.0) continue;
                double* gw = &g.weights.data[o * in_dim];
                for (std::size_t i = 0; i < in_dim; ++i) {
                    gw[i] += d * xr[i];
                }
                g.biases[o] += d;
            }
        }

        if (li == 0) break;

        // Propagate: delta_prev = (delta * W) ⊙ relu'(z_prev).
        const Matrix& w = model.layers[li].weights;
        const Matrix& z_prev = t.pre_act[li - 1];
        Matrix prev(n, in_dim);
        for (std::size_t r = 0; r < n; ++r) {
            const double* dr = &delta.data[r * out_dim];
            double* pr = &prev.data[r * in_dim];
            for (std::size_t o = 0; o < out_dim; ++o) {
                const double d = dr[o];
                if (d == 0.0) continue;
                const double* wr = &w.data[o * in_dim];
                for (std::size_t i = 0; i < in_dim; ++i) {
                    pr[i] += d * wr[i];
                }
            }
            for (std::size_t i = 0; i < in_dim; ++i) {
                if (z_prev.at(r, i) <= 0.0) {
                    pr[i] = 0.0;
                }
            }
        }
        delta = std::move(prev);
    }
    return grads;
}

ModelParams train_epochs(const ModelParams& model, const Dataset& data, const Hyperparams& hp,
                         std::uint64_t seed) {
    hp.validate();
    data.validate();
    if (data.dim() != model.arch.input_dim() || data.classes != model.arch.output_dim()) {
        throw ShapeError("dataset dims (" + std::to_string(data.dim()) + ", " +
                         std::to_string(data.classes) + ") do not match arch (" +
                         std::to_string(model.arch.input_dim()) + ", " +
                         std::to_string(model.arch.output_dim()) + ")");
    }

    ModelParams out = model;
    Rng rng(Rng::derive(seed, {}, "nn.train"));
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += hp.batch_size) {
            const std::size_t end = std::min(order.size(), start + hp.batch_size);
            Matrix batch(end - start, data.dim());
            std::vector<int> labels(end - start);
            for (std::size_t r = 0; r < end - start; ++r) {
                const std::size_t src = order[start + r];
                std::copy_n(&data.features.data[src * data.dim()], data.dim(),
                            &batch.data[r * data.dim()]);
                labels[r] = data.labels[src];
            }
            const Gradients g = gradient(out, batch, labels);
            for (std::size_t l = 0; l < out.layers.size(); ++l) {
                LayerParams& layer = out.layers[l];
                const LayerParams& gl = g.layers[l];
                for (std::size_t i = 0; i < layer.weights.data.size(); ++i) {
                    layer.weights.data[i] -= hp.learning_rate * gl.weights.data[i];
                }
                for (std::size_t i = 0; i < layer.biases.size(); ++i) {
                    layer.biases[i] -= hp.learning_rate * gl.biases[i];
                }
            }
            if (!out.all_finite()) {
                throw DomainError("training produced non-finite parameters");
            }
        }
    }
    return out;
}

} // namespace pocl::nn
