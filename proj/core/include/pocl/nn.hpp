#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "pocl/errors.hpp"

namespace pocl::nn {

/// Dense row-major matrix of doubles. All model parameters and batches are
/// 64-bit floats so digests and determinism are unambiguous.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

enum class Activation : std::uint8_t {
    Relu = 0,
    Softmax = 1,
};

/// Layer sizes plus the activation applied after each affine layer.
/// `layer_sizes` includes the input dimension, so a network with L dense
/// layers has layer_sizes.size() == L + 1 and activations.size() == L.
struct ArchSpec {
    std::vector<std::size_t> layer_sizes;
    std::vector<Activation> activations;

    /// Standard classifier arch: ReLU on hidden layers, softmax on the last.
    static ArchSpec mlp(std::vector<std::size_t> sizes);

    std::size_t input_dim() const { return layer_sizes.front(); }
    std::size_t output_dim() const { return layer_sizes.back(); }
    std::size_t num_layers() const { return activations.size(); }
    std::size_t max_layer_size() const;

    void validate() const;
    bool operator==(const ArchSpec&) const = default;
};

/// Weights are out_dim x in_dim (each row is one output neuron).
struct LayerParams {
    Matrix weights;
    std::vector<double> biases;
};

struct ModelParams {
    ArchSpec arch;
    std::vector<LayerParams> layers;

    std::size_t parameter_count() const;
    bool all_finite() const;
};

/// Labelled classification data. Feature rows are n x D, labels in [0, C).
struct Dataset {
    Matrix features;
    std::vector<int> labels;
    std::size_t classes = 0;

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return features.cols; }
    void validate() const;

    /// Copy of the records at `indices`, in order.
    Dataset subset(const std::vector<std::size_t>& indices) const;
};

struct Hyperparams {
    double learning_rate = 0.1;
    std::size_t epochs = 1;
    std::size_t batch_size = 32;

    void validate() const;
};

/// Parameter-shaped gradient of the mean cross-entropy loss.
struct Gradients {
    std::vector<LayerParams> layers;
};

/// Seeded init: weights uniform in [-1/sqrt(in_dim), 1/sqrt(in_dim)], biases
/// zero. Identical (arch, seed) gives bit-identical parameters.
ModelParams init_model(const ArchSpec& arch, std::uint64_t seed);

/// Batch forward pass. Returns an n x C matrix of class probabilities; every
/// row sums to 1 (softmax output layer, ReLU hidden layers).
Matrix forward(const ModelParams& model, const Matrix& batch);

/// Mean categorical cross-entropy with probabilities clamped at 1e-12.
double loss(const Matrix& probs, const std::vector<int>& labels);

/// Fraction of rows whose argmax matches the label (ties -> lowest index).
double accuracy(const Matrix& probs, const std::vector<int>& labels);

/// Analytic gradient of loss(forward(model, batch), labels) w.r.t. every
/// weight and bias.
Gradients gradient(const ModelParams& model, const Matrix& batch, const std::vector<int>& labels);

/// Mini-batch SGD on cross-entropy. The input model is not modified; epoch
/// shuffles are driven by `seed`, so the result is a pure function of
/// (model, data, hp, seed).
ModelParams train_epochs(const ModelParams& model, const Dataset& data, const Hyperparams& hp,
                         std::uint64_t seed);

} // namespace pocl::nn
