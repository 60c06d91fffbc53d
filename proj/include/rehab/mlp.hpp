#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rehab/kinematics.hpp"

namespace rehab {

enum class OutputHead { SigmoidBinary, LinearQ };

struct Layer {
    int in = 0;
    int out = 0;
    std::vector<double> w;  // row-major, out x in
    std::vector<double> b;  // out

    bool operator==(const Layer&) const = default;
};

// Fully connected net with rectified-linear hidden layers. The sigmoid head
// has one output unit and yields a probability; the linear head yields raw
// action values. Architecture is fixed at construction.
struct MlpModel {
    std::vector<int> dims;  // [in, h1..hk, out], 1..3 hidden layers
    OutputHead head = OutputHead::SigmoidBinary;
    std::vector<Layer> layers;

    static MlpModel init(const std::vector<int>& dims, OutputHead head,
                         std::uint64_t seed);

    int input_size() const { return dims.front(); }
    int output_size() const { return dims.back(); }
    std::size_t parameter_count() const;
    bool operator==(const MlpModel&) const = default;
};

std::vector<double> forward(const MlpModel& m, const std::vector<double>& x);

struct ForwardCache {
    // acts[0] = input, acts[l+1] = post-activation output of layer l.
    // The last entry holds raw output-layer preactivations for both heads.
    std::vector<std::vector<double>> acts;
};

ForwardCache forward_cached(const MlpModel& m, const std::vector<double>& x);

struct Gradients {
    std::vector<std::vector<double>> dw;
    std::vector<std::vector<double>> db;

    static Gradients zeros_like(const MlpModel& m);
    void scale(double k);
};

// Backpropagates dL/d(output preactivation) for one sample, accumulating
// into grads.
void backward(const MlpModel& m, const ForwardCache& cache,
              const std::vector<double>& dz_out, Gradients& grads);

// Mean binary cross-entropy over the batch, computed from logits. Sigmoid
// head only.
std::pair<double, Gradients> loss_and_grad(
    const MlpModel& m, const std::vector<std::vector<double>>& X,
    const std::vector<int>& y);

// Mean halved squared error on one output unit per sample. Linear head.
std::pair<double, Gradients> q_loss_and_grad(
    const MlpModel& m, const std::vector<std::vector<double>>& X,
    const std::vector<int>& action_index, const std::vector<double>& targets);

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long long step = 0;
    std::vector<std::vector<double>> mw, vw, mb, vb;

    static AdamState zeros_like(const MlpModel& m);
};

void adam_step(MlpModel& m, const Gradients& grads, AdamState& state,
               double lr);

struct TrainConfig {
    std::vector<int> depths = {1, 2, 3};
    std::vector<int> widths = {32, 64, 128, 256, 512};
    std::vector<double> learning_rates = {0.0001, 0.005, 0.001, 0.01, 0.1};
    double tol = 1e-4;
    int max_iter = 200;
    double val_fraction = 0.2;
    int threads = 1;
    std::uint64_t seed = 0;

    void validate() const;
    // Grid order: depth-major, then width. One candidate per (depth, width)
    // with uniform hidden width.
    std::vector<std::vector<int>> hidden_grid() const;
};

struct GridCell {
    std::vector<int> hidden;
    double lr = 0.0;
    double val_f1 = 0.0;
    double final_loss = 0.0;
    int iterations = 0;
};

struct TrainReport {
    std::vector<GridCell> cells;  // grid order: arch-major, then lr
    std::size_t best_index = 0;
};

// Grid search over architectures and learning rates. Each cell trains
// full-batch on a seeded stratified 80/20 split and is scored by validation
// F1; ties resolve to the earlier grid cell. Throws DegenerateLabels when
// only one class is present.
std::pair<MlpModel, TrainReport> train_predictor(
    const std::vector<std::vector<double>>& X, const std::vector<int>& y,
    const TrainConfig& cfg);

// Trains a single architecture full-batch until |loss_t - loss_{t-1}| < tol
// or max_iter. Returns final loss and iteration count.
std::pair<double, int> train_single(MlpModel& m,
                                    const std::vector<std::vector<double>>& X,
                                    const std::vector<int>& y, double lr,
                                    double tol, int max_iter);

// Predictor input encoding: standardized values zeroed where unacquired,
// followed by the mask bits. Doubles the dimension so one network serves
// full and partial feature sets.
std::vector<double> encode_input(const FeatureVector& fv);

struct Prediction {
    int label = 0;  // probability >= 0.5 maps to 1
    double probability = 0.0;
};

Prediction predict(const MlpModel& m, const FeatureVector& fv);

// Checkpoint serialization. Feature names travel with the predictor so a
// checkpoint trained under one feature configuration refuses to load under
// another.
struct PredictorCheckpoint {
    MlpModel model;
    NormParams norm;
};

void save_predictor(const PredictorCheckpoint& cp, const std::string& path);
PredictorCheckpoint load_predictor(
    const std::string& path,
    const std::vector<std::string>* expected_names = nullptr);

}  // namespace rehab
