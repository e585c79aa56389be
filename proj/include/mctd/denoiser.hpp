#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mctd/maze.hpp"
#include "mctd/rng.hpp"
#include "mctd/trajectory.hpp"

// A small trainable x0-predicting denoiser over noisy trajectory token
// windows with per-token noise levels, plus its training pipeline.

namespace mctd {

struct model_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct training_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DenoiserArch {
    int frame_stack = 10;  // window length F, in tokens
    int token_dim = 2;     // D; the planner models positions
    int emb_dim = 4;       // sinusoidal noise-level embedding per token, even
    int goal_dim = 0;      // 0 keeps guidance as the only goal channel
    std::vector<int> hidden = {128, 128};

    int input_dim() const { return frame_stack * (token_dim + emb_dim) + goal_dim; }
    int output_dim() const { return frame_stack * token_dim; }
};

// Scratch buffers for one forward/backward pass; reuse across calls.
struct DenoiserWorkspace {
    std::vector<double> input;
    std::vector<std::vector<double>> pre;   // z_l per layer
    std::vector<std::vector<double>> post;  // activation(z_l)
    std::vector<double> delta;
    std::vector<double> delta_next;
};

class Denoiser {
public:
    Denoiser() = default;
    Denoiser(DenoiserArch arch, const BetaSchedule& schedule, Normalization norm,
             std::uint64_t init_seed);

    const DenoiserArch& arch() const { return arch_; }
    const BetaSchedule& schedule() const { return schedule_; }
    const Normalization& norm() const { return norm_; }
    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }

    DenoiserWorkspace make_workspace() const;

    // Predicted clean window, deterministic. tokens are normalized token
    // values [F*D], levels one noise index per token, goal normalized goal
    // position (ignored unless arch.goal_dim > 0).
    void predict_x0(const double* tokens, const int* levels, const double* goal,
                    double* out, DenoiserWorkspace& ws) const;

    // MSE loss of one window against the clean target; accumulates parameter
    // gradients scaled by `weight` into grads (same packing as params).
    double loss_and_grad(const double* noisy, const int* levels, const double* goal,
                         const double* clean, double weight, double* grads,
                         DenoiserWorkspace& ws) const;

    std::size_t param_count() const { return params_.size(); }

private:
    void build_input(const double* tokens, const int* levels, const double* goal,
                     double* input) const;
    void forward_layers(DenoiserWorkspace& ws) const;

    DenoiserArch arch_;
    BetaSchedule schedule_;
    Normalization norm_;
    std::vector<double> params_;
    // Layer offsets into params_: weights then bias per layer.
    std::vector<std::size_t> w_offset_;
    std::vector<std::size_t> b_offset_;
    std::vector<int> layer_in_;
    std::vector<int> layer_out_;
};

// x_t = sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps, per token.
// t = 0 returns x0 exactly.
void forward_noise(const double* x0, const int* levels, const double* eps,
                   const BetaSchedule& schedule, double* out, int tokens, int dim);

// Implied noise: eps = (x_t - sqrt(alpha_bar_t) * x0_hat) / sqrt(1 - alpha_bar_t).
// Requires every level >= 1.
void epsilon_from_x0(const double* noisy, const double* x0_hat, const int* levels,
                     const BetaSchedule& schedule, double* eps_out, int tokens, int dim);

struct TrainingBatch {
    int windows = 0;
    int frame_stack = 0;
    int token_dim = 0;
    std::vector<double> clean;   // windows x F*D, normalized
    std::vector<int> levels;     // windows x F, in [1, K]
    std::vector<double> eps;     // windows x F*D, unit gaussian
    std::vector<double> goals;   // windows x goal_dim (may be empty)
};

// Random windows from the dataset, normalized with the model's statistics.
TrainingBatch sample_batch(const Dataset& dataset, const Denoiser& model, int windows,
                           Rng& rng);

struct TrainConfig {
    int steps = 12000;
    int batch_size = 64;
    double learning_rate = 5e-4;
    double weight_decay = 1e-4;
    int warmup_steps = 200;  // linear warmup
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;
};

// Adam-style moments with decoupled weight decay and linear warmup; returns
// the per-step loss curve. Throws training_error on divergence (with the step
// index) or an empty dataset.
std::vector<double> train(Denoiser& model, const Dataset& dataset, const TrainConfig& config);

void save_checkpoint(const Denoiser& model, const std::string& path);
Denoiser load_checkpoint(const std::string& path);

// Counts denoiser work during planning; step_calls is one predict pass over a
// token range (the budget unit), window_calls the underlying MLP evaluations.
struct CallCounter {
    std::uint64_t step_calls = 0;
    std::uint64_t window_calls = 0;
};

}  // namespace mctd
