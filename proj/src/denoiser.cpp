#include "mctd/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "mctd/kernels.hpp"

namespace mctd {

namespace {

double silu(double x) {
    return x / (1.0 + std::exp(-x));
}

double silu_grad(double x) {
    const double s = 1.0 / (1.0 + std::exp(-x));
    return s * (1.0 + x * (1.0 - s));
}

// Smooth over the whole level range: frequencies pi, pi/2, ... on the
// normalized level, so nearby levels embed nearby.
void noise_embedding(int level, int max_level, int emb_dim, double* out) {
    const int half = emb_dim / 2;
    const double tau = static_cast<double>(level) / max_level;
    double freq = 3.14159265358979323846;
    for (int j = 0; j < half; ++j) {
        const double angle = tau * freq;
        out[2 * j] = std::sin(angle);
        out[2 * j + 1] = std::cos(angle);
        freq *= 0.5;
    }
}

}  // namespace

Denoiser::Denoiser(DenoiserArch arch, const BetaSchedule& schedule, Normalization norm,
                   std::uint64_t init_seed)
    : arch_(std::move(arch)), schedule_(schedule), norm_(std::move(norm)) {
    if (arch_.emb_dim % 2 != 0) {
        throw model_error("emb_dim must be even");
    }
    std::vector<int> dims;
    dims.push_back(arch_.input_dim());
    for (int h : arch_.hidden) {
        dims.push_back(h);
    }
    dims.push_back(arch_.output_dim());

    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        layer_in_.push_back(dims[l]);
        layer_out_.push_back(dims[l + 1]);
        w_offset_.push_back(total);
        total += static_cast<std::size_t>(dims[l]) * dims[l + 1];
        b_offset_.push_back(total);
        total += static_cast<std::size_t>(dims[l + 1]);
    }
    params_.assign(total, 0.0);

    // Uniform fan-in init for hidden layers; the output layer stays at zero so
    // an untrained model predicts the (normalized) data mean.
    Rng rng(init_seed);
    const std::size_t layers = layer_in_.size();
    for (std::size_t l = 0; l + 1 < layers; ++l) {
        const double limit = std::sqrt(6.0 / (layer_in_[l] + layer_out_[l]));
        double* w = params_.data() + w_offset_[l];
        const std::size_t n = static_cast<std::size_t>(layer_in_[l]) * layer_out_[l];
        for (std::size_t i = 0; i < n; ++i) {
            w[i] = (2.0 * rng.uniform() - 1.0) * limit;
        }
    }
}

DenoiserWorkspace Denoiser::make_workspace() const {
    DenoiserWorkspace ws;
    ws.input.resize(static_cast<std::size_t>(arch_.input_dim()));
    ws.pre.resize(layer_in_.size());
    ws.post.resize(layer_in_.size());
    for (std::size_t l = 0; l < layer_in_.size(); ++l) {
        ws.pre[l].resize(static_cast<std::size_t>(layer_out_[l]));
        ws.post[l].resize(static_cast<std::size_t>(layer_out_[l]));
    }
    std::size_t widest = static_cast<std::size_t>(arch_.input_dim());
    for (int w : layer_out_) {
        widest = std::max(widest, static_cast<std::size_t>(w));
    }
    ws.delta.resize(widest);
    ws.delta_next.resize(widest);
    return ws;
}

void Denoiser::build_input(const double* tokens, const int* levels, const double* goal,
                           double* input) const {
    const int f = arch_.frame_stack;
    const int d = arch_.token_dim;
    std::memcpy(input, tokens, static_cast<std::size_t>(f) * d * sizeof(double));
    double* emb = input + static_cast<std::size_t>(f) * d;
    for (int i = 0; i < f; ++i) {
        if (levels[i] < 0 || levels[i] > schedule_.levels) {
            throw model_error("noise level out of range: " + std::to_string(levels[i]));
        }
        noise_embedding(levels[i], schedule_.levels, arch_.emb_dim,
                        emb + static_cast<std::size_t>(i) * arch_.emb_dim);
    }
    if (arch_.goal_dim > 0) {
        double* g = input + static_cast<std::size_t>(f) * (d + arch_.emb_dim);
        for (int i = 0; i < arch_.goal_dim; ++i) {
            g[i] = goal ? goal[i] : 0.0;
        }
    }
}

void Denoiser::forward_layers(DenoiserWorkspace& ws) const {
    const std::size_t layers = layer_in_.size();
    const double* act = ws.input.data();
    for (std::size_t l = 0; l < layers; ++l) {
        kernels::gemv(params_.data() + w_offset_[l], act, params_.data() + b_offset_[l],
                      ws.pre[l].data(), static_cast<std::size_t>(layer_out_[l]),
                      static_cast<std::size_t>(layer_in_[l]));
        if (l + 1 < layers) {
            for (int i = 0; i < layer_out_[l]; ++i) {
                ws.post[l][static_cast<std::size_t>(i)] = silu(ws.pre[l][static_cast<std::size_t>(i)]);
            }
            act = ws.post[l].data();
        } else {
            ws.post[l] = ws.pre[l];
        }
    }
}

void Denoiser::predict_x0(const double* tokens, const int* levels, const double* goal,
                          double* out, DenoiserWorkspace& ws) const {
    if (ws.input.size() != static_cast<std::size_t>(arch_.input_dim())) {
        throw model_error("workspace does not match model configuration");
    }
    build_input(tokens, levels, goal, ws.input.data());
    forward_layers(ws);
    const std::vector<double>& y = ws.post.back();
    // Residual x0-parameterization: the network corrects the per-token linear
    // denoiser sqrt(alpha_bar_t) * x_t, so near-clean tokens pass through.
    const int d = arch_.token_dim;
    for (int i = 0; i < arch_.frame_stack; ++i) {
        const double base = std::sqrt(schedule_.alpha_bar(levels[i]));
        for (int c = 0; c < d; ++c) {
            out[static_cast<std::size_t>(i) * d + c] =
                y[static_cast<std::size_t>(i) * d + c] +
                base * tokens[static_cast<std::size_t>(i) * d + c];
        }
    }
}

double Denoiser::loss_and_grad(const double* noisy, const int* levels, const double* goal,
                               const double* clean, double weight, double* grads,
                               DenoiserWorkspace& ws) const {
    build_input(noisy, levels, goal, ws.input.data());
    forward_layers(ws);

    const std::size_t layers = layer_in_.size();
    const int out_dim = layer_out_.back();
    const int d = arch_.token_dim;
    double loss = 0.0;
    for (int i = 0; i < out_dim; ++i) {
        const double base = std::sqrt(schedule_.alpha_bar(levels[i / d]));
        const double diff = ws.post.back()[static_cast<std::size_t>(i)] + base * noisy[i] -
                            clean[i];
        loss += diff * diff;
        ws.delta[static_cast<std::size_t>(i)] = 2.0 * diff * weight / out_dim;
    }
    loss /= out_dim;

    for (std::size_t l = layers; l-- > 0;) {
        const double* act = l == 0 ? ws.input.data() : ws.post[l - 1].data();
        double* gw = grads + w_offset_[l];
        double* gb = grads + b_offset_[l];
        const int rows = layer_out_[l];
        const int cols = layer_in_[l];
        for (int r = 0; r < rows; ++r) {
            const double dr = ws.delta[static_cast<std::size_t>(r)];
            kernels::axpy(gw + static_cast<std::size_t>(r) * cols, dr, act,
                          static_cast<std::size_t>(cols));
            gb[r] += dr;
        }
        if (l == 0) {
            break;
        }
        std::fill(ws.delta_next.begin(), ws.delta_next.begin() + cols, 0.0);
        kernels::gemv_t_acc(params_.data() + w_offset_[l], ws.delta.data(),
                            ws.delta_next.data(), static_cast<std::size_t>(rows),
                            static_cast<std::size_t>(cols));
        for (int c = 0; c < cols; ++c) {
            ws.delta[static_cast<std::size_t>(c)] =
                ws.delta_next[static_cast<std::size_t>(c)] *
                silu_grad(ws.pre[l - 1][static_cast<std::size_t>(c)]);
        }
    }
    return loss * weight;
}

void forward_noise(const double* x0, const int* levels, const double* eps,
                   const BetaSchedule& schedule, double* out, int tokens, int dim) {
    for (int n = 0; n < tokens; ++n) {
        const double ab = schedule.alpha_bar(levels[n]);
        const double a = std::sqrt(ab);
        const double b = std::sqrt(1.0 - ab);
        kernels::scale_mix(out + static_cast<std::size_t>(n) * dim, a,
                           x0 + static_cast<std::size_t>(n) * dim, b,
                           eps + static_cast<std::size_t>(n) * dim,
                           static_cast<std::size_t>(dim));
    }
}

void epsilon_from_x0(const double* noisy, const double* x0_hat, const int* levels,
                     const BetaSchedule& schedule, double* eps_out, int tokens, int dim) {
    for (int n = 0; n < tokens; ++n) {
        if (levels[n] < 1) {
            throw model_error("epsilon_from_x0 requires level >= 1 (division by zero)");
        }
        const double ab = schedule.alpha_bar(levels[n]);
        const double a = std::sqrt(ab);
        const double inv_b = 1.0 / std::sqrt(1.0 - ab);
        kernels::scale_mix(eps_out + static_cast<std::size_t>(n) * dim, inv_b,
                           noisy + static_cast<std::size_t>(n) * dim, -a * inv_b,
                           x0_hat + static_cast<std::size_t>(n) * dim,
                           static_cast<std::size_t>(dim));
    }
}

TrainingBatch sample_batch(const Dataset& dataset, const Denoiser& model, int windows,
                           Rng& rng) {
    if (dataset.trajectories.empty()) {
        throw training_error("dataset is empty");
    }
    const int f = model.arch().frame_stack;
    const int d = model.arch().token_dim;
    const int k = model.schedule().levels;
    TrainingBatch batch;
    batch.windows = windows;
    batch.frame_stack = f;
    batch.token_dim = d;
    batch.clean.resize(static_cast<std::size_t>(windows) * f * d);
    batch.levels.resize(static_cast<std::size_t>(windows) * f);
    batch.eps.resize(static_cast<std::size_t>(windows) * f * d);
    if (model.arch().goal_dim > 0) {
        batch.goals.assign(static_cast<std::size_t>(windows) * model.arch().goal_dim, 0.0);
    }
    for (int w = 0; w < windows; ++w) {
        const Trajectory& traj =
            dataset.trajectories[rng.uniform_index(dataset.trajectories.size())];
        if (traj.horizon < f || traj.dim < d) {
            throw training_error("trajectory shape incompatible with model window");
        }
        const int begin = static_cast<int>(rng.uniform_index(
            static_cast<std::uint64_t>(traj.horizon - f + 1)));
        double* clean = batch.clean.data() + static_cast<std::size_t>(w) * f * d;
        for (int i = 0; i < f; ++i) {
            // Leading dims only: the planner's tokens are the position slice.
            const double* tok = traj.token(begin + i);
            double* dst = clean + static_cast<std::size_t>(i) * d;
            std::copy(tok, tok + d, dst);
            model.norm().normalize_token(dst, d);
        }
        // Level patterns mirror how the samplers drive the model: mostly
        // lockstep blocks (committed prefix at a low level, active block at
        // one level, future at max noise), plus an iid tail for coverage.
        int* levels = batch.levels.data() + static_cast<std::size_t>(w) * f;
        const double mode = rng.uniform();
        if (mode < 0.4) {
            const int level = 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(k)));
            for (int i = 0; i < f; ++i) {
                levels[i] = level;
            }
        } else if (mode < 0.8) {
            const int low = 1 + static_cast<int>(rng.uniform_index(
                                static_cast<std::uint64_t>(std::max(1, k / 5))));
            const int high = low + static_cast<int>(rng.uniform_index(
                                 static_cast<std::uint64_t>(k - low + 1)));
            const int split = 1 + static_cast<int>(rng.uniform_index(
                                  static_cast<std::uint64_t>(f - 1)));
            const bool tail_max = rng.uniform() < 0.5;
            const int split2 = split + static_cast<int>(rng.uniform_index(
                                   static_cast<std::uint64_t>(f - split + 1)));
            for (int i = 0; i < f; ++i) {
                if (i < split) {
                    levels[i] = low;
                } else if (!tail_max || i < split2) {
                    levels[i] = high;
                } else {
                    levels[i] = k;
                }
            }
        } else {
            for (int i = 0; i < f; ++i) {
                levels[i] = 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(k)));
            }
        }
        double* eps = batch.eps.data() + static_cast<std::size_t>(w) * f * d;
        for (int i = 0; i < f * d; ++i) {
            eps[i] = rng.gaussian();
        }
    }
    return batch;
}

std::vector<double> train(Denoiser& model, const Dataset& dataset, const TrainConfig& config) {
    if (dataset.trajectories.empty()) {
        throw training_error("cannot train on an empty dataset");
    }
    if (config.steps < 1 || config.batch_size < 1) {
        throw training_error("training config: steps and batch_size must be >= 1");
    }
    const std::size_t np = model.param_count();
    std::vector<double> grads(np, 0.0);
    std::vector<double> m(np, 0.0);
    std::vector<double> v(np, 0.0);
    std::vector<double> noisy(static_cast<std::size_t>(model.arch().frame_stack) *
                              model.arch().token_dim);
    DenoiserWorkspace ws = model.make_workspace();
    Rng rng(derive_seed(config.seed, 0x7261696eull));
    std::vector<double> curve;
    curve.reserve(static_cast<std::size_t>(config.steps));

    const int f = model.arch().frame_stack;
    const int d = model.arch().token_dim;
    const int gd = model.arch().goal_dim;

    for (int step = 0; step < config.steps; ++step) {
        TrainingBatch batch = sample_batch(dataset, model, config.batch_size, rng);
        std::fill(grads.begin(), grads.end(), 0.0);
        double loss = 0.0;
        const double weight = 1.0 / batch.windows;
        for (int w = 0; w < batch.windows; ++w) {
            const double* clean = batch.clean.data() + static_cast<std::size_t>(w) * f * d;
            const int* levels = batch.levels.data() + static_cast<std::size_t>(w) * f;
            const double* eps = batch.eps.data() + static_cast<std::size_t>(w) * f * d;
            const double* goal =
                gd > 0 ? batch.goals.data() + static_cast<std::size_t>(w) * gd : nullptr;
            forward_noise(clean, levels, eps, model.schedule(), noisy.data(), f, d);
            loss += model.loss_and_grad(noisy.data(), levels, goal, clean, weight,
                                        grads.data(), ws);
        }
        if (!std::isfinite(loss)) {
            throw training_error("training diverged at step " + std::to_string(step));
        }
        curve.push_back(loss);

        double lr = config.learning_rate;
        if (config.warmup_steps > 0 && step < config.warmup_steps) {
            lr *= static_cast<double>(step + 1) / config.warmup_steps;
        }
        const double bc1 = 1.0 - std::pow(config.adam_beta1, step + 1);
        const double bc2 = 1.0 - std::pow(config.adam_beta2, step + 1);
        double* p = model.params().data();
        for (std::size_t i = 0; i < np; ++i) {
            m[i] = config.adam_beta1 * m[i] + (1.0 - config.adam_beta1) * grads[i];
            v[i] = config.adam_beta2 * v[i] + (1.0 - config.adam_beta2) * grads[i] * grads[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= lr * (mhat / (std::sqrt(vhat) + config.adam_eps) +
                          config.weight_decay * p[i]);
        }
    }
    return curve;
}

namespace {

constexpr char kCheckpointMagic[8] = {'M', 'C', 'T', 'D', 'C', 'P', '0', '1'};

void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

void write_f64(std::ostream& out, double v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

double read_f64(std::istream& in) {
    double v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

}  // namespace

void save_checkpoint(const Denoiser& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw model_error("cannot write checkpoint: " + path);
    }
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    const DenoiserArch& arch = model.arch();
    write_u64(out, static_cast<std::uint64_t>(arch.frame_stack));
    write_u64(out, static_cast<std::uint64_t>(arch.token_dim));
    write_u64(out, static_cast<std::uint64_t>(arch.emb_dim));
    write_u64(out, static_cast<std::uint64_t>(arch.goal_dim));
    write_u64(out, arch.hidden.size());
    for (int h : arch.hidden) {
        write_u64(out, static_cast<std::uint64_t>(h));
    }
    const BetaSchedule& sched = model.schedule();
    write_u64(out, sched.kind == BetaKind::Linear ? 0u : 1u);
    write_u64(out, static_cast<std::uint64_t>(sched.levels));
    write_f64(out, sched.beta_min);
    write_f64(out, sched.beta_max);
    const Normalization& norm = model.norm();
    write_u64(out, norm.mean.size());
    for (double x : norm.mean) {
        write_f64(out, x);
    }
    for (double x : norm.stddev) {
        write_f64(out, x);
    }
    write_u64(out, model.params().size());
    out.write(reinterpret_cast<const char*>(model.params().data()),
              static_cast<std::streamsize>(model.params().size() * sizeof(double)));
    if (!out) {
        throw model_error("checkpoint write failed: " + path);
    }
}

Denoiser load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw model_error("cannot open checkpoint: " + path);
    }
    char magic[8] = {};
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
        throw model_error("not a compatible checkpoint (bad magic/version): " + path);
    }
    DenoiserArch arch;
    arch.frame_stack = static_cast<int>(read_u64(in));
    arch.token_dim = static_cast<int>(read_u64(in));
    arch.emb_dim = static_cast<int>(read_u64(in));
    arch.goal_dim = static_cast<int>(read_u64(in));
    const std::uint64_t nh = read_u64(in);
    arch.hidden.clear();
    for (std::uint64_t i = 0; i < nh; ++i) {
        arch.hidden.push_back(static_cast<int>(read_u64(in)));
    }
    const std::uint64_t kind = read_u64(in);
    const int levels = static_cast<int>(read_u64(in));
    const double beta_min = read_f64(in);
    const double beta_max = read_f64(in);
    BetaSchedule sched = build_beta_schedule(kind == 0 ? BetaKind::Linear : BetaKind::Cosine,
                                             levels, beta_min, beta_max);
    Normalization norm;
    const std::uint64_t dim = read_u64(in);
    norm.mean.resize(dim);
    norm.stddev.resize(dim);
    for (double& x : norm.mean) {
        x = read_f64(in);
    }
    for (double& x : norm.stddev) {
        x = read_f64(in);
    }
    Denoiser model(arch, sched, norm, 0);
    const std::uint64_t np = read_u64(in);
    if (np != model.param_count()) {
        throw model_error("checkpoint parameter count mismatch: " + path);
    }
    in.read(reinterpret_cast<char*>(model.params().data()),
            static_cast<std::streamsize>(np * sizeof(double)));
    if (!in) {
        throw model_error("truncated checkpoint: " + path);
    }
    return model;
}

}  // namespace mctd
