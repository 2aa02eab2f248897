#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "prism/autodiff.hpp"
#include "prism/matrix.hpp"
#include "prism/optim.hpp"
#include "prism/rng.hpp"

namespace prism {

// Cumulative-product noise schedule. Linear betas scaled for the short step
// count so alpha_bar still runs from ~1 down to ~0.
struct NoiseSchedule {
    int T_diff = 0;
    std::vector<double> alpha_bar;

    static NoiseSchedule linear(int T_diff = 100, double beta_start = 1e-3,
                                double beta_end = 0.2) {
        if (T_diff < 2) throw std::invalid_argument("NoiseSchedule: T_diff must be >= 2");
        NoiseSchedule s;
        s.T_diff = T_diff;
        s.alpha_bar.resize(T_diff);
        double acc = 1.0;
        for (int t = 0; t < T_diff; ++t) {
            const double beta = beta_start + (beta_end - beta_start) * t / (T_diff - 1);
            acc *= 1.0 - beta;
            s.alpha_bar[t] = acc;
        }
        return s;
    }

    double at(int t) const {
        if (t < 0 || t >= T_diff)
            throw std::invalid_argument("NoiseSchedule: step " + std::to_string(t) +
                                        " outside [0, " + std::to_string(T_diff) + ")");
        return alpha_bar[t];
    }
};

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps, elementwise.
inline Matrix forward_noise(const Matrix& x0, double alpha_bar_t, const Matrix& eps) {
    require_shape(x0, eps, "forward_noise");
    const double a = std::sqrt(alpha_bar_t);
    const double b = std::sqrt(1.0 - alpha_bar_t);
    Matrix out(x0.rows, x0.cols);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a * x0.data[i] + b * eps.data[i];
    return out;
}

inline Matrix forward_noise(const Matrix& x0, const NoiseSchedule& sched, int t,
                            const Matrix& eps) {
    return forward_noise(x0, sched.at(t), eps);
}

// Noise predictor: one MLP shared across channels, applied to a single
// channel's segment plus a sinusoidal embedding of the diffusion step.
struct DenoiserConfig {
    int seg_len = 48;
    int time_dim = 16;  // must be even
    int hidden = 64;
    std::uint64_t seed = 0;
};

class DenoiserNet {
public:
    DenoiserNet() = default;

    explicit DenoiserNet(const DenoiserConfig& cfg) : cfg_(cfg) {
        if (cfg.time_dim % 2 != 0)
            throw std::invalid_argument("DenoiserNet: time_dim must be even");
        const int in = cfg.seg_len + cfg.time_dim;
        add_linear("denoiser.w1", in, cfg.hidden);
        add_linear("denoiser.w2", cfg.hidden, cfg.hidden);
        add_linear("denoiser.w3", cfg.hidden, cfg.seg_len);
        Rng rng(derive_seed(cfg.seed, 0xD0ULL));
        init_uniform(rng);
    }

    const DenoiserConfig& config() const { return cfg_; }
    Parameters& params() { return params_; }
    const Parameters& params() const { return params_; }

    // Sinusoidal embedding of the integer diffusion step.
    std::vector<double> time_embedding(int t) const {
        std::vector<double> e(cfg_.time_dim);
        const int half = cfg_.time_dim / 2;
        for (int k = 0; k < half; ++k) {
            const double freq = std::pow(10000.0, -static_cast<double>(k) / half);
            e[2 * k] = std::sin(t * freq);
            e[2 * k + 1] = std::cos(t * freq);
        }
        return e;
    }

    // Tape-based forward over a batch of segments (rows), for training.
    ad::Tensor forward(ad::Tape& tape, const ad::Tensor& segments,
                       const std::vector<int>& steps,
                       const std::vector<ad::Tensor>& bound) const {
        const int batch = segments.rows();
        Matrix emb(batch, cfg_.time_dim);
        for (int b = 0; b < batch; ++b) {
            const auto e = time_embedding(steps[b]);
            for (int j = 0; j < cfg_.time_dim; ++j) emb.at(b, j) = e[j];
        }
        ad::Tensor x = tape.concat_cols({segments, tape.input(emb)});
        ad::Tensor h1 = tape.relu(tape.add_rowvec(tape.matmul(x, bound[0]), bound[1]));
        ad::Tensor h2 = tape.relu(tape.add_rowvec(tape.matmul(h1, bound[2]), bound[3]));
        return tape.add_rowvec(tape.matmul(h2, bound[4]), bound[5]);
    }

    // Binds parameters as leaves on the given tape (order: w1,b1,w2,b2,w3,b3).
    std::vector<ad::Tensor> bind(ad::Tape& tape, bool requires_grad) const {
        std::vector<ad::Tensor> out;
        for (const auto& p : params_.items())
            out.push_back(tape.input(p.rows, p.cols, p.value, requires_grad, p.name));
        return out;
    }

    // Plain forward for inference on one segment (one channel).
    std::vector<double> predict_noise(const std::vector<double>& segment, int t) const {
        if (static_cast<int>(segment.size()) != cfg_.seg_len)
            throw std::invalid_argument("DenoiserNet: segment length mismatch");
        std::vector<double> x = segment;
        const auto e = time_embedding(t);
        x.insert(x.end(), e.begin(), e.end());
        std::vector<double> h = affine(x, "denoiser.w1");
        for (double& v : h) v = std::max(0.0, v);
        h = affine(h, "denoiser.w2");
        for (double& v : h) v = std::max(0.0, v);
        return affine(h, "denoiser.w3");
    }

private:
    DenoiserConfig cfg_;
    Parameters params_;

    void add_linear(const std::string& base, int in, int out) {
        params_.add(base, in, out);
        params_.add(base + ".bias", 1, out);
    }

    void init_uniform(Rng& rng) {
        for (auto& p : params_.items()) {
            if (p.rows == 1 && p.name.ends_with(".bias")) continue;  // biases stay zero
            const double s = 1.0 / std::sqrt(static_cast<double>(p.rows));
            for (double& v : p.value) v = rng.uniform(-s, s);
        }
    }

    std::vector<double> affine(const std::vector<double>& x, const std::string& name) const {
        const Param& w = params_.get(name);
        const Param& b = params_.get(name + ".bias");
        std::vector<double> out(b.value);
        for (int i = 0; i < w.rows; ++i) {
            const double xi = x[i];
            if (xi == 0.0) continue;
            for (int j = 0; j < w.cols; ++j) out[j] += xi * w.value[static_cast<std::size_t>(i) * w.cols + j];
        }
        return out;
    }
};

// MSE between given injected noise and the prediction on the given noisy
// batch. Differentiates through the network only (noisy inputs are leaves).
inline ad::Tensor ddpm_loss_given(ad::Tape& tape, const DenoiserNet& net,
                                  const std::vector<ad::Tensor>& bound, const Matrix& noisy,
                                  const std::vector<int>& steps, const Matrix& noise) {
    if (noisy.rows == 0) throw std::invalid_argument("ddpm_loss: empty batch");
    require_shape(noisy, noise, "ddpm_loss");
    ad::Tensor pred = net.forward(tape, tape.input(noisy), steps, bound);
    return tape.mean(tape.square(tape.sub(pred, tape.input(noise))));
}

// Samples a diffusion step and fresh noise per segment, then evaluates the
// prediction error.
inline ad::Tensor ddpm_loss(ad::Tape& tape, const DenoiserNet& net,
                            const std::vector<ad::Tensor>& bound,
                            const std::vector<std::vector<double>>& x0_segments,
                            const NoiseSchedule& sched, Rng& rng) {
    if (x0_segments.empty()) throw std::invalid_argument("ddpm_loss: empty batch");
    const int batch = static_cast<int>(x0_segments.size());
    const int seg = net.config().seg_len;
    Matrix noisy(batch, seg), noise(batch, seg);
    std::vector<int> steps(batch);
    for (int b = 0; b < batch; ++b) {
        if (static_cast<int>(x0_segments[b].size()) != seg)
            throw std::invalid_argument("ddpm_loss: segment length mismatch");
        const int t = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(sched.T_diff)));
        steps[b] = t;
        const double a = std::sqrt(sched.at(t));
        const double s = std::sqrt(1.0 - sched.at(t));
        for (int j = 0; j < seg; ++j) {
            const double eps = rng.normal();
            noise.at(b, j) = eps;
            noisy.at(b, j) = a * x0_segments[b][j] + s * eps;
        }
    }
    return ddpm_loss_given(tape, net, bound, noisy, steps, noise);
}

// x0_hat = (x_t - sqrt(1-abar) eps_hat) / sqrt(abar): exact inverse of
// forward_noise when eps_hat is the injected noise.
inline std::vector<double> invert_forward_noise(const std::vector<double>& noisy_segment,
                                                const std::vector<double>& eps_hat,
                                                const NoiseSchedule& sched, int t) {
    const double abar = sched.at(t);
    if (abar < 1e-6)
        throw std::invalid_argument("denoise_one_step: alpha_bar below 1e-6 at step " +
                                    std::to_string(t));
    const double a = std::sqrt(abar);
    const double s = std::sqrt(1.0 - abar);
    std::vector<double> out(noisy_segment.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (noisy_segment[i] - s * eps_hat[i]) / a;
    return out;
}

// Single-step projection through the trained network.
inline std::vector<double> denoise_one_step(const DenoiserNet& net,
                                            const std::vector<double>& noisy_segment,
                                            const NoiseSchedule& sched, int t) {
    sched.at(t);  // range check before running the net
    return invert_forward_noise(noisy_segment, net.predict_noise(noisy_segment, t), sched, t);
}

// Raw accumulated overlap-add weights for a series of the given length
// (integer triangle per segment, stride-summed). Interior positions covered
// by two half-overlapping segments sum to seg/2 + 1.
inline std::vector<double> overlap_add_weights(int length, int seg_len, int stride) {
    std::vector<double> w(length, 0.0);
    auto seg_weight = [seg_len](int k) {
        const int half = seg_len / 2;
        return static_cast<double>(k < half ? k + 1 : seg_len - k);
    };
    int start = 0;
    bool last = false;
    while (!last) {
        if (start + seg_len >= length) {
            start = length - seg_len;
            last = true;
        }
        for (int k = 0; k < seg_len; ++k) w[start + k] += seg_weight(k);
        start += stride;
    }
    return w;
}

// Denoise a whole prefix channel-by-channel: slide half-overlapping segments,
// project each at a small fixed step, and blend with triangular weights. The
// blend is written in correction form (input + weighted average of
// per-segment corrections) so an identity denoiser reproduces the input
// exactly.
inline Matrix denoise_prefix(const DenoiserNet& net, const Matrix& prefix,
                             const NoiseSchedule& sched, int t_star = 10) {
    const int seg = net.config().seg_len;
    if (prefix.rows < seg)
        throw std::invalid_argument("denoise_prefix: prefix has " + std::to_string(prefix.rows) +
                                    " rows, needs at least " + std::to_string(seg));
    const int stride = std::max(1, seg / 2);
    const int half = seg / 2;
    auto seg_weight = [seg, half](int k) {
        return static_cast<double>(k < half ? k + 1 : seg - k);
    };

    Matrix out = prefix;
    for (int c = 0; c < prefix.cols; ++c) {
        std::vector<double> column = col_of(prefix, c);
        std::vector<double> correction(column.size(), 0.0);
        std::vector<double> weight(column.size(), 0.0);
        int start = 0;
        bool last = false;
        while (!last) {
            if (start + seg >= static_cast<int>(column.size())) {
                start = static_cast<int>(column.size()) - seg;
                last = true;
            }
            std::vector<double> segment(column.begin() + start, column.begin() + start + seg);
            const auto clean = denoise_one_step(net, segment, sched, t_star);
            for (int k = 0; k < seg; ++k) {
                const double w = seg_weight(k);
                correction[start + k] += w * (clean[k] - segment[k]);
                weight[start + k] += w;
            }
            start += stride;
        }
        for (std::size_t r = 0; r < column.size(); ++r)
            out.at(static_cast<int>(r), c) = column[r] + correction[r] / weight[r];
    }
    return out;
}

// One Adam step on a batch of random segments drawn from the prefix.
// Returns the batch loss.
inline double denoiser_train_step(DenoiserNet& net, AdamState& adam, const Matrix& prefix,
                                  const NoiseSchedule& sched, Rng& rng, int batch_size,
                                  double lr) {
    const int seg = net.config().seg_len;
    if (prefix.rows < seg)
        throw std::invalid_argument("denoiser_train_step: prefix shorter than segment");
    std::vector<std::vector<double>> batch;
    batch.reserve(batch_size);
    for (int b = 0; b < batch_size; ++b) {
        const int c = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(prefix.cols)));
        const int start =
            static_cast<int>(rng.next_below(static_cast<std::uint64_t>(prefix.rows - seg + 1)));
        std::vector<double> s(seg);
        for (int k = 0; k < seg; ++k) s[k] = prefix.at(start + k, c);
        batch.push_back(std::move(s));
    }
    ad::Tape tape;
    auto bound = net.bind(tape, true);
    ad::Tensor loss = ddpm_loss(tape, net, bound, batch, sched, rng);
    tape.backward(loss);
    std::vector<std::vector<double>> grads;
    grads.reserve(bound.size());
    for (const auto& t : bound) grads.push_back(t.grad());
    adam_step(net.params(), grads, adam, lr);
    return loss.item();
}

inline DenoiserNet train_denoiser(const Matrix& prefix, const DenoiserConfig& cfg, int steps,
                                  std::uint64_t seed, double lr = 1e-3, int batch_size = 16,
                                  std::vector<double>* loss_curve = nullptr) {
    DenoiserNet net(cfg);
    AdamState adam = make_adam_state(net.params());
    NoiseSchedule sched = NoiseSchedule::linear();
    Rng rng(derive_seed(seed, 0xDDULL));
    for (int s = 0; s < steps; ++s) {
        const double loss = denoiser_train_step(net, adam, prefix, sched, rng, batch_size, lr);
        if (loss_curve) loss_curve->push_back(loss);
    }
    return net;
}

}  // namespace prism
