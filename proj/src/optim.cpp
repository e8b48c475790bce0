#include "tosca/optim.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "tosca/rng.hpp"

namespace tosca {

const char* to_string(L1Mode mode) {
  return mode == L1Mode::subgradient ? "subgradient" : "proximal";
}

L1Mode parse_l1_mode(const std::string& name) {
  if (name == "subgradient") return L1Mode::subgradient;
  if (name == "proximal") return L1Mode::proximal;
  throw std::invalid_argument("unknown l1 mode: " + name);
}

void OptimConfig::validate() const {
  if (!(lr_min >= 0.0) || !(lr_max >= lr_min)) {
    throw std::invalid_argument("optim config: need lr_max >= lr_min >= 0");
  }
  if (batch_size < 1) throw std::invalid_argument("optim config: batch_size must be >= 1");
  if (!(lambda_l1 >= 0.0)) throw std::invalid_argument("optim config: lambda must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw std::invalid_argument("optim config: momentum must be in [0, 1)");
  }
}

double cosine_lr(std::size_t step, std::size_t total_steps, const OptimConfig& cfg) {
  if (total_steps < 1) throw std::invalid_argument("cosine_lr: total_steps must be >= 1");
  if (step > total_steps) throw std::invalid_argument("cosine_lr: step out of range");
  const double progress = static_cast<double>(step) / static_cast<double>(total_steps);
  return cfg.lr_min + 0.5 * (cfg.lr_max - cfg.lr_min) * (1.0 + std::cos(std::numbers::pi * progress));
}

double soft_threshold(double v, double t) {
  const double mag = std::abs(v) - t;
  if (mag <= 0.0) return 0.0;
  return v > 0.0 ? mag : -mag;
}

double sgd_l1_step(double theta, double grad, double lr, double lambda, L1Mode mode) {
  if (mode == L1Mode::subgradient) {
    const double sign = theta > 0.0 ? 1.0 : (theta < 0.0 ? -1.0 : 0.0);
    return theta - lr * (grad + lambda * sign);
  }
  return soft_threshold(theta - lr * grad, lr * lambda);
}

namespace {

// Gradient and momentum buffers for one (module, head) pair.
struct Workspace {
  LucaGradients luca;
  Matrix<double> head;
  std::vector<std::vector<double>> velocity;  // w_down, w_up, v_down, v_up, head

  Workspace(const LucaModule& m, const SessionHead& h)
      : luca(m), head(h.w.rows, h.w.cols), velocity(5) {}

  void zero() {
    for (auto* g : {&luca.w_down, &luca.w_up, &luca.v_down, &luca.v_up, &head}) {
      std::fill(g->values.begin(), g->values.end(), 0.0);
    }
  }
};

void apply(Matrix<float>& param, const Matrix<double>& grad, std::vector<double>& velocity,
           double scale, double lr, double lambda, const OptimConfig& cfg) {
  if (cfg.momentum > 0.0 && velocity.empty()) velocity.assign(param.size(), 0.0);
  for (std::size_t i = 0; i < param.size(); ++i) {
    double g = grad.values[i] * scale;
    if (cfg.momentum > 0.0) {
      velocity[i] = cfg.momentum * velocity[i] + g;
      g = velocity[i];
    }
    param.values[i] = static_cast<float>(sgd_l1_step(param.values[i], g, lr, lambda, cfg.l1_mode));
  }
}

}  // namespace

TrainOutcome train_epochs(LucaModule module, SessionHead head, std::span<const LabeledSample> data,
                          const OptimConfig& cfg, std::uint64_t shuffle_seed) {
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("train_epochs: empty dataset");
  if (head.w.rows != module.d) throw std::invalid_argument("train_epochs: head/module dimension mismatch");
  std::vector<std::size_t> label_col(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i].features.size() != module.d) throw std::invalid_argument("train_epochs: sample dimension mismatch");
    label_col[i] = head.column_of(data[i].label);
    if (label_col[i] == SessionHead::npos) {
      throw std::invalid_argument("train_epochs: label " + std::to_string(data[i].label) +
                                  " outside the head's class set");
    }
  }

  TrainOutcome out{std::move(module), std::move(head), {}, 0};
  LucaModule& m = out.module;
  SessionHead& h = out.head;
  const std::size_t n = data.size();
  const std::size_t batches = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = batches * cfg.epochs;
  const std::size_t d = m.d;
  const std::size_t k = h.num_classes();

  Workspace ws(m, h);
  Rng shuffle_rng(shuffle_seed);
  std::vector<std::size_t> order(n);
  std::vector<double> d_phi(d);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);

    double ce_sum = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t lo = b * cfg.batch_size;
      const std::size_t hi = std::min(n, lo + cfg.batch_size);
      ws.zero();
      for (std::size_t idx = lo; idx < hi; ++idx) {
        const std::size_t s = order[idx];
        const std::span<const float> z(data[s].features);
        const auto phi = luca_forward(z, m);
        const auto p = softmax(head_forward(std::span<const double>(phi), h));
        const std::size_t y = label_col[s];
        ce_sum -= std::log(std::max(p[y], 1e-300));
        std::vector<double> d_logit(p);
        d_logit[y] -= 1.0;
        for (std::size_t i = 0; i < d; ++i) {
          const float* wrow = h.w.values.data() + i * k;
          double* grow = ws.head.values.data() + i * k;
          double acc = 0.0;
          for (std::size_t j = 0; j < k; ++j) {
            grow[j] += phi[i] * d_logit[j];
            acc += static_cast<double>(wrow[j]) * d_logit[j];
          }
          d_phi[i] = acc;
        }
        luca_backward_accumulate(z, m, std::span<const double>(d_phi), ws.luca);
      }
      const double scale = 1.0 / static_cast<double>(hi - lo);
      const double lr = cosine_lr(out.steps, total_steps, cfg);
      apply(m.w_down, ws.luca.w_down, ws.velocity[0], scale, lr, cfg.lambda_l1, cfg);
      apply(m.w_up, ws.luca.w_up, ws.velocity[1], scale, lr, cfg.lambda_l1, cfg);
      apply(m.v_down, ws.luca.v_down, ws.velocity[2], scale, lr, cfg.lambda_l1, cfg);
      apply(m.v_up, ws.luca.v_up, ws.velocity[3], scale, lr, cfg.lambda_l1, cfg);
      apply(h.w, ws.head, ws.velocity[4], scale, lr, 0.0, cfg);
      ++out.steps;
    }
    out.loss_trace.push_back(ce_sum / static_cast<double>(n) + cfg.lambda_l1 * l1_norm(m));
  }

  for (const auto* mat : {&m.w_down, &m.w_up, &m.v_down, &m.v_up, &h.w}) {
    if (!all_finite(std::span<const float>(mat->values))) {
      throw std::runtime_error("train_epochs: parameters diverged to non-finite values");
    }
  }
  return out;
}

}  // namespace tosca
