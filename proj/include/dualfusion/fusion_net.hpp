#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "dualfusion/errors.hpp"
#include "dualfusion/geometry.hpp"
#include "dualfusion/model.hpp"
#include "dualfusion/segregation.hpp"

namespace dualfusion {

// SeLU constants from the self-normalizing network formulation.
inline constexpr double kSeluLambda = 1.0507009873554805;
inline constexpr double kSeluAlpha = 1.6732632423543772;

inline double selu(double x) {
  return x > 0.0 ? kSeluLambda * x
                 : kSeluLambda * kSeluAlpha * (std::exp(x) - 1.0);
}

inline double selu_grad(double x) {
  return x > 0.0 ? kSeluLambda : kSeluLambda * kSeluAlpha * std::exp(x);
}

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

// Dense affine layer, weights row-major (out x in).
struct Affine {
  int in = 0;
  int out = 0;
  std::vector<double> w;
  std::vector<double> b;
};

inline Affine make_affine(int in, int out) {
  Affine a;
  a.in = in;
  a.out = out;
  a.w.assign(static_cast<std::size_t>(in) * out, 0.0);
  a.b.assign(out, 0.0);
  return a;
}

// One fusion example: both branch vectors plus the region they describe.
// A branch vector is concat(feature, logits, predicted box as 4 reals)
// taken from the matching detector's proposal record.
struct FusionInput {
  std::vector<double> base_branch;
  std::vector<double> novel_branch;
  Box proposal_box;
};

// Training target for one fusion input. box_delta is meaningful only
// when class_id is not the background id.
struct FusionTarget {
  int class_id = 0;
  std::array<double, 4> box_delta = {0.0, 0.0, 0.0, 0.0};
};

struct FusionExample {
  FusionInput input;
  FusionTarget target;
};

// All weights of the fusion network. Per branch: a linear projection into
// the shared hidden width, then two affine+SeLU layers; the two branch
// outputs are concatenated and passed through two affine+ReLU trunk
// layers; the class-score and box heads are linear on top of the trunk.
// n_classes excludes background; the class head emits n_classes + 1
// scores with background last.
struct FusionNetParams {
  int base_in = 0;
  int novel_in = 0;
  int d_h = 0;
  int d_t = 0;
  int n_classes = 0;

  Affine base_proj, base_selu1, base_selu2;
  Affine novel_proj, novel_selu1, novel_selu2;
  Affine relu1, relu2;
  Affine class_head, box_head;
};

template <typename Params, typename Fn>
void for_each_layer(Params& p, Fn fn) {
  fn("base_proj", p.base_proj);
  fn("base_selu1", p.base_selu1);
  fn("base_selu2", p.base_selu2);
  fn("novel_proj", p.novel_proj);
  fn("novel_selu1", p.novel_selu1);
  fn("novel_selu2", p.novel_selu2);
  fn("relu1", p.relu1);
  fn("relu2", p.relu2);
  fn("class_head", p.class_head);
  fn("box_head", p.box_head);
}

inline std::array<Affine*, 10> layer_ptrs(FusionNetParams& p);
inline std::array<const Affine*, 10> layer_ptrs(const FusionNetParams& p);

inline FusionNetParams make_fusion_net(int base_in, int novel_in, int d_h,
                                       int d_t, int n_classes) {
  if (base_in <= 0 || novel_in <= 0 || d_h <= 0 || d_t <= 0 || n_classes <= 0) {
    throw std::invalid_argument("fusion net dimensions must be positive");
  }
  FusionNetParams p;
  p.base_in = base_in;
  p.novel_in = novel_in;
  p.d_h = d_h;
  p.d_t = d_t;
  p.n_classes = n_classes;
  p.base_proj = make_affine(base_in, d_h);
  p.base_selu1 = make_affine(d_h, d_h);
  p.base_selu2 = make_affine(d_h, d_h);
  p.novel_proj = make_affine(novel_in, d_h);
  p.novel_selu1 = make_affine(d_h, d_h);
  p.novel_selu2 = make_affine(d_h, d_h);
  p.relu1 = make_affine(2 * d_h, d_t);
  p.relu2 = make_affine(d_t, d_t);
  p.class_head = make_affine(d_t, n_classes + 1);
  p.box_head = make_affine(d_t, 4);
  return p;
}

inline FusionNetParams zeros_like(const FusionNetParams& p) {
  return make_fusion_net(p.base_in, p.novel_in, p.d_h, p.d_t, p.n_classes);
}

inline std::array<Affine*, 10> layer_ptrs(FusionNetParams& p) {
  return {&p.base_proj,  &p.base_selu1,  &p.base_selu2, &p.novel_proj,
          &p.novel_selu1, &p.novel_selu2, &p.relu1,      &p.relu2,
          &p.class_head, &p.box_head};
}

inline std::array<const Affine*, 10> layer_ptrs(const FusionNetParams& p) {
  return {&p.base_proj,  &p.base_selu1,  &p.base_selu2, &p.novel_proj,
          &p.novel_selu1, &p.novel_selu2, &p.relu1,      &p.relu2,
          &p.class_head, &p.box_head};
}

inline constexpr std::array<const char*, 10> kLayerNames = {
    "base_proj", "base_selu1", "base_selu2", "novel_proj", "novel_selu1",
    "novel_selu2", "relu1", "relu2", "class_head", "box_head"};

inline void validate_params(const FusionNetParams& p) {
  const FusionNetParams ref = zeros_like(p);
  const auto actual = layer_ptrs(p);
  const auto expected = layer_ptrs(ref);
  bool finite = true;
  for (std::size_t li = 0; li < actual.size(); ++li) {
    if (actual[li]->in != expected[li]->in ||
        actual[li]->out != expected[li]->out ||
        actual[li]->w.size() != expected[li]->w.size() ||
        actual[li]->b.size() != expected[li]->b.size()) {
      throw std::invalid_argument(std::string(kLayerNames[li]) +
                                  ": layer shape inconsistent with "
                                  "declared dimensions");
    }
    for (double x : actual[li]->w) finite = finite && std::isfinite(x);
    for (double x : actual[li]->b) finite = finite && std::isfinite(x);
  }
  if (!finite) {
    throw std::invalid_argument("fusion net parameters contain non-finite values");
  }
}

// Glorot-uniform weight init, zero biases, deterministic under seed.
inline FusionNetParams init_params(int base_in, int novel_in, int d_h, int d_t,
                                   int n_classes, std::uint64_t seed) {
  FusionNetParams p = make_fusion_net(base_in, novel_in, d_h, d_t, n_classes);
  std::mt19937_64 rng(seed);
  for_each_layer(p, [&](const char*, Affine& layer) {
    const double limit = std::sqrt(6.0 / (layer.in + layer.out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& w : layer.w) w = dist(rng);
  });
  return p;
}

namespace detail {

inline std::vector<double> affine_apply(const Affine& layer,
                                        const std::vector<double>& x,
                                        const char* name) {
  if (static_cast<int>(x.size()) != layer.in) {
    throw std::invalid_argument(std::string(name) + ": expected input length " +
                                std::to_string(layer.in) + ", got " +
                                std::to_string(x.size()));
  }
  std::vector<double> y(layer.out);
  for (int o = 0; o < layer.out; ++o) {
    double acc = layer.b[o];
    const double* row = layer.w.data() + static_cast<std::size_t>(o) * layer.in;
    for (int i = 0; i < layer.in; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
  return y;
}

// dL/dy -> accumulates layer grads, returns dL/dx.
inline std::vector<double> affine_backward(const Affine& layer,
                                           const std::vector<double>& x,
                                           const std::vector<double>& dy,
                                           Affine* grad) {
  std::vector<double> dx(layer.in, 0.0);
  for (int o = 0; o < layer.out; ++o) {
    const double g = dy[o];
    grad->b[o] += g;
    double* grow = grad->w.data() + static_cast<std::size_t>(o) * layer.in;
    const double* row = layer.w.data() + static_cast<std::size_t>(o) * layer.in;
    for (int i = 0; i < layer.in; ++i) {
      grow[i] += g * x[i];
      dx[i] += row[i] * g;
    }
  }
  return dx;
}

struct ForwardTrace {
  // Branch intermediates: projection output, the two SeLU pre-activations
  // and activations.
  std::vector<double> base_a0, base_z1, base_a1, base_z2, base_a2;
  std::vector<double> novel_a0, novel_z1, novel_a1, novel_z2, novel_a2;
  std::vector<double> concat;
  std::vector<double> trunk_z1, trunk_h1, trunk_z2, trunk_h2;
  std::vector<double> class_scores;
  std::array<double, 4> box_delta;
};

inline void branch_forward(const Affine& proj, const Affine& s1,
                           const Affine& s2, const std::vector<double>& x,
                           const char* proj_name, const char* s1_name,
                           const char* s2_name, std::vector<double>* a0,
                           std::vector<double>* z1, std::vector<double>* a1,
                           std::vector<double>* z2, std::vector<double>* a2) {
  *a0 = affine_apply(proj, x, proj_name);
  *z1 = affine_apply(s1, *a0, s1_name);
  a1->resize(z1->size());
  for (std::size_t i = 0; i < z1->size(); ++i) (*a1)[i] = selu((*z1)[i]);
  *z2 = affine_apply(s2, *a1, s2_name);
  a2->resize(z2->size());
  for (std::size_t i = 0; i < z2->size(); ++i) (*a2)[i] = selu((*z2)[i]);
}

inline ForwardTrace forward_trace(const FusionNetParams& p,
                                  const FusionInput& input) {
  ForwardTrace t;
  branch_forward(p.base_proj, p.base_selu1, p.base_selu2, input.base_branch,
                 "base_proj", "base_selu1", "base_selu2", &t.base_a0,
                 &t.base_z1, &t.base_a1, &t.base_z2, &t.base_a2);
  branch_forward(p.novel_proj, p.novel_selu1, p.novel_selu2,
                 input.novel_branch, "novel_proj", "novel_selu1",
                 "novel_selu2", &t.novel_a0, &t.novel_z1, &t.novel_a1,
                 &t.novel_z2, &t.novel_a2);
  t.concat.reserve(t.base_a2.size() + t.novel_a2.size());
  t.concat.insert(t.concat.end(), t.base_a2.begin(), t.base_a2.end());
  t.concat.insert(t.concat.end(), t.novel_a2.begin(), t.novel_a2.end());
  t.trunk_z1 = affine_apply(p.relu1, t.concat, "relu1");
  t.trunk_h1.resize(t.trunk_z1.size());
  for (std::size_t i = 0; i < t.trunk_z1.size(); ++i) {
    t.trunk_h1[i] = relu(t.trunk_z1[i]);
  }
  t.trunk_z2 = affine_apply(p.relu2, t.trunk_h1, "relu2");
  t.trunk_h2.resize(t.trunk_z2.size());
  for (std::size_t i = 0; i < t.trunk_z2.size(); ++i) {
    t.trunk_h2[i] = relu(t.trunk_z2[i]);
  }
  t.class_scores = affine_apply(p.class_head, t.trunk_h2, "class_head");
  const std::vector<double> d = affine_apply(p.box_head, t.trunk_h2, "box_head");
  std::copy(d.begin(), d.end(), t.box_delta.begin());
  return t;
}

inline void branch_backward(const Affine& proj, const Affine& s1,
                            const Affine& s2, const std::vector<double>& x,
                            const std::vector<double>& a0,
                            const std::vector<double>& z1,
                            const std::vector<double>& a1,
                            const std::vector<double>& z2,
                            const std::vector<double>& da2, Affine* gproj,
                            Affine* gs1, Affine* gs2) {
  std::vector<double> dz2(da2.size());
  for (std::size_t i = 0; i < da2.size(); ++i) {
    dz2[i] = da2[i] * selu_grad(z2[i]);
  }
  std::vector<double> da1 = affine_backward(s2, a1, dz2, gs2);
  std::vector<double> dz1(da1.size());
  for (std::size_t i = 0; i < da1.size(); ++i) {
    dz1[i] = da1[i] * selu_grad(z1[i]);
  }
  std::vector<double> da0 = affine_backward(s1, a0, dz1, gs1);
  affine_backward(proj, x, da0, gproj);
}

}  // namespace detail

struct FusionOutput {
  std::vector<double> class_scores;  // pre-softmax logits, background last
  std::array<double, 4> box_delta;   // class-agnostic regression output
};

inline FusionOutput forward(const FusionNetParams& params,
                            const FusionInput& input) {
  detail::ForwardTrace t = detail::forward_trace(params, input);
  return FusionOutput{std::move(t.class_scores), t.box_delta};
}

inline std::vector<double> softmax(const std::vector<double>& scores) {
  std::vector<double> p(scores.size());
  const double m = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    p[i] = std::exp(scores[i] - m);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

inline double smooth_l1(double x) {
  const double ax = std::fabs(x);
  return ax < 1.0 ? 0.5 * x * x : ax - 0.5;
}

inline double smooth_l1_grad(double x) {
  if (x >= 1.0) return 1.0;
  if (x <= -1.0) return -1.0;
  return x;
}

// Classification term + box term with their normalizers. The box term is
// averaged over non-background examples only and is 0 when the batch has
// none.
struct LossBreakdown {
  double total = 0.0;
  double classification = 0.0;
  double box = 0.0;
};

namespace detail {

struct BatchSums {
  double ce_sum = 0.0;
  double box_sum = 0.0;
  std::size_t n = 0;
  std::size_t non_background = 0;
};

inline LossBreakdown breakdown_from(const BatchSums& s, double box_weight) {
  LossBreakdown out;
  out.classification = s.ce_sum / static_cast<double>(s.n);
  out.box = s.non_background == 0
                ? 0.0
                : s.box_sum / static_cast<double>(s.non_background);
  out.total = out.classification + box_weight * out.box;
  return out;
}

// Shared core for loss/gradients/train. grads may be null (loss only).
inline BatchSums run_batch(const FusionNetParams& params,
                           const FusionExample* const* batch, std::size_t n,
                           double box_weight, FusionNetParams* grads) {
  if (n == 0) throw std::invalid_argument("empty batch");
  BatchSums sums;
  sums.n = n;
  const int background = params.n_classes;
  for (std::size_t i = 0; i < n; ++i) {
    if (batch[i]->target.class_id != background) ++sums.non_background;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const FusionExample& ex = *batch[i];
    if (ex.target.class_id < 0 || ex.target.class_id > background) {
      throw std::invalid_argument("target class id " +
                                  std::to_string(ex.target.class_id) +
                                  " out of range");
    }
    ForwardTrace t = forward_trace(params, ex.input);

    // Cross entropy via log-sum-exp.
    const double m =
        *std::max_element(t.class_scores.begin(), t.class_scores.end());
    double expsum = 0.0;
    for (double s : t.class_scores) expsum += std::exp(s - m);
    const double lse = m + std::log(expsum);
    sums.ce_sum += lse - t.class_scores[ex.target.class_id];

    const bool has_box = ex.target.class_id != background;
    std::array<double, 4> residual = {0.0, 0.0, 0.0, 0.0};
    if (has_box) {
      double box_loss = 0.0;
      for (int k = 0; k < 4; ++k) {
        residual[k] = t.box_delta[k] - ex.target.box_delta[k];
        box_loss += smooth_l1(residual[k]);
      }
      sums.box_sum += box_loss;
    }

    if (grads != nullptr) {
      const double ce_scale = 1.0 / static_cast<double>(n);
      std::vector<double> dscores(t.class_scores.size());
      for (std::size_t k = 0; k < t.class_scores.size(); ++k) {
        dscores[k] = std::exp(t.class_scores[k] - lse) * ce_scale;
      }
      dscores[ex.target.class_id] -= ce_scale;

      std::vector<double> ddelta(4, 0.0);
      if (has_box) {
        const double box_scale =
            box_weight / static_cast<double>(sums.non_background);
        for (int k = 0; k < 4; ++k) {
          ddelta[k] = smooth_l1_grad(residual[k]) * box_scale;
        }
      }

      std::vector<double> dh2 = affine_backward(params.class_head, t.trunk_h2,
                                                dscores, &grads->class_head);
      std::vector<double> dh2_box = affine_backward(
          params.box_head, t.trunk_h2, ddelta, &grads->box_head);
      for (std::size_t k = 0; k < dh2.size(); ++k) dh2[k] += dh2_box[k];

      std::vector<double> dz2(dh2.size());
      for (std::size_t k = 0; k < dh2.size(); ++k) {
        dz2[k] = t.trunk_z2[k] > 0.0 ? dh2[k] : 0.0;
      }
      std::vector<double> dh1 =
          affine_backward(params.relu2, t.trunk_h1, dz2, &grads->relu2);
      std::vector<double> dz1(dh1.size());
      for (std::size_t k = 0; k < dh1.size(); ++k) {
        dz1[k] = t.trunk_z1[k] > 0.0 ? dh1[k] : 0.0;
      }
      std::vector<double> dconcat =
          affine_backward(params.relu1, t.concat, dz1, &grads->relu1);

      const std::size_t d_h = t.base_a2.size();
      std::vector<double> dbase(dconcat.begin(), dconcat.begin() + d_h);
      std::vector<double> dnovel(dconcat.begin() + d_h, dconcat.end());
      branch_backward(params.base_proj, params.base_selu1, params.base_selu2,
                      ex.input.base_branch, t.base_a0, t.base_z1, t.base_a1,
                      t.base_z2, dbase, &grads->base_proj, &grads->base_selu1,
                      &grads->base_selu2);
      branch_backward(params.novel_proj, params.novel_selu1,
                      params.novel_selu2, ex.input.novel_branch, t.novel_a0,
                      t.novel_z1, t.novel_a1, t.novel_z2, dnovel,
                      &grads->novel_proj, &grads->novel_selu1,
                      &grads->novel_selu2);
    }
  }
  return sums;
}

inline std::vector<const FusionExample*> as_pointers(
    const std::vector<FusionExample>& batch) {
  std::vector<const FusionExample*> ptrs(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) ptrs[i] = &batch[i];
  return ptrs;
}

}  // namespace detail

inline LossBreakdown loss(const FusionNetParams& params,
                          const std::vector<FusionExample>& batch,
                          double box_weight = 1.0) {
  const auto ptrs = detail::as_pointers(batch);
  const detail::BatchSums sums =
      detail::run_batch(params, ptrs.data(), ptrs.size(), box_weight, nullptr);
  return detail::breakdown_from(sums, box_weight);
}

// Analytic gradient of loss() w.r.t. every parameter, same shape as the
// parameter struct. Examples accumulate in index order.
inline FusionNetParams gradients(const FusionNetParams& params,
                                 const std::vector<FusionExample>& batch,
                                 double box_weight = 1.0) {
  FusionNetParams grads = zeros_like(params);
  const auto ptrs = detail::as_pointers(batch);
  detail::run_batch(params, ptrs.data(), ptrs.size(), box_weight, &grads);
  return grads;
}

struct TrainConfig {
  int epochs = 10;
  double lr = 0.001;
  int batch_size = 16;
  double momentum = 0.9;
  std::uint64_t seed = 1;
};

struct TrainResult {
  FusionNetParams params;
  std::vector<LossBreakdown> epoch_loss;  // training loss per epoch
};

// Minibatch SGD with momentum. Deterministic given the seed: the shuffle
// order, batch boundaries, and accumulation order are all fixed.
inline TrainResult train(const FusionNetParams& initial,
                         const std::vector<FusionExample>& dataset,
                         const TrainConfig& cfg) {
  if (dataset.empty()) throw std::invalid_argument("empty training dataset");
  if (cfg.epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (cfg.batch_size <= 0) throw std::invalid_argument("batch_size must be positive");
  if (!(cfg.lr >= 0.0) || !(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) {
    throw std::invalid_argument("bad lr or momentum");
  }
  validate_params(initial);

  TrainResult result;
  result.params = initial;
  FusionNetParams velocity = zeros_like(initial);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  const double box_weight = 1.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates with the dedicated stream.
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng() % i);
      std::swap(order[i - 1], order[j]);
    }
    detail::BatchSums epoch_sums;
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(cfg.batch_size), ++batch_index) {
      const std::size_t end = std::min(
          order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
      std::vector<const FusionExample*> batch;
      batch.reserve(end - begin);
      for (std::size_t k = begin; k < end; ++k) {
        batch.push_back(&dataset[order[k]]);
      }
      FusionNetParams grads = zeros_like(initial);
      const detail::BatchSums sums = detail::run_batch(
          result.params, batch.data(), batch.size(), box_weight, &grads);
      const LossBreakdown batch_loss =
          detail::breakdown_from(sums, box_weight);
      if (!std::isfinite(batch_loss.total)) {
        throw DivergenceError("non-finite loss at epoch " +
                              std::to_string(epoch) + " batch " +
                              std::to_string(batch_index));
      }
      epoch_sums.ce_sum += sums.ce_sum;
      epoch_sums.box_sum += sums.box_sum;
      epoch_sums.n += sums.n;
      epoch_sums.non_background += sums.non_background;

      const auto params_l = layer_ptrs(result.params);
      const auto grads_l = layer_ptrs(const_cast<const FusionNetParams&>(grads));
      const auto vel_l = layer_ptrs(velocity);
      for (std::size_t li = 0; li < params_l.size(); ++li) {
        Affine& layer = *params_l[li];
        const Affine& g = *grads_l[li];
        Affine& v = *vel_l[li];
        for (std::size_t k = 0; k < layer.w.size(); ++k) {
          v.w[k] = cfg.momentum * v.w[k] - cfg.lr * g.w[k];
          layer.w[k] += v.w[k];
        }
        for (std::size_t k = 0; k < layer.b.size(); ++k) {
          v.b[k] = cfg.momentum * v.b[k] - cfg.lr * g.b[k];
          layer.b[k] += v.b[k];
        }
      }
    }
    result.epoch_loss.push_back(
        detail::breakdown_from(epoch_sums, box_weight));
  }

  bool finite = true;
  for_each_layer(result.params, [&](const char*, const Affine& layer) {
    for (double x : layer.w) finite = finite && std::isfinite(x);
    for (double x : layer.b) finite = finite && std::isfinite(x);
  });
  if (!finite) {
    throw DivergenceError("non-finite parameters after final epoch");
  }
  return result;
}

// Standard R-CNN-style box regression parameterization: center offsets
// normalized by the source box size plus log size ratios.
inline std::array<double, 4> encode_box_delta(const Box& from, const Box& to) {
  const double fw = from.x2 - from.x1;
  const double fh = from.y2 - from.y1;
  const double fcx = from.x1 + 0.5 * fw;
  const double fcy = from.y1 + 0.5 * fh;
  const double tw = to.x2 - to.x1;
  const double th = to.y2 - to.y1;
  const double tcx = to.x1 + 0.5 * tw;
  const double tcy = to.y1 + 0.5 * th;
  return {(tcx - fcx) / fw, (tcy - fcy) / fh, std::log(tw / fw),
          std::log(th / fh)};
}

inline Box apply_box_delta(const Box& box, const std::array<double, 4>& delta) {
  const double w = box.x2 - box.x1;
  const double h = box.y2 - box.y1;
  const double cx = box.x1 + 0.5 * w + delta[0] * w;
  const double cy = box.y1 + 0.5 * h + delta[1] * h;
  const double nw = w * std::exp(delta[2]);
  const double nh = h * std::exp(delta[3]);
  return Box{cx - 0.5 * nw, cy - 0.5 * nh, cx + 0.5 * nw, cy + 0.5 * nh};
}

namespace detail {

// The box enters in scene-normalized coordinates: pixel-scale inputs
// (hundreds to thousands) blow up from-scratch SGD at the reference
// learning rate, while x/W, y/H keep every component at unit scale.
inline std::vector<double> branch_vector(const Proposal& p, double width,
                                         double height) {
  std::vector<double> v;
  v.reserve(p.feature.size() + p.logits.size() + 4);
  v.insert(v.end(), p.feature.begin(), p.feature.end());
  v.insert(v.end(), p.logits.begin(), p.logits.end());
  v.push_back(p.predicted_box.x1 / width);
  v.push_back(p.predicted_box.y1 / height);
  v.push_back(p.predicted_box.x2 / width);
  v.push_back(p.predicted_box.y2 / height);
  return v;
}

inline std::size_t best_iou_index(const Box& box,
                                  const std::vector<Proposal>& candidates) {
  std::size_t best = 0;
  double best_iou = -1.0;
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    const double v = iou(box, candidates[j].box);
    if (v > best_iou) {
      best_iou = v;
      best = j;
    }
  }
  return best;
}

}  // namespace detail

// Builds one FusionInput per overlapping proposal, ordered like
// SegregationResult::overlapping. The overlapping proposal supplies its
// own detector's record; the other branch comes from the opposing set's
// most-overlapping proposal (highest IoU, ties to the lower index).
// Branch vectors carry predicted boxes in scene-normalized coordinates;
// proposal_box stays in pixels for matching and delta decoding.
inline std::vector<FusionInput> make_fusion_inputs(
    const SceneRecord& scene, const SegregationResult& seg) {
  if (scene.width <= 0 || scene.height <= 0) {
    throw std::invalid_argument(
        "make_fusion_inputs: scene dimensions must be positive");
  }
  const double w = static_cast<double>(scene.width);
  const double h = static_cast<double>(scene.height);
  std::vector<FusionInput> inputs;
  inputs.reserve(seg.overlapping.size());
  const std::vector<Proposal>& base_props = scene.base_output.proposals;
  const std::vector<Proposal>& novel_props = scene.novel_output.proposals;
  for (const auto& [source, index] : seg.overlapping) {
    FusionInput in;
    if (source == Source::kBase) {
      const Proposal& own = base_props[index];
      if (novel_props.empty()) continue;
      const Proposal& other =
          novel_props[detail::best_iou_index(own.box, novel_props)];
      in.base_branch = detail::branch_vector(own, w, h);
      in.novel_branch = detail::branch_vector(other, w, h);
      in.proposal_box = own.box;
    } else {
      const Proposal& own = novel_props[index];
      if (base_props.empty()) continue;
      const Proposal& other =
          base_props[detail::best_iou_index(own.box, base_props)];
      in.base_branch = detail::branch_vector(other, w, h);
      in.novel_branch = detail::branch_vector(own, w, h);
      in.proposal_box = own.box;
    }
    inputs.push_back(std::move(in));
  }
  return inputs;
}

// Segregates every scene at tau and turns its overlapping proposals into
// training examples. Each input is matched against the scene's novel and
// pseudo ground truth (real base annotations are not available in the
// incremental setting and are ignored if present): the best-IoU box at
// or above match_iou sets the class and box-delta target, anything else
// is background.
inline std::vector<FusionExample> build_training_set(
    const std::vector<SceneRecord>& scenes, const ClassPartition& partition,
    double tau, double match_iou) {
  if (!(match_iou >= 0.0 && match_iou <= 1.0)) {
    throw std::invalid_argument("match_iou must be in [0,1]");
  }
  const int background = partition.num_classes();
  std::vector<FusionExample> examples;
  for (const SceneRecord& scene : scenes) {
    std::vector<const GroundTruthObject*> targets;
    for (const GroundTruthObject& gt : scene.ground_truth) {
      if (gt.is_pseudo || partition.is_novel(gt.class_id)) {
        targets.push_back(&gt);
      }
    }
    const SegregationResult seg = segregate(scene.base_output.proposals,
                                            scene.novel_output.proposals, tau);
    for (FusionInput& input : make_fusion_inputs(scene, seg)) {
      FusionTarget target;
      double best_iou = -1.0;
      const GroundTruthObject* best = nullptr;
      for (const GroundTruthObject* gt : targets) {
        const double v = iou(input.proposal_box, gt->box);
        if (v > best_iou) {
          best_iou = v;
          best = gt;
        }
      }
      if (best != nullptr && best_iou >= match_iou) {
        target.class_id = best->class_id;
        target.box_delta = encode_box_delta(input.proposal_box, best->box);
      } else {
        target.class_id = background;
        target.box_delta = {0.0, 0.0, 0.0, 0.0};
      }
      examples.push_back(FusionExample{std::move(input), target});
    }
  }
  return examples;
}

// Runs the net on each overlapping-region input and emits a fusion
// detection whenever the most probable class is a real class with
// probability at or above score_thresh. The box is the proposal box
// adjusted by the predicted deltas.
inline std::vector<Detection> predict(const FusionNetParams& params,
                                      const std::vector<FusionInput>& inputs,
                                      double score_thresh) {
  std::vector<Detection> detections;
  for (const FusionInput& input : inputs) {
    const FusionOutput out = forward(params, input);
    const std::vector<double> probs = softmax(out.class_scores);
    std::size_t argmax = 0;
    for (std::size_t k = 1; k < probs.size(); ++k) {
      if (probs[k] > probs[argmax]) argmax = k;
    }
    if (static_cast<int>(argmax) == params.n_classes) continue;  // background
    if (probs[argmax] < score_thresh) continue;
    Detection det;
    det.box = apply_box_delta(input.proposal_box, out.box_delta);
    det.class_id = static_cast<int>(argmax);
    det.score = probs[argmax];
    det.provenance = Provenance::kFusion;
    det.proposal_index = -1;
    detections.push_back(det);
  }
  return detections;
}

}  // namespace dualfusion
