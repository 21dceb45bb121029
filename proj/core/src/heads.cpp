#include "harmonic/heads.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

namespace harmonic {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatMap = Eigen::Map<const RowMatrix>;
using MatMap = Eigen::Map<RowMatrix>;

ConstMatMap as_matrix(const Tensor& t) {
  return ConstMatMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                     static_cast<Eigen::Index>(t.cols()));
}

MatMap as_matrix(Tensor& t) {
  return MatMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                static_cast<Eigen::Index>(t.cols()));
}

void check_target(std::size_t target, std::size_t classes) {
  if (target >= classes) {
    throw IndexError("class index " + std::to_string(target) + " out of range for " +
                     std::to_string(classes) + " classes");
  }
}

void check_query(const Tensor& weights, std::size_t query_dim) {
  require_matrix(weights, "head weights");
  if (weights.rows() != query_dim) {
    throw DimensionError("head expects " + std::to_string(weights.rows()) +
                         "-dimensional inputs, got " + std::to_string(query_dim));
  }
}

void check_harmonic(double exponent, double epsilon) {
  if (!(exponent > 0.0)) throw ContractError("harmonic exponent must be positive");
  if (!(epsilon >= 0.0)) throw ContractError("harmonic epsilon must be non-negative");
}

// Row b of `out` receives the regularized distances from inputs[b] to every key.
Tensor distances(const Tensor& inputs, const Tensor& weights, double epsilon) {
  const std::size_t batch = inputs.rows();
  const std::size_t dim = inputs.cols();
  const std::size_t classes = weights.cols();
  // Differences are formed explicitly (no |x|^2 + |w|^2 - 2xw expansion) so
  // distances near zero keep full relative precision. The inner loop runs
  // along a row of W, which is contiguous.
  Tensor out({batch, classes});
  for (std::size_t b = 0; b < batch; ++b) {
    double* d = out.row_span(b).data();
    const double* x = inputs.row_span(b).data();
    for (std::size_t j = 0; j < dim; ++j) {
      const double* w = weights.row_span(j).data();
      const double xj = x[j];
      for (std::size_t k = 0; k < classes; ++k) {
        const double diff = w[k] - xj;
        d[k] += diff * diff;
      }
    }
  }
  auto d = as_matrix(out);
  d = (d.array() + epsilon * epsilon).sqrt().matrix();
  return out;
}

}  // namespace

std::string head_name(const HeadKind& head) {
  return std::holds_alternative<HarmonicHead>(head) ? "harmonic" : "ce";
}

bool is_harmonic(const HeadKind& head) { return std::holds_alternative<HarmonicHead>(head); }

void validate_head(const HeadKind& head) {
  if (const auto* h = std::get_if<HarmonicHead>(&head)) {
    check_harmonic(h->exponent, h->epsilon);
    if (!(h->epsilon > 0.0)) throw ContractError("harmonic epsilon must be positive");
  }
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw DimensionError("log_sum_exp of an empty vector");
  const double m = *std::max_element(values.begin(), values.end());
  if (std::isinf(m)) return m;
  double s = 0.0;
  for (double v : values) s += std::exp(v - m);
  return m + std::log(s);
}

Tensor softmax(std::span<const double> logits) {
  Tensor p({1, logits.size()});
  const double lse = log_sum_exp(logits);
  for (std::size_t i = 0; i < logits.size(); ++i) p[i] = std::exp(logits[i] - lse);
  return p;
}

Tensor harmax(std::span<const double> distances, double exponent) {
  if (!(exponent > 0.0)) throw ContractError("harmonic exponent must be positive");
  std::vector<double> scores(distances.size());
  for (std::size_t i = 0; i < distances.size(); ++i) {
    if (!(distances[i] > 0.0)) throw ContractError("harmax requires positive distances");
    scores[i] = -exponent * std::log(distances[i]);
  }
  return softmax(scores);
}

HeadForward ce_forward(const Tensor& weights, std::span<const double> x, std::size_t target) {
  check_query(weights, x.size());
  check_target(target, weights.cols());
  const Tensor query = Tensor::row(x);
  const BatchHeadOutput out =
      head_forward_batch(query, weights, std::span(&target, 1), CrossEntropyHead{});
  return {out.scores, out.probs, out.losses[0]};
}

HeadGradients ce_backward(const Tensor& weights, std::span<const double> x, std::size_t target) {
  const HeadForward fwd = ce_forward(weights, x, target);
  const std::size_t classes = weights.cols();
  HeadGradients g{Tensor(weights.shape()), Tensor({1, x.size()})};
  for (std::size_t k = 0; k < classes; ++k) {
    const double dy = fwd.probs[k] - (k == target ? 1.0 : 0.0);
    for (std::size_t j = 0; j < x.size(); ++j) {
      g.weights(j, k) = x[j] * dy;
      g.input[j] += weights(j, k) * dy;
    }
  }
  return g;
}

HeadForward harmonic_forward(const Tensor& weights, std::span<const double> x,
                             std::size_t target, double exponent, double epsilon) {
  check_query(weights, x.size());
  check_target(target, weights.cols());
  check_harmonic(exponent, epsilon);
  const Tensor query = Tensor::row(x);
  const BatchHeadOutput out = head_forward_batch(query, weights, std::span(&target, 1),
                                                 HarmonicHead{exponent, epsilon});
  return {out.scores, out.probs, out.losses[0]};
}

HeadGradients harmonic_backward(const Tensor& weights, std::span<const double> x,
                                std::size_t target, double exponent, double epsilon) {
  const HeadForward fwd = harmonic_forward(weights, x, target, exponent, epsilon);
  const std::size_t classes = weights.cols();
  HeadGradients g{Tensor(weights.shape()), Tensor({1, x.size()})};
  for (std::size_t k = 0; k < classes; ++k) {
    const double d = fwd.scores[k];
    // dl/dd_k = n (delta_kc - p_k) / d_k, and dd_k/dw_k = (w_k - x) / d_k.
    const double coeff = exponent * ((k == target ? 1.0 : 0.0) - fwd.probs[k]) / (d * d);
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double diff = weights(j, k) - x[j];
      g.weights(j, k) = coeff * diff;
      g.input[j] -= coeff * diff;
    }
  }
  return g;
}

int choose_exponent(long intrinsic_dimension) {
  if (intrinsic_dimension < 1) throw ContractError("intrinsic dimension must be >= 1");
  const long n = std::lround(std::sqrt(static_cast<double>(intrinsic_dimension)));
  return static_cast<int>(std::max(1L, n));
}

Tensor head_scores(const Tensor& inputs, const Tensor& weights, const HeadKind& head) {
  require_matrix(inputs, "head inputs");
  check_query(weights, inputs.cols());
  if (const auto* h = std::get_if<HarmonicHead>(&head)) {
    return distances(inputs, weights, h->epsilon);
  }
  Tensor logits({inputs.rows(), weights.cols()});
  as_matrix(logits).noalias() = as_matrix(inputs) * as_matrix(weights);
  return logits;
}

BatchHeadOutput head_forward_batch(const Tensor& inputs, const Tensor& weights,
                                   std::span<const std::size_t> targets, const HeadKind& head) {
  validate_head(head);
  BatchHeadOutput out;
  out.scores = head_scores(inputs, weights, head);
  const std::size_t batch = inputs.rows();
  const std::size_t classes = weights.cols();
  if (targets.size() != batch) {
    throw DimensionError("head: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(batch) + " inputs");
  }
  for (std::size_t t : targets) check_target(t, classes);
  out.probs = Tensor({batch, classes});
  out.losses = Tensor({batch, 1});
  if (batch == 0) return out;

  // Log-space scores for the whole batch, then one max-shifted softmax per row.
  RowMatrix logits;
  if (const auto* h = std::get_if<HarmonicHead>(&head)) {
    logits = -h->exponent * as_matrix(out.scores).array().log();
  } else {
    logits = as_matrix(out.scores);
  }
  const Eigen::VectorXd row_max = logits.rowwise().maxCoeff();
  auto probs = as_matrix(out.probs);
  probs = (logits.colwise() - row_max).array().exp().matrix();
  const Eigen::VectorXd row_sum = probs.rowwise().sum();
  probs.array().colwise() /= row_sum.array();
  for (std::size_t b = 0; b < batch; ++b) {
    const auto i = static_cast<Eigen::Index>(b);
    out.losses[b] = std::log(row_sum[i]) + row_max[i] - logits(i, static_cast<Eigen::Index>(targets[b]));
  }
  return out;
}

Var head_loss(Graph& graph, Var inputs, Var weights, std::span<const std::size_t> targets,
              const HeadKind& head) {
  const Tensor& x = graph.value(inputs);
  const Tensor& w = graph.value(weights);
  BatchHeadOutput fwd = head_forward_batch(x, w, targets, head);
  const std::size_t batch = x.rows();
  if (batch == 0) throw DimensionError("head_loss on an empty batch");
  double total = 0.0;
  for (double l : fwd.losses.data()) total += l;
  const Tensor loss = Tensor::scalar(total / static_cast<double>(batch));

  // dl/dscore per row, already divided by the batch size. For the harmonic
  // head this is the coefficient c_bk = n (delta - p) / d^2 multiplying (w_k - x_b).
  Tensor coeff = fwd.probs;
  for (std::size_t b = 0; b < batch; ++b) coeff(b, targets[b]) -= 1.0;
  const double inv_batch = 1.0 / static_cast<double>(batch);

  if (const auto* h = std::get_if<HarmonicHead>(&head)) {
    const double n = h->exponent;
    for (std::size_t i = 0; i < coeff.size(); ++i) {
      const double d = fwd.scores[i];
      coeff[i] = -n * coeff[i] / (d * d) * inv_batch;
    }
    return graph.custom(
        "harmonic_loss", {inputs, weights}, loss,
        [coeff = std::move(coeff)](const BackwardArgs& args) {
          const double up = args.upstream[0];
          const auto c = as_matrix(coeff);
          const auto xm = as_matrix(*args.inputs[0]);
          const auto wm = as_matrix(*args.inputs[1]);
          if (Tensor* gx = args.grads[0]) {
            // dx_b = sum_k c_bk (x_b - w_k)
            auto g = as_matrix(*gx);
            g.noalias() += up * (c.rowwise().sum().asDiagonal() * xm);
            g.noalias() -= up * (c * wm.transpose());
          }
          if (Tensor* gw = args.grads[1]) {
            // dw_k = sum_b c_bk (w_k - x_b)
            auto g = as_matrix(*gw);
            g.noalias() += up * (wm * c.colwise().sum().asDiagonal());
            g.noalias() -= up * (xm.transpose() * c);
          }
        });
  }

  for (double& v : coeff.data()) v *= inv_batch;
  return graph.custom("ce_loss", {inputs, weights}, loss,
                      [coeff = std::move(coeff)](const BackwardArgs& args) {
                        const double up = args.upstream[0];
                        const auto dy = as_matrix(coeff);
                        if (Tensor* gx = args.grads[0]) {
                          as_matrix(*gx).noalias() += up * (dy * as_matrix(*args.inputs[1]).transpose());
                        }
                        if (Tensor* gw = args.grads[1]) {
                          as_matrix(*gw).noalias() += up * (as_matrix(*args.inputs[0]).transpose() * dy);
                        }
                      });
}

}  // namespace harmonic
