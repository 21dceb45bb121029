#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <variant>

#include "harmonic/graph.hpp"
#include "harmonic/tensor.hpp"

namespace harmonic {

/// Inner-product logits followed by softmax.
struct CrossEntropyHead {};

/// Distance logits followed by harmax.
///
/// Distances are regularized as sqrt(|w - x|^2 + epsilon^2) so that the loss
/// stays differentiable when a query lands exactly on a key.
struct HarmonicHead {
  double exponent = 1.0;
  double epsilon = 1e-8;
};

using HeadKind = std::variant<CrossEntropyHead, HarmonicHead>;

/// "ce" or "harmonic".
std::string head_name(const HeadKind& head);
bool is_harmonic(const HeadKind& head);
/// Throws ContractError for a non-positive exponent or epsilon.
void validate_head(const HeadKind& head);

/// Single-example forward result. `scores` holds the logits y for the
/// cross-entropy head and the distances d for the harmonic head (1 x V).
struct HeadForward {
  Tensor scores;
  Tensor probs;
  double loss = 0.0;
};

struct HeadGradients {
  Tensor weights;  // N x V, same as W
  Tensor input;    // 1 x N, same as x
};

/// Softmax over a score vector using a max shift.
Tensor softmax(std::span<const double> logits);
/// Max-shifted log(sum(exp(v))).
double log_sum_exp(std::span<const double> values);
/// p_i = d_i^-n / sum_j d_j^-n, evaluated in log space. Distances must be > 0.
Tensor harmax(std::span<const double> distances, double exponent);

/// W is N x V with one key per column; x has N entries; 0 <= c < V.
HeadForward ce_forward(const Tensor& weights, std::span<const double> x, std::size_t target);
HeadGradients ce_backward(const Tensor& weights, std::span<const double> x, std::size_t target);

HeadForward harmonic_forward(const Tensor& weights, std::span<const double> x,
                             std::size_t target, double exponent, double epsilon);
HeadGradients harmonic_backward(const Tensor& weights, std::span<const double> x,
                                std::size_t target, double exponent, double epsilon);

/// Harmonic exponent heuristic n = round(sqrt(D)), at least 1.
int choose_exponent(long intrinsic_dimension);

/// Batched scores for B queries (rows of `inputs`, B x N): B x V logits for
/// cross-entropy, B x V regularized distances for harmonic.
Tensor head_scores(const Tensor& inputs, const Tensor& weights, const HeadKind& head);

/// Per-row probabilities and negative log-likelihoods for a batch.
struct BatchHeadOutput {
  Tensor scores;
  Tensor probs;
  Tensor losses;  // B x 1
};
BatchHeadOutput head_forward_batch(const Tensor& inputs, const Tensor& weights,
                                   std::span<const std::size_t> targets, const HeadKind& head);

/// Mean negative log-likelihood over the batch as a fused graph node with an
/// analytic backward. `inputs` is B x N, `weights` is N x V.
Var head_loss(Graph& graph, Var inputs, Var weights, std::span<const std::size_t> targets,
              const HeadKind& head);

}  // namespace harmonic
