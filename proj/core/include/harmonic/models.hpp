#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "harmonic/graph.hpp"
#include "harmonic/heads.hpp"
#include "harmonic/tensor.hpp"

namespace harmonic {

/// How a parameter is treated by the optimizer and regularizers.
enum class ParamRole { embedding, weight, bias, head };

struct Parameter {
  std::string name;
  ParamRole role;
  Tensor value;
};

enum class BodyKind {
  token_mlp,  // embed tokens, concatenate, two hidden layers
  identity,   // dense features go straight into the head
};

/// Architecture description. Layer widths default to 16-dim embeddings and
/// hidden widths 100 and 16.
struct ModelSpec {
  BodyKind body = BodyKind::token_mlp;
  std::size_t vocab_in = 0;          // token_mlp
  std::size_t tokens_per_input = 0;  // token_mlp
  std::size_t embed_dim = 16;        // token_mlp
  std::size_t hidden = 100;          // token_mlp
  std::size_t input_dim = 0;         // identity: feature count
  std::size_t penultimate = 16;      // token_mlp: width of the last hidden layer
  std::size_t classes = 0;
  /// Init std of embedding rows; a lookup has fan_in 1.
  double embed_std = 1.0;
  /// Init std of head columns; 0 means 1/sqrt(head_dim).
  double head_std = 0.0;

  /// Width of the representation fed into the head.
  std::size_t head_dim() const;
};

/// Head keys are drawn at unit scale, like the embeddings, for either head.
ModelSpec mlp_spec(std::size_t vocab_in, std::size_t vocab_out, std::size_t tokens_per_input);
/// Flattened 28x28 images into a 784 x 10 head.
ModelSpec image_spec();
/// Two-dimensional points straight into a 2 x classes head.
ModelSpec toy_spec(std::size_t classes);

/// Parameters of one model instance, in a fixed order:
/// token_mlp: embedding, w1, b1, w2, b2, head; identity: head.
struct Model {
  ModelSpec spec;
  std::vector<Parameter> params;

  const Tensor& head() const;
  Tensor& head();
  /// Token embedding matrix; throws ContractError for identity bodies.
  const Tensor& embedding() const;
  /// Sum of squared entries over all parameters (rooted by callers).
  double squared_norm() const;
};

/// Weights ~ Normal(0, 1/sqrt(fan_in)); biases zero; embedding entries ~
/// Normal(0, embed_std); head entries ~ Normal(0, head_std), or
/// Normal(0, 1/sqrt(head_dim)) when head_std is 0. Deterministic per seed.
Model init_params(const ModelSpec& spec, std::uint64_t seed);

/// A batch of model inputs: token tuples (row-major, `width` ids per
/// example) or dense feature rows.
struct TokenBatch {
  std::size_t width = 0;
  std::vector<std::size_t> ids;
  std::size_t count() const { return width == 0 ? 0 : ids.size() / width; }
};
using InputBatch = std::variant<TokenBatch, Tensor>;

std::size_t batch_count(const InputBatch& inputs);

/// Records the body of the network on `graph` and returns the B x head_dim
/// penultimate representation. `params` are graph nodes aligned with
/// model.params.
Var forward_body(Graph& graph, const Model& model, std::span<const Var> params,
                 const InputBatch& inputs);

/// Penultimate representations without recording gradients.
Tensor penultimate(const Model& model, const InputBatch& inputs);

/// Single token tuple through the MLP body; returns 1 x penultimate.
Tensor mlp_forward(const Model& model, std::span<const std::size_t> tokens);

/// Validates a 784-pixel image in [0, 1] and returns it unchanged as 1 x 784.
Tensor image_forward(std::span<const double> image);

/// Raw byte to [0, 1].
constexpr double normalize_pixel(std::uint8_t raw) { return static_cast<double>(raw) / 255.0; }

/// Cross-entropy: argmax logit; harmonic: argmin distance. Ties go to the
/// lowest index.
std::size_t predict(std::span<const double> x, const Tensor& head_weights, const HeadKind& head);
/// Same rule applied to every row of a B x V score matrix from head_scores.
std::vector<std::size_t> predict_from_scores(const Tensor& scores, const HeadKind& head);

/// Parameter checkpoint: a JSON manifest line (names, roles, shapes,
/// architecture) followed by the raw little-endian float64 values of every
/// parameter in manifest order.
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

std::string role_name(ParamRole role);

}  // namespace harmonic
