#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "harmonic/datasets.hpp"
#include "harmonic/heads.hpp"
#include "harmonic/models.hpp"

namespace harmonic {

/// Optimizer and loop settings. Defaults are the algorithmic-task settings:
/// AdamW at lr 2e-3, weight decay 1e-2, embedding L2 0.01, 7000 full-batch
/// epochs evaluated every epoch.
struct TrainConfig {
  double lr = 2e-3;
  double weight_decay = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t epochs = 7000;
  double train_fraction = 0.8;
  double emb_l2 = 0.01;
  std::size_t eval_every = 1;
  std::uint64_t seed = 0;
  /// 0 means full batch.
  std::size_t batch = 0;

  /// Throws ContractError when a field is out of range.
  void validate() const;
};

/// First and second moment estimates for every parameter tensor.
struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::size_t step = 0;
};

/// One decoupled-weight-decay Adam update. Bias parameters are not decayed.
/// Throws NumericError if any gradient entry is non-finite.
void adamw_step(std::vector<Parameter>& params, const std::vector<Tensor>& grads,
                AdamState& state, const TrainConfig& config);

/// Evaluation series of one run, one entry per evaluation.
struct RunMetrics {
  std::vector<std::size_t> epoch;
  std::vector<double> train_loss;
  std::vector<double> test_loss;
  std::vector<double> train_acc;
  std::vector<double> test_acc;
  std::vector<double> param_l2;
  std::vector<double> head_l2;
  /// Set when the run stopped early on a non-finite loss or gradient.
  bool diverged = false;
  std::string divergence;

  std::size_t size() const noexcept { return epoch.size(); }

  /// Header `epoch,train_loss,test_loss,train_acc,test_acc,param_l2,head_l2`,
  /// values printed with 17 significant digits.
  void write_csv(std::ostream& out) const;
  static RunMetrics read_csv(std::istream& in);
};

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Mean negative log-likelihood and accuracy. Throws ContractError on an empty
/// sample list.
EvalResult evaluate(const Model& model, const HeadKind& head, const LabeledBatch& samples);

struct TrainResult {
  RunMetrics metrics;
  Model model;
};

using EvalCallback = std::function<void(const RunMetrics&)>;

/// Trains in place of `model` and records metrics at epoch 0 and then every
/// `eval_every` epochs (always including the last). Loss is the mean
/// negative log-likelihood plus emb_l2 * |E|_F^2 for token models.
TrainResult train(Model model, const HeadKind& head, const LabeledBatch& train_set,
                  const LabeledBatch& test_set, const TrainConfig& config,
                  const EvalCallback& on_eval = {});

/// Splits `data` with config.train_fraction and config.seed, initializes an
/// MLP from config.seed and trains it.
TrainResult train(const TokenDataset& data, const HeadKind& head, const TrainConfig& config,
                  const EvalCallback& on_eval = {});

}  // namespace harmonic
