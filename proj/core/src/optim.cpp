#include "harmonic/optim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "harmonic/random.hpp"

namespace harmonic {

namespace {

constexpr std::size_t kEvalChunk = 2048;
constexpr const char* kMetricsHeader = "epoch,train_loss,test_loss,train_acc,test_acc,param_l2,head_l2";

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  if (s == "nan" || s == "-nan") return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw FormatError("metrics: bad number '" + s + "'");
  return v;
}

// Contiguous slice [begin, end) of a batch.
LabeledBatch slice(const LabeledBatch& batch, std::size_t begin, std::size_t end) {
  LabeledBatch out;
  out.targets.assign(batch.targets.begin() + static_cast<std::ptrdiff_t>(begin),
                     batch.targets.begin() + static_cast<std::ptrdiff_t>(end));
  if (const auto* t = std::get_if<TokenBatch>(&batch.inputs)) {
    TokenBatch part{t->width, {}};
    part.ids.assign(t->ids.begin() + static_cast<std::ptrdiff_t>(begin * t->width),
                    t->ids.begin() + static_cast<std::ptrdiff_t>(end * t->width));
    out.inputs = std::move(part);
  } else {
    const Tensor& f = std::get<Tensor>(batch.inputs);
    const std::size_t dim = f.cols();
    std::vector<double> rows(f.data().begin() + static_cast<std::ptrdiff_t>(begin * dim),
                             f.data().begin() + static_cast<std::ptrdiff_t>(end * dim));
    out.inputs = Tensor({end - begin, dim}, std::move(rows));
  }
  return out;
}

LabeledBatch gather(const LabeledBatch& batch, std::span<const std::size_t> rows) {
  LabeledBatch out;
  out.targets.reserve(rows.size());
  for (std::size_t r : rows) out.targets.push_back(batch.targets[r]);
  if (const auto* t = std::get_if<TokenBatch>(&batch.inputs)) {
    TokenBatch part{t->width, {}};
    part.ids.reserve(rows.size() * t->width);
    for (std::size_t r : rows) {
      part.ids.insert(part.ids.end(), t->ids.begin() + static_cast<std::ptrdiff_t>(r * t->width),
                      t->ids.begin() + static_cast<std::ptrdiff_t>((r + 1) * t->width));
    }
    out.inputs = std::move(part);
  } else {
    const Tensor& f = std::get<Tensor>(batch.inputs);
    Tensor part({rows.size(), f.cols()});
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto src = f.row_span(rows[i]);
      std::copy(src.begin(), src.end(), part.row_span(i).begin());
    }
    out.inputs = std::move(part);
  }
  return out;
}

struct StepOutcome {
  bool ok = true;
  std::string error;
};

StepOutcome optimizer_step(Model& model, const HeadKind& head, const LabeledBatch& batch,
                           AdamState& state, const TrainConfig& config) {
  try {
    Graph g;
    std::vector<Var> vars;
    vars.reserve(model.params.size());
    for (const Parameter& p : model.params) vars.push_back(g.parameter(p.value));
    const Var x = forward_body(g, model, vars, batch.inputs);
    Var loss = head_loss(g, x, vars.back(), batch.targets, head);
    if (config.emb_l2 > 0.0 && model.spec.body == BodyKind::token_mlp) {
      loss = g.add(loss, g.scale(g.sum(g.square(vars.front())), config.emb_l2));
    }
    const Gradients grads = g.backward(loss);
    std::vector<Tensor> flat;
    flat.reserve(vars.size());
    for (Var v : vars) flat.push_back(grads[v]);
    adamw_step(model.params, flat, state, config);
  } catch (const NumericError& e) {
    return {false, e.what()};
  }
  return {};
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ContractError("lr must be positive");
  if (!(weight_decay >= 0.0)) throw ContractError("weight decay must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ContractError("betas must lie in [0, 1)");
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ContractError("train fraction must lie in (0, 1)");
  }
  if (!(emb_l2 >= 0.0)) throw ContractError("embedding L2 must be non-negative");
  if (eval_every == 0) throw ContractError("eval_every must be at least 1");
}

void adamw_step(std::vector<Parameter>& params, const std::vector<Tensor>& grads,
                AdamState& state, const TrainConfig& config) {
  if (grads.size() != params.size()) throw DimensionError("adamw: gradient count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    require_same_shape(params[i].value, grads[i], "adamw");
    if (!grads[i].all_finite()) {
      throw NumericError("adamw: non-finite gradient for parameter '" + params[i].name + "'");
    }
  }
  if (state.m.size() != params.size()) {
    state.m.clear();
    state.v.clear();
    for (const Parameter& p : params) {
      state.m.emplace_back(p.value.shape());
      state.v.emplace_back(p.value.shape());
    }
    state.step = 0;
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double decay = params[i].role == ParamRole::bias ? 0.0 : config.weight_decay;
    auto theta = params[i].value.data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    const auto g = grads[i].data();
    for (std::size_t k = 0; k < theta.size(); ++k) {
      m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g[k];
      v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g[k] * g[k];
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      theta[k] -= config.lr * (m_hat / (std::sqrt(v_hat) + config.adam_epsilon) + decay * theta[k]);
    }
  }
}

void RunMetrics::write_csv(std::ostream& out) const {
  out << kMetricsHeader << '\n';
  for (std::size_t i = 0; i < size(); ++i) {
    out << epoch[i] << ',' << format_double(train_loss[i]) << ',' << format_double(test_loss[i])
        << ',' << format_double(train_acc[i]) << ',' << format_double(test_acc[i]) << ','
        << format_double(param_l2[i]) << ',' << format_double(head_l2[i]) << '\n';
  }
}

RunMetrics RunMetrics::read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw FormatError("metrics: unexpected header '" + line + "'");
  }
  RunMetrics m;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 7) throw FormatError("metrics: expected 7 columns in '" + line + "'");
    m.epoch.push_back(static_cast<std::size_t>(std::stoull(cells[0])));
    m.train_loss.push_back(parse_double(cells[1]));
    m.test_loss.push_back(parse_double(cells[2]));
    m.train_acc.push_back(parse_double(cells[3]));
    m.test_acc.push_back(parse_double(cells[4]));
    m.param_l2.push_back(parse_double(cells[5]));
    m.head_l2.push_back(parse_double(cells[6]));
  }
  return m;
}

EvalResult evaluate(const Model& model, const HeadKind& head, const LabeledBatch& samples) {
  const std::size_t n = samples.size();
  if (n == 0) throw ContractError("evaluate: empty sample list");
  if (batch_count(samples.inputs) != n) throw DimensionError("evaluate: inputs/targets mismatch");
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t begin = 0; begin < n; begin += kEvalChunk) {
    const std::size_t end = std::min(n, begin + kEvalChunk);
    const bool whole = begin == 0 && end == n;
    const LabeledBatch part = whole ? LabeledBatch{} : slice(samples, begin, end);
    const LabeledBatch& chunk = whole ? samples : part;
    const Tensor x = penultimate(model, chunk.inputs);
    const BatchHeadOutput out = head_forward_batch(x, model.head(), chunk.targets, head);
    const std::vector<std::size_t> predicted = predict_from_scores(out.scores, head);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      loss += out.losses[i];
      if (predicted[i] == chunk.targets[i]) ++correct;
    }
  }
  if (!std::isfinite(loss)) throw NumericError("evaluate: non-finite loss");
  return {loss / static_cast<double>(n), static_cast<double>(correct) / static_cast<double>(n)};
}

TrainResult train(Model model, const HeadKind& head, const LabeledBatch& train_set,
                  const LabeledBatch& test_set, const TrainConfig& config,
                  const EvalCallback& on_eval) {
  config.validate();
  validate_head(head);
  if (train_set.size() == 0) throw ContractError("train: empty training set");

  TrainResult result{{}, std::move(model)};
  RunMetrics& metrics = result.metrics;
  Model& m = result.model;

  const auto record = [&](std::size_t epoch) {
    try {
      const EvalResult tr = evaluate(m, head, train_set);
      const EvalResult te = evaluate(m, head, test_set);
      metrics.epoch.push_back(epoch);
      metrics.train_loss.push_back(tr.loss);
      metrics.test_loss.push_back(te.loss);
      metrics.train_acc.push_back(tr.accuracy);
      metrics.test_acc.push_back(te.accuracy);
      metrics.param_l2.push_back(std::sqrt(m.squared_norm()));
      metrics.head_l2.push_back(m.head().norm());
    } catch (const NumericError& e) {
      metrics.diverged = true;
      metrics.divergence = "epoch " + std::to_string(epoch) + ": " + e.what();
      return false;
    }
    if (on_eval) on_eval(metrics);
    return true;
  };

  if (!record(0)) return result;

  const std::size_t n = train_set.size();
  const bool full = config.batch == 0 || config.batch >= n;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  AdamState state;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    if (full) {
      const StepOutcome s = optimizer_step(m, head, train_set, state, config);
      if (!s.ok) {
        metrics.diverged = true;
        metrics.divergence = "epoch " + std::to_string(epoch) + ": " + s.error;
        return result;
      }
    } else {
      rng.shuffle(std::span<std::size_t>(order));
      for (std::size_t begin = 0; begin < n; begin += config.batch) {
        const std::size_t end = std::min(n, begin + config.batch);
        const LabeledBatch mini = gather(train_set, std::span(order).subspan(begin, end - begin));
        const StepOutcome s = optimizer_step(m, head, mini, state, config);
        if (!s.ok) {
          metrics.diverged = true;
          metrics.divergence = "epoch " + std::to_string(epoch) + ": " + s.error;
          return result;
        }
      }
    }
    if (epoch % config.eval_every == 0 || epoch == config.epochs) {
      if (!record(epoch)) return result;
    }
  }
  return result;
}

TrainResult train(const TokenDataset& data, const HeadKind& head, const TrainConfig& config,
                  const EvalCallback& on_eval) {
  config.validate();
  const Split s = split(data.size(), config.train_fraction, config.seed);
  const LabeledBatch train_set = make_batch(data, s.train);
  const LabeledBatch test_set = make_batch(data, s.test);
  Model model = init_params(mlp_spec(data.vocab_in, data.vocab_out, data.tokens_per_input),
                            config.seed);
  return train(std::move(model), head, train_set, test_set, config, on_eval);
}

}  // namespace harmonic
