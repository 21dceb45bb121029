#include "harmonic/graph.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>

namespace harmonic {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

MatMap as_matrix(Tensor& t) {
  return MatMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                static_cast<Eigen::Index>(t.cols()));
}

ConstMatMap as_matrix(const Tensor& t) {
  return ConstMatMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                     static_cast<Eigen::Index>(t.cols()));
}

std::size_t broadcast_dim(std::size_t a, std::size_t b, const char* what) {
  if (a == b || b == 1) return a;
  if (a == 1) return b;
  throw DimensionError(std::string(what) + ": cannot broadcast dimensions " +
                       std::to_string(a) + " and " + std::to_string(b));
}

// Sums `grad` (rows x cols) down to `target` shape, undoing broadcasting.
void accumulate_reduced(Tensor& target, const Tensor& grad, double sign = 1.0) {
  const std::size_t tr = target.rows();
  const std::size_t tc = target.cols();
  const std::size_t gr = grad.rows();
  const std::size_t gc = grad.cols();
  for (std::size_t i = 0; i < gr; ++i) {
    const std::size_t ti = tr == 1 ? 0 : i;
    for (std::size_t j = 0; j < gc; ++j) {
      const std::size_t tj = tc == 1 ? 0 : j;
      target(ti, tj) += sign * grad(i, j);
    }
  }
}

}  // namespace

const Tensor& Gradients::operator[](Var parameter) const {
  const auto it = std::lower_bound(leaves_.begin(), leaves_.end(), parameter.index);
  if (it == leaves_.end() || *it != parameter.index) {
    throw ContractError("gradient requested for a node that is not a parameter leaf");
  }
  return grads_[static_cast<std::size_t>(it - leaves_.begin())];
}

const Graph::Node& Graph::node(Var v) const {
  if (v.index >= nodes_.size()) throw ContractError("Var does not belong to this graph");
  return nodes_[v.index];
}

const Tensor& Graph::value(Var v) const { return node(v).value; }

bool Graph::requires_grad(Var v) const { return node(v).requires_grad; }

const std::string& Graph::op_name(Var v) const { return node(v).op; }

Var Graph::record(std::string op, std::vector<Var> inputs, Tensor value, BackwardFn backward) {
  if (!value.all_finite()) {
    throw NumericError("non-finite value produced by node " + std::to_string(nodes_.size()) +
                       " (" + op + ")");
  }
  Node n;
  n.op = std::move(op);
  n.value = std::move(value);
  for (Var in : inputs) {
    const Node& src = node(in);
    n.requires_grad = n.requires_grad || src.requires_grad;
    n.inputs.push_back(in.index);
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Graph::parameter(Tensor value) {
  Var v = record("parameter", {}, std::move(value), nullptr);
  nodes_[v.index].requires_grad = true;
  nodes_[v.index].is_parameter = true;
  return v;
}

Var Graph::constant(Tensor value) { return record("constant", {}, std::move(value), nullptr); }

Var Graph::matmul(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require_matrix(ta, "matmul");
  require_matrix(tb, "matmul");
  if (ta.cols() != tb.rows()) {
    throw DimensionError("matmul: " + shape_string(ta.shape()) + " x " +
                         shape_string(tb.shape()));
  }
  Tensor out({ta.rows(), tb.cols()});
  as_matrix(out).noalias() = as_matrix(ta) * as_matrix(tb);
  return record("matmul", {a, b}, std::move(out), [](const BackwardArgs& args) {
    const auto up = as_matrix(args.upstream);
    if (args.grads[0]) as_matrix(*args.grads[0]).noalias() += up * as_matrix(*args.inputs[1]).transpose();
    if (args.grads[1]) as_matrix(*args.grads[1]).noalias() += as_matrix(*args.inputs[0]).transpose() * up;
  });
}

Var Graph::add(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require_matrix(ta, "add");
  require_matrix(tb, "add");
  const std::size_t rows = broadcast_dim(ta.rows(), tb.rows(), "add");
  const std::size_t cols = broadcast_dim(ta.cols(), tb.cols(), "add");
  Tensor out({rows, cols});
  for (std::size_t i = 0; i < rows; ++i) {
    const std::size_t ia = ta.rows() == 1 ? 0 : i;
    const std::size_t ib = tb.rows() == 1 ? 0 : i;
    for (std::size_t j = 0; j < cols; ++j) {
      out(i, j) = ta(ia, ta.cols() == 1 ? 0 : j) + tb(ib, tb.cols() == 1 ? 0 : j);
    }
  }
  return record("add", {a, b}, std::move(out), [](const BackwardArgs& args) {
    if (args.grads[0]) accumulate_reduced(*args.grads[0], args.upstream);
    if (args.grads[1]) accumulate_reduced(*args.grads[1], args.upstream);
  });
}

Var Graph::sub(Var a, Var b) {
  return add(a, scale(b, -1.0));
}

Var Graph::mul(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require_same_shape(ta, tb, "mul");
  Tensor out = ta;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= tb[i];
  return record("mul", {a, b}, std::move(out), [](const BackwardArgs& args) {
    const Tensor& up = args.upstream;
    if (args.grads[0]) {
      for (std::size_t i = 0; i < up.size(); ++i) (*args.grads[0])[i] += up[i] * (*args.inputs[1])[i];
    }
    if (args.grads[1]) {
      for (std::size_t i = 0; i < up.size(); ++i) (*args.grads[1])[i] += up[i] * (*args.inputs[0])[i];
    }
  });
}

Var Graph::scale(Var a, double factor) {
  Tensor out = value(a);
  for (double& v : out.data()) v *= factor;
  return record("scale", {a}, std::move(out), [factor](const BackwardArgs& args) {
    args.grads[0]->add_scaled(args.upstream, factor);
  });
}

Var Graph::concat(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat: no operands");
  const std::size_t rows = value(parts[0]).rows();
  std::vector<std::size_t> offsets;
  std::size_t cols = 0;
  for (Var p : parts) {
    const Tensor& t = value(p);
    require_matrix(t, "concat");
    if (t.rows() != rows) {
      throw DimensionError("concat: row count " + std::to_string(t.rows()) + " vs " +
                           std::to_string(rows));
    }
    offsets.push_back(cols);
    cols += t.cols();
  }
  Tensor out({rows, cols});
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& t = value(parts[k]);
    for (std::size_t i = 0; i < rows; ++i) {
      std::copy(t.row_span(i).begin(), t.row_span(i).end(),
                out.row_span(i).begin() + static_cast<std::ptrdiff_t>(offsets[k]));
    }
  }
  return record("concat", std::vector<Var>(parts.begin(), parts.end()), std::move(out),
                [offsets](const BackwardArgs& args) {
                  const Tensor& up = args.upstream;
                  for (std::size_t k = 0; k < args.grads.size(); ++k) {
                    Tensor* g = args.grads[k];
                    if (!g) continue;
                    for (std::size_t i = 0; i < g->rows(); ++i) {
                      auto src = up.row_span(i).subspan(offsets[k], g->cols());
                      auto dst = g->row_span(i);
                      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
                    }
                  }
                });
}

Var Graph::gather_rows(Var a, std::span<const std::size_t> indices) {
  const Tensor& ta = value(a);
  require_matrix(ta, "gather_rows");
  Tensor out({indices.size(), ta.cols()});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= ta.rows()) {
      throw IndexError("gather_rows: index " + std::to_string(indices[i]) + " >= " +
                       std::to_string(ta.rows()) + " rows");
    }
    std::copy(ta.row_span(indices[i]).begin(), ta.row_span(indices[i]).end(),
              out.row_span(i).begin());
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return record("gather_rows", {a}, std::move(out),
                [idx = std::move(idx)](const BackwardArgs& args) {
                  Tensor& g = *args.grads[0];
                  for (std::size_t i = 0; i < idx.size(); ++i) {
                    auto src = args.upstream.row_span(i);
                    auto dst = g.row_span(idx[i]);
                    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
                  }
                });
}

Var Graph::reshape(Var a, Shape shape) {
  Tensor out = value(a).reshaped(std::move(shape));
  return record("reshape", {a}, std::move(out), [](const BackwardArgs& args) {
    Tensor& g = *args.grads[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += args.upstream[i];
  });
}

Var Graph::silu(Var a) {
  const Tensor& x = value(a);
  Tensor out(x.shape());
  Tensor sig(x.shape());
  const auto xs = Eigen::Map<const Eigen::ArrayXd>(x.data().data(), static_cast<Eigen::Index>(x.size()));
  auto ss = Eigen::Map<Eigen::ArrayXd>(sig.data().data(), static_cast<Eigen::Index>(x.size()));
  // exp(-x) overflows to inf for very negative x, giving sigmoid 0 as required.
  ss = (1.0 + (-xs).exp()).inverse();
  Eigen::Map<Eigen::ArrayXd>(out.data().data(), static_cast<Eigen::Index>(x.size())) = xs * ss;
  return record("silu", {a}, std::move(out), [sig = std::move(sig)](const BackwardArgs& args) {
    const Tensor& in = *args.inputs[0];
    Tensor& g = *args.grads[0];
    for (std::size_t i = 0; i < in.size(); ++i) {
      const double s = sig[i];
      g[i] += args.upstream[i] * s * (1.0 + in[i] * (1.0 - s));
    }
  });
}

Var Graph::square(Var a) {
  Tensor out = value(a);
  for (double& v : out.data()) v *= v;
  return record("square", {a}, std::move(out), [](const BackwardArgs& args) {
    const Tensor& x = *args.inputs[0];
    Tensor& g = *args.grads[0];
    for (std::size_t i = 0; i < x.size(); ++i) g[i] += 2.0 * x[i] * args.upstream[i];
  });
}

Var Graph::sqrt(Var a) {
  Tensor out = value(a);
  for (double& v : out.data()) v = std::sqrt(v);
  return record("sqrt", {a}, std::move(out), [](const BackwardArgs& args) {
    Tensor& g = *args.grads[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += args.upstream[i] / (2.0 * args.output[i]);
  });
}

Var Graph::log(Var a) {
  Tensor out = value(a);
  for (double& v : out.data()) v = std::log(v);
  return record("log", {a}, std::move(out), [](const BackwardArgs& args) {
    const Tensor& x = *args.inputs[0];
    Tensor& g = *args.grads[0];
    for (std::size_t i = 0; i < x.size(); ++i) g[i] += args.upstream[i] / x[i];
  });
}

Var Graph::sum(Var a) {
  double s = 0.0;
  for (double v : value(a).data()) s += v;
  return record("sum", {a}, Tensor::scalar(s), [](const BackwardArgs& args) {
    const double up = args.upstream[0];
    for (double& g : args.grads[0]->data()) g += up;
  });
}

Var Graph::row_sum(Var a) {
  const Tensor& ta = value(a);
  require_matrix(ta, "row_sum");
  Tensor out({ta.rows(), 1});
  for (std::size_t i = 0; i < ta.rows(); ++i) {
    double s = 0.0;
    for (double v : ta.row_span(i)) s += v;
    out[i] = s;
  }
  return record("row_sum", {a}, std::move(out), [](const BackwardArgs& args) {
    Tensor& g = *args.grads[0];
    for (std::size_t i = 0; i < g.rows(); ++i) {
      for (double& v : g.row_span(i)) v += args.upstream[i];
    }
  });
}

Var Graph::col_sum(Var a) {
  const Tensor& ta = value(a);
  require_matrix(ta, "col_sum");
  Tensor out({1, ta.cols()});
  for (std::size_t i = 0; i < ta.rows(); ++i) {
    for (std::size_t j = 0; j < ta.cols(); ++j) out[j] += ta(i, j);
  }
  return record("col_sum", {a}, std::move(out), [](const BackwardArgs& args) {
    Tensor& g = *args.grads[0];
    for (std::size_t i = 0; i < g.rows(); ++i) {
      for (std::size_t j = 0; j < g.cols(); ++j) g(i, j) += args.upstream[j];
    }
  });
}

Var Graph::logsumexp(Var a) {
  const Tensor& ta = value(a);
  require_matrix(ta, "logsumexp");
  if (ta.cols() == 0) throw DimensionError("logsumexp: empty rows");
  Tensor out({ta.rows(), 1});
  for (std::size_t i = 0; i < ta.rows(); ++i) {
    const auto r = ta.row_span(i);
    const double m = *std::max_element(r.begin(), r.end());
    double s = 0.0;
    for (double v : r) s += std::exp(v - m);
    out[i] = m + std::log(s);
  }
  return record("logsumexp", {a}, std::move(out), [](const BackwardArgs& args) {
    const Tensor& x = *args.inputs[0];
    Tensor& g = *args.grads[0];
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const double lse = args.output[i];
      const double up = args.upstream[i];
      for (std::size_t j = 0; j < x.cols(); ++j) g(i, j) += up * std::exp(x(i, j) - lse);
    }
  });
}

Var Graph::pick(Var a, std::span<const std::size_t> columns) {
  const Tensor& ta = value(a);
  require_matrix(ta, "pick");
  if (columns.size() != ta.rows()) {
    throw DimensionError("pick: " + std::to_string(columns.size()) + " columns for " +
                         std::to_string(ta.rows()) + " rows");
  }
  Tensor out({ta.rows(), 1});
  for (std::size_t i = 0; i < ta.rows(); ++i) {
    if (columns[i] >= ta.cols()) {
      throw IndexError("pick: column " + std::to_string(columns[i]) + " >= " +
                       std::to_string(ta.cols()));
    }
    out[i] = ta(i, columns[i]);
  }
  std::vector<std::size_t> cols(columns.begin(), columns.end());
  return record("pick", {a}, std::move(out), [cols = std::move(cols)](const BackwardArgs& args) {
    Tensor& g = *args.grads[0];
    for (std::size_t i = 0; i < cols.size(); ++i) g(i, cols[i]) += args.upstream[i];
  });
}

Var Graph::custom(std::string op, std::vector<Var> inputs, Tensor value, BackwardFn backward) {
  return record(std::move(op), std::move(inputs), std::move(value), std::move(backward));
}

Gradients Graph::backward(Var loss) const {
  const Node& root = node(loss);
  if (root.value.size() != 1) {
    throw ContractError("backward: loss must be a scalar, got shape " +
                        shape_string(root.value.shape()));
  }

  std::vector<Tensor> grads(loss.index + 1);
  if (root.requires_grad) grads[loss.index] = Tensor(root.value.shape(), {1.0});

  std::vector<const Tensor*> in_values;
  std::vector<Tensor*> in_grads;
  for (std::size_t k = loss.index + 1; k-- > 0;) {
    const Node& n = nodes_[k];
    if (!n.requires_grad || n.is_parameter || grads[k].empty()) continue;
    in_values.clear();
    in_grads.clear();
    for (std::size_t in : n.inputs) {
      in_values.push_back(&nodes_[in].value);
      if (nodes_[in].requires_grad) {
        if (grads[in].empty()) grads[in] = Tensor(nodes_[in].value.shape());
        in_grads.push_back(&grads[in]);
      } else {
        in_grads.push_back(nullptr);
      }
    }
    n.backward(BackwardArgs{in_values, n.value, grads[k], in_grads});
    // Intermediate gradients are not needed once propagated.
    grads[k] = Tensor();
  }

  Gradients out;
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    if (!nodes_[k].is_parameter) continue;
    out.leaves_.push_back(k);
    if (k < grads.size() && !grads[k].empty()) {
      out.grads_.push_back(std::move(grads[k]));
    } else {
      out.grads_.emplace_back(nodes_[k].value.shape());
    }
  }
  return out;
}

double evaluate_scalar(const GraphFunction& f, const std::vector<Tensor>& params) {
  Graph g;
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const Tensor& p : params) vars.push_back(g.constant(p));
  const Var out = f(g, vars);
  const double v = g.value(out).item();
  if (!std::isfinite(v)) throw NumericError("finite_diff_check: non-finite function value");
  return v;
}

GradCheckResult finite_diff_check(const GraphFunction& f, const std::vector<Tensor>& params,
                                  double step) {
  for (const Tensor& p : params) {
    if (!p.all_finite()) throw NumericError("finite_diff_check: non-finite parameter");
  }
  Graph g;
  std::vector<Var> vars;
  for (const Tensor& p : params) vars.push_back(g.parameter(p));
  const Var out = f(g, vars);
  const Gradients analytic = g.backward(out);

  GradCheckResult result;
  std::vector<Tensor> probe = params;
  for (std::size_t p = 0; p < probe.size(); ++p) {
    const Tensor& ga = analytic[vars[p]];
    for (std::size_t i = 0; i < probe[p].size(); ++i) {
      const double original = probe[p][i];
      probe[p][i] = original + step;
      const double plus = evaluate_scalar(f, probe);
      probe[p][i] = original - step;
      const double minus = evaluate_scalar(f, probe);
      probe[p][i] = original;
      const double numeric = (plus - minus) / (2.0 * step);
      const double rel = std::abs(ga[i] - numeric) / (std::abs(numeric) + 1e-8);
      if (rel > result.max_relative_error) result = {rel, p, i, ga[i], numeric};
    }
  }
  return result;
}

double finite_diff_check(const std::function<Var(Graph&, Var)>& f, const Tensor& theta,
                         double step) {
  const GraphFunction wrapped = [&f](Graph& g, std::span<const Var> vars) {
    return f(g, vars[0]);
  };
  return finite_diff_check(wrapped, {theta}, step).max_relative_error;
}

}  // namespace harmonic
