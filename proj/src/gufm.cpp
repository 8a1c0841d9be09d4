#include "ncgl/gufm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ncgl/ncmetrics.hpp"
#include "ncgl/rng.hpp"

namespace ncgl {

namespace {

struct Shapes {
  std::size_t classes;
  std::size_t dim;
  std::size_t nodes;
};

Shapes check_shapes(const GufmState& s, std::span<const GraphOperator> graphs) {
  if (graphs.empty()) throw DimensionError("gufm: at least one graph is required");
  if (s.h.size() != graphs.size()) {
    throw DimensionError("gufm: " + std::to_string(s.h.size()) + " feature matrices for " +
                         std::to_string(graphs.size()) + " graphs");
  }
  const Shapes out{s.w2.rows(), s.w2.cols(), graphs.front().num_nodes()};
  if (out.classes == 0 || out.nodes % out.classes != 0) throw DimensionError("gufm: N must be a multiple of C");
  if (s.w1 && (s.w1->rows() != out.classes || s.w1->cols() != out.dim)) {
    throw DimensionError("gufm: W1 is " + shape_of(*s.w1) + ", W2 is " + shape_of(s.w2));
  }
  for (std::size_t k = 0; k < graphs.size(); ++k) {
    if (graphs[k].num_nodes() != out.nodes) throw DimensionError("gufm: graphs differ in node count");
    if (s.h[k].rows() != out.dim || s.h[k].cols() != out.nodes) {
      throw DimensionError("gufm: H_" + std::to_string(k) + " is " + shape_of(s.h[k]) + ", expected " +
                           std::to_string(out.dim) + "x" + std::to_string(out.nodes));
    }
  }
  return out;
}

// W1 H + W2 H A - Y for one graph, alongside H A.
struct Residual {
  Matrix aggregated;
  Matrix residual;
};

Residual residual(const GufmState& s, const Matrix& h, const GraphOperator& op, const Matrix& targets) {
  Residual out{op.apply(h), Matrix()};
  out.residual = multiply(s.w2, out.aggregated);
  if (s.w1) out.residual += multiply(*s.w1, h);
  out.residual -= targets;
  return out;
}

double squared_norm(const Matrix& m) { return frobenius_dot(m, m); }

double regularizer_terms(const GufmState& s, const Regularization& reg) {
  double out = 0.5 * reg.w2 * squared_norm(s.w2);
  if (s.w1) out += 0.5 * reg.w1 * squared_norm(*s.w1);
  return out;
}

Matrix gaussian(std::size_t rows, std::size_t cols, double scale, Rng rng) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = scale * rng.normal();
  return m;
}

}  // namespace

Matrix one_hot_targets(std::size_t num_classes, std::size_t class_size) {
  Matrix y(num_classes, num_classes * class_size);
  for (std::size_t c = 0; c < num_classes; ++c)
    for (std::size_t i = 0; i < class_size; ++i) y(c, c * class_size + i) = 1.0;
  return y;
}

double gufm_risk(const GufmState& state, std::span<const GraphOperator> graphs, const Regularization& reg) {
  const Shapes sh = check_shapes(state, graphs);
  const Matrix y = one_hot_targets(sh.classes, sh.nodes / sh.classes);
  double sum = 0.0;
  for (std::size_t k = 0; k < graphs.size(); ++k) {
    const Residual r = residual(state, state.h[k], graphs[k], y);
    sum += squared_norm(r.residual) / (2.0 * static_cast<double>(sh.nodes)) + 0.5 * reg.h * squared_norm(state.h[k]);
  }
  return sum / static_cast<double>(graphs.size()) + regularizer_terms(state, reg);
}

GufmGradients gufm_gradients(const GufmState& state, std::span<const GraphOperator> graphs,
                             const Regularization& reg) {
  const Shapes sh = check_shapes(state, graphs);
  const Matrix y = one_hot_targets(sh.classes, sh.nodes / sh.classes);
  const double k_count = static_cast<double>(graphs.size());
  const double fit_scale = 1.0 / (k_count * static_cast<double>(sh.nodes));

  GufmGradients g{state.w2 * reg.w2, std::nullopt, {}};
  if (state.w1) g.w1 = *state.w1 * reg.w1;
  g.h.reserve(graphs.size());
  for (std::size_t k = 0; k < graphs.size(); ++k) {
    const Residual r = residual(state, state.h[k], graphs[k], y);
    g.w2.add_scaled(fit_scale, multiply_nt(r.residual, r.aggregated));
    // W2^T R A^T
    Matrix dh = graphs[k].apply_transpose(multiply_tn(state.w2, r.residual));
    if (state.w1) {
      g.w1->add_scaled(fit_scale, multiply_nt(r.residual, state.h[k]));
      dh += multiply_tn(*state.w1, r.residual);
    }
    dh *= fit_scale;
    dh.add_scaled(reg.h / k_count, state.h[k]);
    g.h.push_back(std::move(dh));
  }
  return g;
}

Matrix closed_form_w2(std::span<const Matrix> h, std::span<const GraphOperator> graphs, double lambda_w2,
                      std::size_t num_classes) {
  if (h.empty() || h.size() != graphs.size()) throw DimensionError("closed_form_w2: need one H per graph");
  if (lambda_w2 < 0.0) throw DimensionError("closed_form_w2: lambda_W2 must be nonnegative");
  const std::size_t dim = h.front().rows();
  const std::size_t nodes = graphs.front().num_nodes();
  if (num_classes == 0 || nodes % num_classes != 0) throw DimensionError("closed_form_w2: N must be a multiple of C");
  const Matrix y = one_hot_targets(num_classes, nodes / num_classes);
  Matrix cross(num_classes, dim);
  Matrix gram(dim, dim);
  for (std::size_t k = 0; k < h.size(); ++k) {
    if (h[k].rows() != dim || h[k].cols() != nodes || graphs[k].num_nodes() != nodes) {
      throw DimensionError("closed_form_w2: H_" + std::to_string(k) + " is " + shape_of(h[k]));
    }
    const Matrix aggregated = graphs[k].apply(h[k]);
    cross += multiply_nt(y, aggregated);
    gram += multiply_nt(aggregated, aggregated);
  }
  const double shift = lambda_w2 * static_cast<double>(h.size()) * static_cast<double>(nodes);
  for (std::size_t i = 0; i < dim; ++i) gram(i, i) += shift;
  if (max_abs(cross) == 0.0) return Matrix(num_classes, dim);
  try {
    return solve_spd_right(cross, symmetrized(gram));
  } catch (const NumericalError&) {
    throw NumericalError("closed_form_w2: singular system (lambda_W2 = " + std::to_string(lambda_w2) + ")");
  }
}

Matrix closed_form_w2(const Matrix& h, const GraphOperator& graph, double lambda_w2, std::size_t num_classes) {
  return closed_form_w2(std::span<const Matrix>(&h, 1), std::span<const GraphOperator>(&graph, 1), lambda_w2,
                        num_classes);
}

Matrix collapse_to_class_means(const Matrix& h, std::span<const int> labels, std::size_t num_classes) {
  const ClassMeans cm = class_means(FeatureView{h, labels, num_classes});
  Matrix out(h.rows(), h.cols());
  for (std::size_t i = 0; i < h.cols(); ++i) {
    auto src = cm.means.col(static_cast<std::size_t>(labels[i]));
    std::copy(src.begin(), src.end(), out.col(i).begin());
  }
  return out;
}

std::vector<int> predict_classes(const Matrix& scores) {
  std::vector<int> out(scores.cols(), 0);
  for (std::size_t j = 0; j < scores.cols(); ++j) {
    auto column = scores.col(j);
    out[j] = static_cast<int>(std::max_element(column.begin(), column.end()) - column.begin());
  }
  return out;
}

GufmState init_gufm_state(std::size_t num_classes, std::size_t num_nodes, std::size_t num_graphs,
                          const GufmTrainConfig& cfg) {
  if (cfg.dim < num_classes) throw DimensionError("gufm: feature dimension must be at least C");
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.dim));
  GufmState s{gaussian(num_classes, cfg.dim, scale, Rng::stream(cfg.seed, "init-w2")), std::nullopt, {}};
  if (cfg.family == Family::F) s.w1 = gaussian(num_classes, cfg.dim, scale, Rng::stream(cfg.seed, "init-w1"));
  for (std::size_t k = 0; k < num_graphs; ++k) {
    s.h.push_back(gaussian(cfg.dim, num_nodes, scale, Rng::stream(cfg.seed, "init-h", k)));
  }
  return s;
}

namespace {

StepRecord snapshot(std::size_t step, const GufmState& s, std::span<const Graph> graphs,
                    std::span<const GraphOperator> ops, const Regularization& reg) {
  StepRecord rec{step, {}};
  const std::size_t nodes = graphs.front().num_nodes();
  const std::size_t classes = graphs.front().num_classes();
  const Matrix y = one_hot_targets(classes, nodes / classes);
  const double shared = regularizer_terms(s, reg);
  for (std::size_t k = 0; k < graphs.size(); ++k) {
    const Residual r = residual(s, s.h[k], ops[k], y);
    const double loss =
        squared_norm(r.residual) / (2.0 * static_cast<double>(nodes)) + 0.5 * reg.h * squared_norm(s.h[k]) + shared;
    const Matrix scores = r.residual + y;
    const auto predicted = predict_classes(scores);
    const auto& labels = graphs[k].labels();
    ReportInputs in{s.h[k], labels, classes, &ops[k], s.w1 ? &*s.w1 : nullptr, &s.w2};
    rec.graphs.push_back({loss, overlap(predicted, labels, classes), nc_report(in)});
  }
  return rec;
}

bool should_record(std::size_t epoch, std::size_t total, std::size_t every) {
  if (epoch == 0 || epoch == total) return true;
  return every != 0 && epoch % every == 0;
}

}  // namespace

GufmRun train_gufm(std::span<const Graph> graphs, const GufmTrainConfig& cfg) {
  if (graphs.empty()) throw DimensionError("train_gufm: no graphs");
  return train_gufm(graphs, init_gufm_state(graphs.front().num_classes(), graphs.front().num_nodes(), graphs.size(), cfg),
                    cfg);
}

GufmRun train_gufm(std::span<const Graph> graphs, GufmState init, const GufmTrainConfig& cfg) {
  if (graphs.empty()) throw DimensionError("train_gufm: no graphs");
  if (!(cfg.lr >= 0.0)) throw DimensionError("train_gufm: learning rate must be nonnegative");
  for (const auto& g : graphs) {
    if (g.num_nodes() != graphs.front().num_nodes() || g.num_classes() != graphs.front().num_classes()) {
      throw DimensionError("train_gufm: graphs must share N and C");
    }
  }
  if ((cfg.family == Family::F) != init.w1.has_value()) throw DimensionError("train_gufm: state does not match family");
  std::vector<GraphOperator> ops;
  ops.reserve(graphs.size());
  for (const auto& g : graphs) ops.emplace_back(g);

  GufmRun run{std::move(init), {}, {}};
  GufmState& s = run.state;
  for (std::size_t epoch = 0;; ++epoch) {
    const double risk = gufm_risk(s, ops, cfg.reg);
    if (!std::isfinite(risk)) {
      throw DivergenceError("train_gufm: risk became non-finite at epoch " + std::to_string(epoch));
    }
    if (!run.risks.empty() && risk > run.risks.back() + cfg.increase_tolerance * std::max(1.0, run.risks.back())) {
      throw DivergenceError("train_gufm: risk increased from " + std::to_string(run.risks.back()) + " to " +
                            std::to_string(risk) + " at epoch " + std::to_string(epoch));
    }
    run.risks.push_back(risk);
    if (should_record(epoch, cfg.epochs, cfg.record_every)) run.trajectory.push_back(snapshot(epoch, s, graphs, ops, cfg.reg));
    if (epoch == cfg.epochs) break;

    const GufmGradients g = gufm_gradients(s, ops, cfg.reg);
    s.w2.add_scaled(-cfg.lr, g.w2);
    if (s.w1) s.w1->add_scaled(-cfg.lr, *g.w1);
    for (std::size_t k = 0; k < s.h.size(); ++k) s.h[k].add_scaled(-cfg.lr, g.h[k]);
  }
  return run;
}

void FlowConfig::validate() const {
  if (!(step > 0.0)) throw DimensionError("flow: step must be positive");
  if (!(epsilon >= 0.0)) throw DimensionError("flow: epsilon must be nonnegative");
  if (!(lambda_w2 > 0.0)) throw DimensionError("flow: lambda_W2 must be positive");
  if (!(lambda_h >= 0.0)) throw DimensionError("flow: lambda_H must be nonnegative");
  if (dim < 2) throw DimensionError("flow: dimension must be at least 2");
}

double flow_hypothesis_margin(const Matrix& h, std::span<const int> labels, const SsbmParams& params,
                              double lambda_h, double lambda_w2) {
  if (params.num_classes != 2) throw DimensionError("flow hypothesis: two classes only");
  const double p = params.p, q = params.q;
  const double n = static_cast<double>(params.class_size());
  const double total = static_cast<double>(params.num_nodes);
  const std::size_t d = h.rows();

  const ClassMeans cm = class_means(FeatureView{h, labels, 2});
  const Covariances cov = covariances(FeatureView{h, labels, 2});
  Matrix second_moment = outer(cm.means.col(0), cm.means.col(0));
  second_moment += outer(cm.means.col(1), cm.means.col(1));
  second_moment *= 0.5;
  Matrix j = second_moment;
  j.add_scaled(-4.0 * p * q / ((p + q) * (p + q)), cov.between);
  j *= 2.0 * n;
  j = symmetrized(j);

  const SymEig eig = sym_eig(j);
  std::vector<double> inv(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double shifted = eig.values[i] + lambda_w2 * total;
    if (shifted <= 0.0) throw NumericalError("flow hypothesis: J + lambda N I is not positive definite");
    inv[i] = 1.0 / shifted;
  }
  const Matrix m = multiply_nt(multiply(eig.vectors, Matrix::diagonal(inv)), eig.vectors);
  Matrix m_tilde = m - multiply(multiply(m, j), m);
  const double smallest = sym_eig(symmetrized(m_tilde)).values.back();
  const double signal = (p - q) / (p + q);
  return signal * signal * smallest - 2.0 * lambda_h;
}

FlowResult central_path_flow(const SsbmParams& params, std::uint64_t seed, const FlowConfig& cfg) {
  cfg.validate();
  params.validate();
  if (params.num_classes != 2) throw DimensionError("central_path_flow: two classes only");

  const SsbmSample sample = sample_ssbm(params, Rng::derive(seed, "flow-graph"), false);
  const Matrix expected = expected_normalized_adjacency(params);
  Matrix mixed = expected;
  mixed.add_scaled(cfg.epsilon, normalized_adjacency(sample.graph) - expected);
  const GraphOperator op(mixed);
  const std::span<const GraphOperator> ops(&op, 1);
  const std::span<const Graph> graphs(&sample.graph, 1);
  const auto& labels = sample.graph.labels();
  const Regularization reg{cfg.lambda_h, cfg.lambda_w2, 0.0};

  GufmState s{Matrix(), std::nullopt, {gaussian(cfg.dim, params.num_nodes, 1.0 / std::sqrt(static_cast<double>(cfg.dim)),
                                                Rng::stream(seed, "flow-init"))}};
  FlowResult out;
  out.resamples = sample.resamples;
  out.hypothesis_held = true;
  for (std::size_t step = 0;; ++step) {
    s.w2 = closed_form_w2(s.h.front(), op, cfg.lambda_w2, 2);
    const double risk = gufm_risk(s, ops, reg);
    if (!std::isfinite(risk) || !all_finite(s.h.front())) {
      throw DivergenceError("central_path_flow: non-finite state at step " + std::to_string(step));
    }
    const Covariances cov = covariances(FeatureView{s.h.front(), labels, 2});
    const double margin = flow_hypothesis_margin(s.h.front(), labels, params, cfg.lambda_h, cfg.lambda_w2);
    out.points.push_back({step, trace(cov.within), trace(cov.between), risk, margin});
    if (step == 0) {
      out.initial_margin = margin;
      out.min_margin = margin;
    }
    out.min_margin = std::min(out.min_margin, margin);
    if (margin <= 0.0) out.hypothesis_held = false;
    if (should_record(step, cfg.steps, cfg.record_every)) out.trajectory.push_back(snapshot(step, s, graphs, ops, reg));
    if (step == cfg.steps) break;
    const GufmGradients g = gufm_gradients(s, ops, reg);
    s.h.front().add_scaled(-cfg.step, g.h.front());
  }

  std::size_t within_ok = 0, between_ok = 0;
  for (std::size_t i = 1; i < out.points.size(); ++i) {
    const auto& a = out.points[i - 1];
    const auto& b = out.points[i];
    if (b.tr_within - a.tr_within <= cfg.monotone_tolerance * std::abs(a.tr_within)) ++within_ok;
    if (b.tr_between - a.tr_between >= -cfg.monotone_tolerance * std::abs(a.tr_between)) ++between_ok;
  }
  const double transitions = static_cast<double>(std::max<std::size_t>(1, out.points.size() - 1));
  out.within_nonincreasing_fraction = static_cast<double>(within_ok) / transitions;
  out.between_nondecreasing_fraction = static_cast<double>(between_ok) / transitions;
  return out;
}

}  // namespace ncgl
