#include "ncgl/gnn.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <system_error>

#include "json.hpp"
#include "ncgl/ncmetrics.hpp"
#include "ncgl/parallel.hpp"
#include "ncgl/rng.hpp"

namespace ncgl {

namespace {

Matrix uniform_matrix(std::size_t rows, std::size_t cols, Rng rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(-bound, bound);
  return m;
}

Matrix layer_map(const GnnLayer& layer, const Matrix& input, const Matrix& aggregated) {
  Matrix out = multiply(layer.w2, aggregated);
  if (layer.w1) out += multiply(*layer.w1, input);
  return out;
}

Matrix relu(Matrix x) {
  for (double& v : x.values()) v = v > 0.0 ? v : 0.0;
  return x;
}

// dx = inv_std (dy - mean(dy) - y mean(dy y)), row by row.
Matrix instance_norm_backward(const Matrix& dy, const Matrix& y, std::span<const double> inv_std) {
  const std::size_t rows = dy.rows(), cols = dy.cols();
  Matrix dx(rows, cols);
  const double inv_n = 1.0 / static_cast<double>(cols);
  for (std::size_t r = 0; r < rows; ++r) {
    double mean_dy = 0.0, mean_dyy = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      mean_dy += dy(r, j);
      mean_dyy += dy(r, j) * y(r, j);
    }
    mean_dy *= inv_n;
    mean_dyy *= inv_n;
    for (std::size_t j = 0; j < cols; ++j) dx(r, j) = inv_std[r] * (dy(r, j) - mean_dy - y(r, j) * mean_dyy);
  }
  return dx;
}

}  // namespace

void GnnParams::validate() const {
  if (layers.empty()) throw DimensionError("gnn: at least one layer is required");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    if ((family == Family::F) != layer.w1.has_value()) {
      throw DimensionError("gnn: layer " + std::to_string(l + 1) + " does not match the family");
    }
    if (layer.w1 && (layer.w1->rows() != layer.w2.rows() || layer.w1->cols() != layer.w2.cols())) {
      throw DimensionError("gnn: layer " + std::to_string(l + 1) + " has W1 " + shape_of(*layer.w1) + " and W2 " +
                           shape_of(layer.w2));
    }
    if (l > 0 && layer.w2.cols() != layers[l - 1].w2.rows()) {
      throw DimensionError("gnn: layer " + std::to_string(l + 1) + " input dimension does not chain");
    }
  }
}

GnnParams init_gnn(const GnnShape& shape, std::uint64_t seed) {
  if (shape.layers == 0 || shape.input_dim == 0 || shape.hidden == 0 || shape.classes < 2) {
    throw DimensionError("gnn: invalid shape");
  }
  GnnParams params{shape.family, {}};
  for (std::size_t l = 0; l < shape.layers; ++l) {
    const std::size_t out = shape.out_dim(l), in = shape.in_dim(l);
    GnnLayer layer{std::nullopt, uniform_matrix(out, in, Rng::stream(seed, "init-w2", l))};
    if (shape.family == Family::F) layer.w1 = uniform_matrix(out, in, Rng::stream(seed, "init-w1", l));
    params.layers.push_back(std::move(layer));
  }
  return params;
}

Matrix instance_norm(const Matrix& x, double eps) {
  Matrix out(x.rows(), x.cols());
  const double inv_n = 1.0 / static_cast<double>(x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double mean = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) mean += x(r, j);
    mean *= inv_n;
    double var = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) var += (x(r, j) - mean) * (x(r, j) - mean);
    var *= inv_n;
    const double denom = std::sqrt(var + eps);
    for (std::size_t j = 0; j < x.cols(); ++j) out(r, j) = denom > 0.0 ? (x(r, j) - mean) / denom : 0.0;
  }
  return out;
}

ForwardPass forward(const GnnParams& params, const GraphOperator& op, const Matrix& x0, double eps) {
  params.validate();
  if (x0.rows() != params.input_dim() || x0.cols() != op.num_nodes()) {
    throw DimensionError("gnn forward: features are " + shape_of(x0) + ", expected " +
                         std::to_string(params.input_dim()) + "x" + std::to_string(op.num_nodes()));
  }
  ForwardPass pass;
  pass.layers.reserve(params.layers.size());
  Matrix current = x0;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    LayerCache cache;
    cache.aggregated = op.apply(current);
    cache.pre = layer_map(params.layers[l], current, cache.aggregated);
    cache.input = std::move(current);
    if (l + 1 < params.layers.size()) {
      cache.relu = relu(cache.pre);
      cache.norm = instance_norm(cache.relu, eps);
      cache.inv_std.resize(cache.relu.rows());
      const double inv_n = 1.0 / static_cast<double>(cache.relu.cols());
      for (std::size_t r = 0; r < cache.relu.rows(); ++r) {
        double mean = 0.0, var = 0.0;
        for (std::size_t j = 0; j < cache.relu.cols(); ++j) mean += cache.relu(r, j);
        mean *= inv_n;
        for (std::size_t j = 0; j < cache.relu.cols(); ++j) var += (cache.relu(r, j) - mean) * (cache.relu(r, j) - mean);
        const double denom = std::sqrt(var * inv_n + eps);
        cache.inv_std[r] = denom > 0.0 ? 1.0 / denom : 0.0;
      }
      current = cache.norm;
    }
    pass.layers.push_back(std::move(cache));
  }
  return pass;
}

PermLoss perm_mse_loss(const Matrix& out, std::span<const int> labels, std::size_t num_classes) {
  if (num_classes < 1 || num_classes > 8) throw DimensionError("perm_mse_loss: C must be in [1, 8]");
  if (out.rows() != num_classes || out.cols() != labels.size()) {
    throw DimensionError("perm_mse_loss: output is " + shape_of(out) + " for " + std::to_string(labels.size()) +
                         " labels");
  }
  const std::size_t nodes = labels.size();
  // cost[r][c]: squared error of row r against the indicator of class c.
  std::vector<double> cost(num_classes * num_classes, 0.0);
  for (std::size_t r = 0; r < num_classes; ++r) {
    for (std::size_t c = 0; c < num_classes; ++c) {
      double sum = 0.0;
      for (std::size_t j = 0; j < nodes; ++j) {
        const double t = static_cast<std::size_t>(labels[j]) == c ? 1.0 : 0.0;
        sum += (out(r, j) - t) * (out(r, j) - t);
      }
      cost[r * num_classes + c] = sum;
    }
  }
  std::vector<std::size_t> perm(num_classes);
  std::iota(perm.begin(), perm.end(), 0);
  PermLoss best;
  double best_sum = 0.0;
  bool first = true;
  do {
    double sum = 0.0;
    for (std::size_t r = 0; r < num_classes; ++r) sum += cost[r * num_classes + perm[r]];
    if (first || sum < best_sum) {
      best_sum = sum;
      best.perm = perm;
      first = false;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  best.loss = best_sum / (2.0 * static_cast<double>(nodes));
  best.target = Matrix(num_classes, nodes);
  for (std::size_t j = 0; j < nodes; ++j)
    for (std::size_t r = 0; r < num_classes; ++r)
      if (best.perm[r] == static_cast<std::size_t>(labels[j])) best.target(r, j) = 1.0;
  return best;
}

std::vector<GnnLayer> backward(const GnnParams& params, const GraphOperator& op, const ForwardPass& pass,
                               const Matrix& target) {
  if (pass.layers.size() != params.layers.size()) throw DimensionError("gnn backward: forward cache does not match");
  const Matrix& out = pass.output();
  if (target.rows() != out.rows() || target.cols() != out.cols()) {
    throw DimensionError("gnn backward: target is " + shape_of(target) + ", output " + shape_of(out));
  }
  std::vector<GnnLayer> grads(params.layers.size());
  Matrix d_pre = (out - target) * (1.0 / static_cast<double>(out.cols()));
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const auto& layer = params.layers[l];
    const auto& cache = pass.layers[l];
    grads[l].w2 = multiply_nt(d_pre, cache.aggregated);
    if (layer.w1) grads[l].w1 = multiply_nt(d_pre, cache.input);
    if (l == 0) break;
    Matrix d_input = op.apply_transpose(multiply_tn(layer.w2, d_pre));
    if (layer.w1) d_input += multiply_tn(*layer.w1, d_pre);
    const auto& below = pass.layers[l - 1];
    d_pre = instance_norm_backward(d_input, below.norm, below.inv_std);
    for (std::size_t i = 0; i < d_pre.size(); ++i) {
      if (!(below.pre.values()[i] > 0.0)) d_pre.values()[i] = 0.0;
    }
  }
  return grads;
}

void SgdMomentum::step(GnnParams& params, const std::vector<GnnLayer>& grads) {
  if (grads.size() != params.layers.size()) throw DimensionError("sgd: gradient count does not match layers");
  if (velocity_.empty()) {
    for (const auto& layer : params.layers) {
      GnnLayer v{std::nullopt, Matrix(layer.w2.rows(), layer.w2.cols())};
      if (layer.w1) v.w1 = Matrix(layer.w1->rows(), layer.w1->cols());
      velocity_.push_back(std::move(v));
    }
  }
  auto update = [this](Matrix& w, Matrix& v, const Matrix& g) {
    v *= cfg_.momentum;
    v += g;
    v.add_scaled(cfg_.weight_decay, w);
    w.add_scaled(-cfg_.lr, v);
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    update(params.layers[l].w2, velocity_[l].w2, grads[l].w2);
    if (params.layers[l].w1) update(*params.layers[l].w1, *velocity_[l].w1, *grads[l].w1);
  }
}

std::vector<GnnSample> make_dataset(const SsbmParams& params, std::size_t count, ConditionMode mode,
                                    std::size_t input_dim, std::uint64_t seed, const std::string& stream_name) {
  std::vector<Graph> graphs = sample_graphs(params, count, mode, seed, stream_name);
  std::vector<GnnSample> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    Rng rng = Rng::stream(seed, stream_name + "-features", k);
    Matrix x(input_dim, params.num_nodes);
    for (double& v : x.values()) v = rng.normal();
    out.push_back({std::move(graphs[k]), std::move(x)});
  }
  return out;
}

GraphEvaluation evaluate_graph(const GnnParams& params, const GnnSample& sample, double eps) {
  const GraphOperator op(sample.graph);
  const ForwardPass pass = forward(params, op, sample.features, eps);
  const auto& labels = sample.graph.labels();
  const std::size_t classes = sample.graph.num_classes();
  GraphEvaluation out;
  out.loss = perm_mse_loss(pass.output(), labels, classes).loss;
  out.overlap = overlap(predict_classes(pass.output()), labels, classes);
  const auto& head = params.layers.back();
  ReportInputs in{pass.penultimate(), labels, classes, &op, head.w1 ? &*head.w1 : nullptr, &head.w2};
  out.report = nc_report(in);
  return out;
}

namespace {

StepRecord evaluate_all(std::size_t step, const GnnParams& params, std::span<const GnnSample> data, double eps) {
  std::vector<GraphEvaluation> evals(data.size());
  parallel_for(data.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) evals[k] = evaluate_graph(params, data[k], eps);
  });
  StepRecord rec{step, {}};
  for (auto& e : evals) rec.graphs.push_back({e.loss, e.overlap, std::move(e.report)});
  return rec;
}

}  // namespace

GnnRun train_gnn(std::span<const GnnSample> data, const GnnTrainConfig& cfg) {
  if (data.empty()) throw DimensionError("train_gnn: empty dataset");
  if (!(cfg.sgd.lr >= 0.0) || !(cfg.sgd.momentum >= 0.0 && cfg.sgd.momentum < 1.0)) {
    throw DimensionError("train_gnn: lr must be nonnegative and momentum in [0, 1)");
  }
  GnnShape shape = cfg.shape;
  shape.classes = data.front().graph.num_classes();
  shape.input_dim = data.front().features.rows();
  GnnRun run{init_gnn(shape, cfg.seed), {}};
  SgdMomentum sgd(cfg.sgd);
  std::vector<GraphOperator> ops;
  ops.reserve(data.size());
  for (const auto& s : data) ops.emplace_back(s.graph);

  run.trajectory.push_back(evaluate_all(0, run.params, data, cfg.norm_eps));
  std::vector<std::size_t> order(data.size());
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng = Rng::stream(cfg.seed, "order", epoch);
    rng.shuffle(order.begin(), order.end());
    for (std::size_t k : order) {
      const auto& sample = data[k];
      const ForwardPass pass = forward(run.params, ops[k], sample.features, cfg.norm_eps);
      const PermLoss loss = perm_mse_loss(pass.output(), sample.graph.labels(), shape.classes);
      if (!std::isfinite(loss.loss)) {
        throw DivergenceError("train_gnn: non-finite loss in epoch " + std::to_string(epoch) + " on graph " +
                              std::to_string(k) + "; last good epoch " + std::to_string(epoch - 1));
      }
      sgd.step(run.params, backward(run.params, ops[k], pass, loss.target));
    }
    if (epoch == cfg.epochs || (cfg.record_every != 0 && epoch % cfg.record_every == 0)) {
      run.trajectory.push_back(evaluate_all(epoch, run.params, data, cfg.norm_eps));
    }
  }
  return run;
}

std::vector<LayerRow> infer_layerwise(const GnnParams& params, std::span<const GnnSample> data, double eps) {
  std::vector<std::vector<LayerRow>> per_graph(data.size());
  parallel_for(data.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const auto& sample = data[k];
      const GraphOperator op(sample.graph);
      const ForwardPass pass = forward(params, op, sample.features, eps);
      const auto& labels = sample.graph.labels();
      const std::size_t classes = sample.graph.num_classes();
      for (std::size_t l = 0; l < pass.layers.size(); ++l) {
        const auto& cache = pass.layers[l];
        const Nc1Result base = nc1_metrics(FeatureView{cache.input, labels, classes});
        auto emit = [&](const Matrix& m, const char* stage) {
          const Nc1Result r = nc1_metrics(FeatureView{m, labels, classes});
          LayerRow row{l + 1, stage, std::to_string(k), r.nc1, r.nc1_tilde, r.tr_within, r.tr_between,
                       std::nullopt, std::nullopt};
          if (base.tr_between > 0.0) row.ratio_tr_b = r.tr_between / base.tr_between;
          if (base.tr_within > 0.0) row.ratio_tr_w = r.tr_within / base.tr_within;
          per_graph[k].push_back(std::move(row));
        };
        emit(cache.pre, "op");
        if (!cache.norm.empty()) {
          emit(cache.relu, "relu");
          emit(cache.norm, "norm");
        }
      }
    }
  });
  std::vector<LayerRow> rows;
  for (auto& g : per_graph) rows.insert(rows.end(), g.begin(), g.end());
  return rows;
}

std::vector<BoundRow> layerwise_bounds(const GnnParams& params, std::span<const GnnSample> data,
                                       const SsbmParams& ssbm, double eps) {
  if (ssbm.num_classes != 2) throw DimensionError("layerwise_bounds: two classes only");
  if (data.empty()) throw DimensionError("layerwise_bounds: no graphs");
  std::vector<std::vector<SandwichReport>> reports(data.size());
  parallel_for(data.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const GraphOperator op(data[k].graph);
      const ForwardPass pass = forward(params, op, data[k].features, eps);
      for (std::size_t l = 0; l < pass.layers.size(); ++l) {
        const auto& layer = params.layers[l];
        const TraceBoundSpec spec{layer.w1.value_or(Matrix()), layer.w2, ssbm.p, ssbm.q, ssbm.class_size()};
        reports[k].push_back(verify_sandwich(empirical_moments(pass.layers[l].input, data[k].graph.labels()), spec));
      }
    }
  });
  std::vector<BoundRow> rows;
  const double inv = 1.0 / static_cast<double>(data.size());
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    BoundRow row{l + 1, {}};
    for (const auto& per_graph : reports) {
      const SandwichReport& r = per_graph[l];
      row.report.between_ratio += inv * r.between_ratio;
      row.report.between.lower += inv * r.between.lower;
      row.report.between.upper += inv * r.between.upper;
      row.report.within_ratio += inv * r.within_ratio;
      row.report.within.lower += inv * r.within.lower;
      row.report.within.upper += inv * r.within.upper;
    }
    rows.push_back(row);
  }
  return rows;
}

namespace {

using nlohmann::json;

std::string hex_double(double v) {
  char buffer[64];
  const auto res = std::to_chars(buffer, buffer + sizeof(buffer), v, std::chars_format::hex);
  return std::string(buffer, res.ptr);
}

double parse_hex_double(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  const auto res = std::from_chars(first, last, v, std::chars_format::hex);
  if (res.ec != std::errc() || res.ptr != last) throw std::invalid_argument("checkpoint: bad number '" + s + "'");
  return v;
}

json matrix_json(const Matrix& m) {
  json data = json::array();
  for (double v : m.values()) data.push_back(hex_double(v));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Matrix matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<std::size_t>();
  const auto cols = j.at("cols").get<std::size_t>();
  const auto& data = j.at("data");
  if (data.size() != rows * cols) throw std::invalid_argument("checkpoint: matrix data length mismatch");
  std::vector<double> values;
  values.reserve(data.size());
  for (const auto& v : data) values.push_back(parse_hex_double(v.get<std::string>()));
  return Matrix(rows, cols, std::move(values));
}

}  // namespace

std::string gnn_to_json(const GnnParams& params) {
  json layers = json::array();
  for (const auto& layer : params.layers) {
    layers.push_back({{"w1", layer.w1 ? matrix_json(*layer.w1) : json(nullptr)}, {"w2", matrix_json(layer.w2)}});
  }
  json root{{"family", params.family == Family::F ? "F" : "F_prime"}, {"layers", std::move(layers)}};
  return root.dump(1) + "\n";
}

GnnParams gnn_from_json(const std::string& text) {
  try {
    const json root = json::parse(text);
    const auto family = root.at("family").get<std::string>();
    if (family != "F" && family != "F_prime") throw std::invalid_argument("checkpoint: unknown family " + family);
    GnnParams params{family == "F" ? Family::F : Family::F_prime, {}};
    for (const auto& layer : root.at("layers")) {
      GnnLayer l{std::nullopt, matrix_from_json(layer.at("w2"))};
      if (!layer.at("w1").is_null()) l.w1 = matrix_from_json(layer.at("w1"));
      params.layers.push_back(std::move(l));
    }
    params.validate();
    return params;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace ncgl
