// Acceptance run: one PASS/FAIL line per criterion, nonzero exit when any fails.
#include <fmt/core.h>

#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ncgl/config.hpp"
#include "ncgl/gnn.hpp"
#include "ncgl/graphs.hpp"
#include "ncgl/gufm.hpp"
#include "ncgl/layerwise.hpp"
#include "ncgl/ncmetrics.hpp"
#include "ncgl/parallel.hpp"
#include "ncgl/spectral.hpp"
#include "oracles.hpp"

using namespace ncgl;

namespace {

// The shipped presets use seed 0; matching it lets the CLI reproduce every number below.
constexpr std::uint64_t kSeed = 0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::optional<double> mean_field(const StepRecord& record, std::optional<double> (*pick)(const GraphSnapshot&)) {
  double s = 0.0;
  std::size_t count = 0;
  for (const auto& g : record.graphs)
    if (auto v = pick(g)) {
      s += *v;
      ++count;
    }
  if (count == 0) return std::nullopt;
  return s / static_cast<double>(count);
}

std::optional<double> pick_nc1t(const GraphSnapshot& g) { return g.report.nc1t_h; }
std::optional<double> pick_overlap(const GraphSnapshot& g) { return g.overlap; }
std::optional<double> pick_loss(const GraphSnapshot& g) { return g.loss; }

std::string show(std::optional<double> v) { return v ? fmt::format("{:.6g}", *v) : std::string("n/a"); }

// 1. Exact probabilities of the four tiny self-loop settings against the printed values.
Outcome exhaustive_enumeration() {
  struct Case {
    double p, q, printed;
  };
  const Case cases[] = {{0.2, 0.05, 0.046}, {0.05, 0.2, 0.06}, {0.4, 0.1, 0.166}, {0.1, 0.4, 0.178}};
  const auto start = Clock::now();
  bool ok = true;
  std::string values;
  for (const auto& c : cases) {
    const EnumerationResult r = enumerate_condition_c(4, 2, c.p, c.q, true, std::nullopt, kSeed);
    ok = ok && r.exhaustive && std::abs(r.probability - c.printed) <= 0.005;
    values += fmt::format("{}{:.6f} vs {}", values.empty() ? "" : ", ", r.probability, c.printed);
  }
  const double elapsed = seconds_since(start);
  ok = ok && elapsed < 1.0;
  return {ok, fmt::format("exact {} (tolerance 0.005), {:.3f} s of 1 s", values, elapsed)};
}

// 2. Monte Carlo frequency on SSBM(8, 2, 0.5, 0.2).
Outcome monte_carlo_frequency() {
  set_thread_count(1);
  const auto start = Clock::now();
  const McResult r = mc_condition_c_probability({8, 2, 0.5, 0.2, {}, {}}, 1000000, kSeed, false);
  const double elapsed = seconds_since(start);
  set_thread_count(default_thread_count());
  const bool ok = std::abs(r.estimate - 8e-4) <= 2e-4 && elapsed < 60.0;
  return {ok, fmt::format("estimate {:.6f} +/- {:.6f} ({} of {} trials), target 0.0008 +/- 0.0002, {:.1f} s of 60 s",
                          r.estimate, r.std_error, r.hits, r.trials, elapsed)};
}

// 3. Bound for the worked example, N = 1000 with a = 3.75 and b = 0.25.
Outcome analytic_bound() {
  const auto start = Clock::now();
  const SsbmParams exact = SsbmParams::from_recovery(1000, 2, 3.75, 0.25);
  const double value = analytic_bound_log10(exact);
  const double rounded = analytic_bound_log10({1000, 2, 0.025, 0.0017, {}, {}});
  const double elapsed = seconds_since(start);
  const bool ok = std::abs(value + 1139.77) <= 1.0 && elapsed < 1.0;
  return {ok, fmt::format("log10 bound {:.4f} at p={:.6f} q={:.6f}, target -1139.77 +/- 1.0 "
                          "(rounded p=0.025 q=0.0017 gives {:.4f}), {:.3f} s",
                          value, exact.p, exact.q, rounded, elapsed)};
}

// 4. Matched gUFM runs on condition-C graphs and random graphs.
Outcome gufm_paired_runs() {
  const auto start = Clock::now();
  const ExperimentConfig cfg = preset("d1-scaled");
  const SsbmParams params = cfg.dataset.params();
  GufmTrainConfig tc = cfg.gufm_train();
  tc.epochs = 5000;
  tc.record_every = 0;
  const auto random_graphs = sample_graphs(params, 10, ConditionMode::random, kSeed, "gufm-graph");
  const auto cplus_graphs = sample_graphs(params, 10, ConditionMode::c_plus, kSeed, "gufm-graph");
  const GufmRun random_run = train_gufm(random_graphs, tc);
  const GufmRun cplus_run = train_gufm(cplus_graphs, tc);
  const auto random_nc1t = mean_field(random_run.trajectory.back(), pick_nc1t);
  const auto cplus_nc1t = mean_field(cplus_run.trajectory.back(), pick_nc1t);
  const double elapsed = seconds_since(start);
  if (!random_nc1t || !cplus_nc1t) return {false, "nc1_tilde undefined at the final epoch"};
  const double ratio = *cplus_nc1t / *random_nc1t;
  return {ratio <= 0.1 && elapsed < 300.0,
          fmt::format("final nc1_tilde(H) C+ {:.6g} vs random {:.6g}, ratio {:.4f} (need <= 0.1), risks {:.6g}/{:.6g}, "
                      "{:.1f} s of 300 s",
                      *cplus_nc1t, *random_nc1t, ratio, cplus_run.risks.back(), random_run.risks.back(), elapsed)};
}

struct TrainedNetwork {
  ExperimentConfig cfg;
  GnnRun run;
};

// 5. Training on the scaled preset reaches perfect overlap and reduces penultimate collapse.
Outcome gnn_training(std::optional<TrainedNetwork>& trained) {
  const auto start = Clock::now();
  TrainedNetwork net{preset("d1-scaled"), {}};
  net.cfg.seed = kSeed;
  const auto data = make_dataset(net.cfg.dataset.params(), net.cfg.dataset.num_graphs, net.cfg.dataset.condition_mode,
                                 net.cfg.model.input_dim, net.cfg.seed, "graph");
  GnnTrainConfig tc = net.cfg.gnn_train();
  tc.record_every = 1;
  net.run = train_gnn(data, tc);
  const double elapsed = seconds_since(start);
  double best_overlap = 0.0;
  std::size_t best_epoch = 0;
  for (const auto& record : net.run.trajectory) {
    const double o = mean_field(record, pick_overlap).value_or(0.0);
    if (o > best_overlap) {
      best_overlap = o;
      best_epoch = record.step;
    }
  }
  const auto initial = mean_field(net.run.trajectory.front(), pick_nc1t);
  const auto final = mean_field(net.run.trajectory.back(), pick_nc1t);
  const auto loss = mean_field(net.run.trajectory.back(), pick_loss);
  trained = std::move(net);
  const bool overlap_ok = best_overlap >= 1.0 - 1e-12;
  const bool collapse_ok = initial && final && *final < *initial;
  return {overlap_ok && collapse_ok && elapsed < 600.0,
          fmt::format("best mean train overlap {:.6f} at epoch {} (need 1.0), nc1_tilde {} -> {} (need decrease), "
                      "final loss {}, {:.1f} s of 600 s",
                      best_overlap, best_epoch, show(initial), show(final), show(loss), elapsed)};
}

// 6. Power-iteration trace ratios stay flat while the trained network keeps contracting.
Outcome spectral_contrast(const std::optional<TrainedNetwork>& trained) {
  if (!trained) return {false, "no trained network"};
  const auto start = Clock::now();
  const ExperimentConfig& cfg = trained->cfg;
  const auto test = make_dataset(cfg.dataset.params(), 20, cfg.dataset.condition_mode, cfg.model.input_dim, cfg.seed,
                                 "test-graph");
  const std::size_t layers = cfg.model.layers;

  std::map<std::string, std::map<std::size_t, double>> within_op;
  std::map<std::string, std::map<std::size_t, double>> nc1_norm;
  for (const auto& row : infer_layerwise(trained->run.params, test, cfg.optim.instance_norm_eps)) {
    if (row.stage == "op" && row.ratio_tr_w) within_op[row.graph_id][row.layer] = *row.ratio_tr_w;
    if (row.stage == "norm" && row.nc1) nc1_norm[row.graph_id][row.layer] = *row.nc1;
  }
  std::size_t decreasing = 0, collapsing = 0;
  for (auto& [id, by_layer] : within_op) {
    if (by_layer.count(layers - 1) && by_layer.count(2) && by_layer[layers - 1] < by_layer[2]) ++decreasing;
    auto& nc1 = nc1_norm[id];
    if (nc1.count(layers - 1) && nc1.count(1) && nc1[layers - 1] < nc1[1]) ++collapsing;
  }
  const bool gnn_ok = decreasing * 10 >= test.size() * 9;

  struct KindSummary {
    double spread = 0.0, within_spread = 0.0, worst = 0.0, overlap = 0.0;
  };
  auto summarize = [&](SpectralKind kind) {
    SpectralConfig sc = cfg.spectral_config();
    sc.kind = kind;
    sc.iterations = 32;
    std::vector<double> between(sc.iterations, 0.0), within(sc.iterations, 0.0);
    KindSummary s;
    for (std::size_t k = 0; k < test.size(); ++k) {
      const SpectralRun run = run_spectral(test[k].graph, sc, std::to_string(k));
      for (std::size_t l = 0; l < sc.iterations; ++l) {
        between[l] += run.between_ratios[l] / static_cast<double>(test.size());
        within[l] += run.within_ratios[l] / static_cast<double>(test.size());
      }
      s.worst = std::max(s.worst, relative_spread(run.between_ratios, 5).value_or(INFINITY));
      s.overlap += run.overlap / static_cast<double>(test.size());
    }
    s.spread = relative_spread(between, 5).value_or(INFINITY);
    s.within_spread = relative_spread(within, 5).value_or(INFINITY);
    return s;
  };
  const KindSummary nl = summarize(SpectralKind::nl), bh = summarize(SpectralKind::bh);
  const bool flat_ok = nl.spread < 0.05 && bh.spread < 0.05;
  const bool order_ok = bh.overlap > nl.overlap;
  const double elapsed = seconds_since(start);
  return {gnn_ok && flat_ok && order_ok,
          fmt::format("Tr Sigma_B ratio spread after 5 iterations NL {:.4f} BH {:.4f} (need < 0.05; Tr Sigma_W "
                      "{:.4f}/{:.4f}; worst single graph {:.3f}/{:.3f}); GNN Tr Sigma_W ratio lower at layer {} than "
                      "layer 2 in {}/{} graphs (need >= 90%; nc1 after norm lower at layer {} than layer 1 in {}/{}); "
                      "mean overlap BH {:.4f} vs NL {:.4f} (need BH > NL), {:.1f} s",
                      nl.spread, bh.spread, nl.within_spread, bh.within_spread, nl.worst, bh.worst, layers - 1,
                      decreasing, test.size(), layers - 1, collapsing, test.size(), bh.overlap, nl.overlap, elapsed)};
}

MomentPair random_moments(std::size_t d, Rng& rng) {
  return {oracle::random_vector(d, rng), oracle::random_vector(d, rng), oracle::random_spd(d, rng),
          oracle::random_spd(d, rng)};
}

TraceBoundSpec random_spec(std::size_t d, bool with_skip, Rng& rng) {
  TraceBoundSpec spec;
  spec.w2 = oracle::random_matrix(d, d, rng);
  if (with_skip) spec.w1 = oracle::random_matrix(d, d, rng);
  spec.p = rng.uniform(0.05, 0.9);
  spec.q = rng.uniform(0.0, spec.p);
  spec.class_size = 2 + rng.below(50);
  return spec;
}

// 7. Expected-layer trace ratios inside the Von Neumann bounds.
Outcome sandwich_bounds() {
  const auto start = Clock::now();
  Rng rng = Rng::stream(kSeed, "sandwich");
  std::size_t inside = 0;
  double worst_excess = -INFINITY;
  for (int t = 0; t < 100; ++t) {
    const std::size_t d = 1 + rng.below(8);
    const SandwichReport r = verify_sandwich(random_moments(d, rng), random_spec(d, t % 2 == 0, rng));
    if (r.holds(1e-10)) ++inside;
    worst_excess = std::max({worst_excess, r.between_ratio - r.between.upper, r.between.lower - r.between_ratio,
                             r.within_ratio - r.within.upper, r.within.lower - r.within_ratio});
  }
  const double elapsed = seconds_since(start);
  return {inside == 100 && elapsed < 5.0,
          fmt::format("{}/100 instances inside bounds (relative slack 1e-10), largest signed excess {:.3g}, {:.2f} s",
                      inside, worst_excess, elapsed)};
}

// 8. Central-path flow traces are monotone on nearly every step.
Outcome flow_monotonicity() {
  const auto start = Clock::now();
  const ExperimentConfig cfg = preset("d1");
  const SsbmParams params{cfg.flow.num_nodes, 2, cfg.flow.p, cfg.flow.q, {}, {}};
  bool ok = true;
  std::string parts;
  for (double eps : {0.0, 0.01}) {
    FlowConfig fc = cfg.flow.flow;
    fc.epsilon = eps;
    const FlowResult r = central_path_flow(params, Rng::derive(kSeed, "flow"), fc);
    ok = ok && r.hypothesis_held && r.within_nonincreasing_fraction >= 0.99 && r.between_nondecreasing_fraction >= 0.99;
    parts += fmt::format("{}eps={}: Tr Sigma_W non-increasing {:.4f}, Tr Sigma_B non-decreasing {:.4f}, min margin "
                         "{:.3g}",
                         parts.empty() ? "" : "; ", eps, r.within_nonincreasing_fraction,
                         r.between_nondecreasing_fraction, r.min_margin);
  }
  const double elapsed = seconds_since(start);
  return {ok && elapsed < 120.0, fmt::format("{} over {} steps (need >= 0.99 and margin > 0), {:.1f} s of 120 s", parts,
                                             cfg.flow.flow.steps, elapsed)};
}

double fd_error(Matrix& param, const Matrix& analytic, const std::function<double()>& risk, double h, double floor) {
  Matrix numeric(param.rows(), param.cols());
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double keep = param.values()[i];
    param.values()[i] = keep + h;
    const double up = risk();
    param.values()[i] = keep - h;
    const double down = risk();
    param.values()[i] = keep;
    numeric.values()[i] = (up - down) / (2.0 * h);
  }
  return frobenius_norm(numeric - analytic) / std::max(frobenius_norm(analytic), floor);
}

double gufm_fd_worst(Rng& rng) {
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t classes = 2 + rng.below(2);
    const std::size_t n = 2 + rng.below(5), d = classes + rng.below(4), k = 1 + rng.below(3);
    std::vector<Graph> graphs;
    std::vector<GraphOperator> ops;
    for (std::size_t g = 0; g < k; ++g) graphs.push_back(oracle::random_graph(classes * n, classes, 0.4, rng, rng.bernoulli(0.5)));
    for (const auto& g : graphs) ops.emplace_back(g);
    GufmState s;
    s.w2 = oracle::random_matrix(classes, d, rng);
    if (t % 2 == 0) s.w1 = oracle::random_matrix(classes, d, rng);
    for (std::size_t g = 0; g < k; ++g) s.h.push_back(oracle::random_matrix(d, classes * n, rng));
    const Regularization reg{rng.uniform(0.0, 0.1), rng.uniform(0.0, 0.1), rng.uniform(0.0, 0.1)};
    const GufmGradients grads = gufm_gradients(s, ops, reg);
    auto risk = [&] { return gufm_risk(s, ops, reg); };
    worst = std::max(worst, fd_error(s.w2, grads.w2, risk, 1e-5, 1e-8));
    if (s.w1) worst = std::max(worst, fd_error(*s.w1, *grads.w1, risk, 1e-5, 1e-8));
    for (std::size_t g = 0; g < k; ++g) worst = std::max(worst, fd_error(s.h[g], grads.h[g], risk, 1e-5, 1e-8));
  }
  return worst;
}

double nearest_kink(const ForwardPass& pass) {
  double out = INFINITY;
  for (std::size_t l = 0; l + 1 < pass.layers.size(); ++l)
    for (double v : pass.layers[l].pre.values()) out = std::min(out, std::abs(v));
  return out;
}

std::pair<double, std::size_t> gnn_fd_worst(Rng& rng) {
  double worst = 0.0;
  std::size_t checked = 0, skipped = 0;
  const double eps = 1e-5;
  while (checked < 50) {
    const std::size_t per = 3 + rng.below(3), layers = 1 + rng.below(3);
    const std::size_t input = 2 + rng.below(2), hidden = 2 + rng.below(3);
    const Graph g = oracle::random_graph(2 * per, 2, 0.5, rng, rng.bernoulli(0.3));
    const GraphOperator op(g);
    GnnParams p{checked % 2 == 0 ? Family::F : Family::F_prime, {}};
    for (std::size_t l = 0; l < layers; ++l) {
      const std::size_t in = l == 0 ? input : hidden, out = l + 1 == layers ? 2 : hidden;
      GnnLayer layer{std::nullopt, oracle::random_matrix(out, in, rng, 0.8)};
      if (p.family == Family::F) layer.w1 = oracle::random_matrix(out, in, rng, 0.8);
      p.layers.push_back(std::move(layer));
    }
    const Matrix x0 = oracle::random_matrix(input, g.num_nodes(), rng);
    const ForwardPass pass = forward(p, op, x0, eps);
    if (nearest_kink(pass) < 1e-4) {
      ++skipped;
      continue;
    }
    const Matrix target = perm_mse_loss(pass.output(), g.labels(), 2).target;
    const auto grads = backward(p, op, pass, target);
    auto loss = [&] {
      const Matrix diff = forward(p, op, x0, eps).output() - target;
      return frobenius_dot(diff, diff) / (2.0 * static_cast<double>(g.num_nodes()));
    };
    for (std::size_t l = 0; l < layers; ++l) {
      worst = std::max(worst, fd_error(p.layers[l].w2, grads[l].w2, loss, 1e-6, 1e-4));
      if (p.layers[l].w1) worst = std::max(worst, fd_error(*p.layers[l].w1, *grads[l].w1, loss, 1e-6, 1e-4));
    }
    ++checked;
  }
  return {worst, skipped};
}

// 9. Analytic gradients against central differences.
Outcome gradient_checks() {
  const auto start = Clock::now();
  Rng rng = Rng::stream(kSeed, "gradients");
  const double gufm_worst = gufm_fd_worst(rng);
  const auto [gnn_worst, skipped] = gnn_fd_worst(rng);
  const double elapsed = seconds_since(start);
  return {gufm_worst <= 1e-6 && gnn_worst <= 1e-5,
          fmt::format("gUFM worst relative error {:.3g} over 50 instances (need <= 1e-6); GNN worst {:.3g} over 50 "
                      "instances (need <= 1e-5; {} draws within 1e-4 of a ReLU kink redrawn; gradient norm floor 1e-4), "
                      "{:.2f} s",
                      gufm_worst, gnn_worst, skipped, elapsed)};
}

// 10. Collapsed features on condition-C graphs have collapsed aggregates.
Outcome collapse_propagates() {
  const auto start = Clock::now();
  double worst = 0.0;
  std::size_t holding = 0;
  for (std::size_t k = 0; k < 50; ++k) {
    const ExperimentConfig cfg = preset(k % 2 == 0 ? "d1-scaled" : "d2-scaled");
    const SsbmParams params = cfg.dataset.params();
    const CPlusGraph g = sample_condition_c_graph(params, Rng::derive(kSeed, "collapse", k));
    if (check_condition_c(g.graph).holds) ++holding;
    Rng rng = Rng::stream(kSeed, "collapse-features", k);
    const Matrix h = collapse_to_class_means(oracle::random_matrix(8, params.num_nodes, rng), g.graph.labels(),
                                             params.num_classes);
    const Matrix ha = GraphOperator(g.graph).apply(h);
    const Covariances cov = covariances(FeatureView{ha, g.graph.labels(), params.num_classes});
    worst = std::max(worst, frobenius_norm(cov.within));
  }
  const double elapsed = seconds_since(start);
  return {holding == 50 && worst <= 1e-10,
          fmt::format("{}/50 graphs satisfy condition C, largest ||Sigma_W(HA)||_F {:.3g} (need <= 1e-10), {:.2f} s",
                      holding, worst, elapsed)};
}

// 11. Propagated moments against sampled layer outputs.
Outcome moment_propagation() {
  const auto start = Clock::now();
  Rng rng = Rng::stream(kSeed, "moments");
  std::size_t entries = 0, inside = 0;
  double worst_z = 0.0;
  for (int t = 0; t < 10; ++t) {
    const std::size_t d = 2 + rng.below(3);
    const MomentPair in = random_moments(d, rng);
    const TraceBoundSpec spec = random_spec(d, t % 2 == 0, rng);
    const MomentPair exact = propagate_moments(in, spec);
    const oracle::MomentEstimate mc = oracle::sample_layer_output(in, spec, 100000, rng);
    auto tally = [&](double got, double want, double se) {
      ++entries;
      const double z = std::abs(got - want) / std::max(se, 1e-300);
      worst_z = std::max(worst_z, z);
      if (std::abs(got - want) <= 4.0 * se + 1e-12) ++inside;
    };
    for (std::size_t i = 0; i < d; ++i) tally(mc.mean[i], exact.mu1[i], mc.mean_se[i]);
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) tally(mc.cov(a, b), exact.sigma1(a, b), mc.cov_se(a, b));
  }
  const double elapsed = seconds_since(start);
  return {inside == entries,
          fmt::format("{}/{} mean and covariance entries within 4 standard errors over 10 configurations of 1e5 "
                      "samples, largest |z| {:.2f}, {:.1f} s",
                      inside, entries, worst_z, elapsed)};
}

}  // namespace

int main() {
  std::optional<TrainedNetwork> trained;
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, exhaustive_enumeration},
      {2, monte_carlo_frequency},
      {3, analytic_bound},
      {4, gufm_paired_runs},
      {5, [&] { return gnn_training(trained); }},
      {6, [&] { return spectral_contrast(trained); }},
      {7, sandwich_bounds},
      {8, flow_monotonicity},
      {9, gradient_checks},
      {10, collapse_propagates},
      {11, moment_propagation},
  };
  int failures = 0;
  for (const auto& [id, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    fmt::print("{} criterion {}: {}\n", o.pass ? "PASS" : "FAIL", id, o.detail);
    std::fflush(stdout);
  }
  fmt::print("{} of {} criteria passed\n", criteria.size() - static_cast<std::size_t>(failures), criteria.size());
  return failures == 0 ? 0 : 1;
}
