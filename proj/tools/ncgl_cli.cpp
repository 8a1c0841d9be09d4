#include <fmt/core.h>

#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ncgl/config.hpp"
#include "ncgl/csv.hpp"
#include "ncgl/gnn.hpp"
#include "ncgl/graph_io.hpp"
#include "ncgl/graphs.hpp"
#include "ncgl/gufm.hpp"
#include "ncgl/layerwise.hpp"
#include "ncgl/parallel.hpp"
#include "ncgl/rng.hpp"
#include "ncgl/spectral.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ncgl;

namespace {

struct Common {
  std::string preset = "d1-scaled";
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::string out;
};

struct GraphFlags {
  std::optional<std::size_t> nodes, classes;
  std::optional<double> p, q;
  bool self_loops = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--preset", c.preset, "Preset name: d1, d2, d1-scaled, d2-scaled, paper-example");
  cmd->add_option("--config", c.config, "JSON config file (overrides --preset)");
  cmd->add_option("--seed", c.seed, "Seed override");
  cmd->add_option("--threads", c.threads, "Worker threads (results never depend on it)");
  cmd->add_option("--out", c.out, "Output directory");
}

void add_graph_flags(CLI::App* cmd, GraphFlags& g) {
  cmd->add_option("--N", g.nodes, "Number of nodes");
  cmd->add_option("--C", g.classes, "Number of classes");
  cmd->add_option("--p", g.p, "Intra-class edge probability");
  cmd->add_option("--q", g.q, "Inter-class edge probability");
  cmd->add_flag("--self-loops", g.self_loops, "Allow self-loops");
}

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? preset(c.preset) : load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.output_dir = c.out;
  set_thread_count(c.threads.value_or(default_thread_count()));
  return cfg;
}

SsbmParams graph_params(const ExperimentConfig& cfg, const GraphFlags& g) {
  SsbmParams params = cfg.dataset.params();
  if (g.nodes || g.classes || g.p || g.q) {
    if (!(g.nodes && g.p && g.q)) throw ConfigError("--N, --p and --q must be given together");
    params = SsbmParams{*g.nodes, g.classes.value_or(2), *g.p, *g.q, std::nullopt, std::nullopt};
  }
  params.validate();
  return params;
}

fs::path out_path(const ExperimentConfig& cfg, const std::string& name) { return fs::path(cfg.output_dir) / name; }

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

json params_json(const SsbmParams& p) {
  return {{"num_nodes", p.num_nodes}, {"num_classes", p.num_classes}, {"p", p.p}, {"q", p.q}};
}

std::optional<double> final_mean(const std::vector<StepRecord>& trajectory,
                                 std::optional<double> (*pick)(const GraphSnapshot&)) {
  if (trajectory.empty()) return std::nullopt;
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& g : trajectory.back().graphs) {
    if (auto v = pick(g)) {
      sum += *v;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

std::optional<double> pick_overlap(const GraphSnapshot& g) { return g.overlap; }
std::optional<double> pick_nc1t(const GraphSnapshot& g) { return g.report.nc1t_h; }
std::optional<double> pick_loss(const GraphSnapshot& g) { return g.loss; }

std::string show(std::optional<double> v) { return v ? fmt::format("{:.6g}", *v) : std::string("n/a"); }

std::vector<GnnSample> test_data(const ExperimentConfig& cfg) {
  return make_dataset(cfg.dataset.params(), cfg.dataset.num_test_graphs, cfg.dataset.condition_mode,
                      cfg.model.input_dim, cfg.seed, "test-graph");
}

GnnParams trained_or_loaded(const ExperimentConfig& cfg, const std::string& checkpoint) {
  if (!checkpoint.empty()) return gnn_from_json(read_file(checkpoint));
  const auto train = make_dataset(cfg.dataset.params(), cfg.dataset.num_graphs, cfg.dataset.condition_mode,
                                  cfg.model.input_dim, cfg.seed, "graph");
  GnnTrainConfig tc = cfg.gnn_train();
  tc.record_every = 0;
  return train_gnn(train, tc).params;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural-collapse experiments on stochastic block model graphs"};
  app.require_subcommand(1);

  Common common;
  GraphFlags gflags;
  std::size_t count = 1;
  std::string mode = "random";
  std::string graph_file;
  std::optional<std::uint64_t> cap;
  std::uint64_t trials = 1000000;
  std::optional<std::size_t> epochs;
  std::optional<double> epsilon;
  std::string checkpoint;
  std::string kind;

  auto* ssbm = app.add_subcommand("ssbm", "Graph sampling and condition-C tools");
  ssbm->require_subcommand(1);
  auto* sample = ssbm->add_subcommand("sample", "Sample SSBM graphs");
  auto* check = ssbm->add_subcommand("check-c", "Check condition C on a graph file");
  auto* cplus = ssbm->add_subcommand("make-cplus", "Construct a graph satisfying condition C");
  auto* enumerate = ssbm->add_subcommand("enumerate", "Exact condition-C probability for tiny graphs");
  auto* mc = ssbm->add_subcommand("mc-prob", "Monte Carlo condition-C probability");
  auto* bound = ssbm->add_subcommand("bound", "Analytic upper bound on the condition-C probability");
  for (auto* cmd : {sample, check, cplus, enumerate, mc, bound}) add_common(cmd, common);
  for (auto* cmd : {sample, cplus, enumerate, mc, bound}) add_graph_flags(cmd, gflags);
  sample->add_option("--count", count, "Number of graphs");
  sample->add_option("--mode", mode, "random or c_plus")->check(CLI::IsMember({"random", "c_plus"}));
  check->add_option("--graph", graph_file, "Graph JSON file")->required();
  enumerate->add_option("--cap", cap, "Sample this many realizations instead of enumerating");
  mc->add_option("--trials", trials, "Number of trials");

  auto* gufm = app.add_subcommand("gufm", "Graph unconstrained features model");
  gufm->require_subcommand(1);
  auto* gufm_train = gufm->add_subcommand("train", "Gradient descent on the gUFM risk");
  auto* gufm_flow = gufm->add_subcommand("flow", "Central-path gradient flow");
  add_common(gufm_train, common);
  add_common(gufm_flow, common);
  gufm_train->add_option("--mode", mode, "random or c_plus")->check(CLI::IsMember({"random", "c_plus"}));
  gufm_train->add_option("--epochs", epochs, "Epoch override");
  gufm_flow->add_option("--epsilon", epsilon, "Perturbation scale override");

  auto* gnn = app.add_subcommand("gnn", "Graph neural network training and inference");
  gnn->require_subcommand(1);
  auto* gnn_train = gnn->add_subcommand("train", "Train on the configured dataset");
  auto* gnn_infer = gnn->add_subcommand("infer", "Layerwise metrics on test graphs");
  add_common(gnn_train, common);
  add_common(gnn_infer, common);
  gnn_train->add_option("--epochs", epochs, "Epoch override");
  gnn_infer->add_option("--checkpoint", checkpoint, "Checkpoint JSON (trains first when absent)");

  auto* spectral = app.add_subcommand("spectral", "Spectral baselines");
  spectral->require_subcommand(1);
  auto* spectral_run = spectral->add_subcommand("run", "Projected power iteration on test graphs");
  add_common(spectral_run, common);
  spectral_run->add_option("--kind", kind, "nl or bh")->check(CLI::IsMember({"nl", "bh"}));

  auto* layerwise = app.add_subcommand("layerwise", "Trace-ratio bounds");
  layerwise->require_subcommand(1);
  auto* verify = layerwise->add_subcommand("verify", "Bound report for a trained network");
  add_common(verify, common);
  verify->add_option("--checkpoint", checkpoint, "Checkpoint JSON (trains first when absent)");

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig cfg = resolve(common);

    if (sample->parsed()) {
      const SsbmParams params = graph_params(cfg, gflags);
      const auto graphs = sample_graphs(params, count, mode == "c_plus" ? ConditionMode::c_plus : ConditionMode::random,
                                        cfg.seed, "graph", gflags.self_loops);
      double edges = 0.0;
      for (std::size_t k = 0; k < graphs.size(); ++k) {
        save_graph(out_path(cfg, fmt::format("graph_{}.json", k)), graphs[k]);
        edges += static_cast<double>(graphs[k].num_edges());
      }
      fmt::print("sampled {} {} graph(s) with N={} C={} p={} q={}, mean edges {:.6g}, written to {}\n", graphs.size(),
                 mode, params.num_nodes, params.num_classes, params.p, params.q,
                 edges / static_cast<double>(graphs.size()), cfg.output_dir);
    } else if (check->parsed()) {
      const Graph g = load_graph(graph_file);
      const ConditionCVerdict v = check_condition_c(g);
      json j{{"holds", v.holds}};
      if (v.witness) {
        j["witness"] = {{"class", v.witness->class_id},
                        {"node_i", v.witness->node_i},
                        {"node_j", v.witness->node_j},
                        {"other_class", v.witness->other_class}};
      }
      write_json(out_path(cfg, "condition_c.json"), j);
      if (v.holds) {
        fmt::print("condition C holds\n");
      } else {
        fmt::print("condition C fails: class {} nodes {} and {} differ toward class {}\n", v.witness->class_id,
                   v.witness->node_i, v.witness->node_j, v.witness->other_class);
      }
    } else if (cplus->parsed()) {
      const SsbmParams params = graph_params(cfg, gflags);
      const CPlusGraph g = sample_condition_c_graph(params, Rng::derive(cfg.seed, "graph"));
      save_graph(out_path(cfg, "cplus.json"), g.graph);
      fmt::print("built condition-C graph: intra degree {}, cross degree {}{}, condition C {}\n", g.intra_degree,
                 g.cross_degree, g.parity_repaired ? " (intra degree raised by one for parity)" : "",
                 check_condition_c(g.graph).holds ? "holds" : "FAILS");
    } else if (enumerate->parsed()) {
      const SsbmParams params = graph_params(cfg, gflags);
      const EnumerationResult r = enumerate_condition_c(params.num_nodes, params.num_classes, params.p, params.q,
                                                        gflags.self_loops, cap, cfg.seed);
      write_json(out_path(cfg, "enumerate.json"), {{"params", params_json(params)},
                                                   {"self_loops", gflags.self_loops},
                                                   {"satisfying_count", r.satisfying_count},
                                                   {"total", r.total},
                                                   {"exhaustive", r.exhaustive},
                                                   {"probability", r.probability}});
      fmt::print("condition C probability {:.6f} ({} of {} realizations satisfy, {})\n", r.probability,
                 r.satisfying_count, r.total, r.exhaustive ? "exhaustive" : "sampled");
    } else if (mc->parsed()) {
      const SsbmParams params = graph_params(cfg, gflags);
      const McResult r = mc_condition_c_probability(params, trials, cfg.seed, gflags.self_loops);
      write_json(out_path(cfg, "mc.json"), {{"params", params_json(params)},
                                            {"self_loops", gflags.self_loops},
                                            {"hits", r.hits},
                                            {"trials", r.trials},
                                            {"estimate", r.estimate},
                                            {"std_error", r.std_error}});
      fmt::print("condition C estimate {:.6g} +/- {:.2g} ({} of {} trials)\n", r.estimate, r.std_error, r.hits,
                 r.trials);
    } else if (bound->parsed()) {
      const SsbmParams params = graph_params(cfg, gflags);
      const double log10_bound = analytic_bound_log10(params);
      write_json(out_path(cfg, "bound.json"), {{"params", params_json(params)}, {"log10_bound", log10_bound}});
      fmt::print("log10 of the condition C probability bound: {:.4f}\n", log10_bound);
    } else if (gufm_train->parsed()) {
      if (gufm_train->count("--mode") > 0) {
        cfg.dataset.condition_mode = mode == "c_plus" ? ConditionMode::c_plus : ConditionMode::random;
      }
      GufmTrainConfig tc = cfg.gufm_train();
      if (epochs) tc.epochs = *epochs;
      const auto graphs = sample_graphs(cfg.dataset.params(), cfg.gufm.num_graphs, cfg.dataset.condition_mode, cfg.seed,
                                        "gufm-graph", cfg.dataset.self_loops);
      const GufmRun run = train_gufm(graphs, tc);
      const auto rows = trajectory_rows(run.trajectory);
      write_text(out_path(cfg, "gufm_metrics.csv"), render_metrics(rows));
      fmt::print("gufm trained {} epochs on {} {} graphs: risk {:.6g}, mean nc1_tilde(H) {}, mean overlap {}\n",
                 tc.epochs, graphs.size(),
                 cfg.dataset.condition_mode == ConditionMode::c_plus ? "condition-C" : "random", run.risks.back(),
                 show(final_mean(run.trajectory, pick_nc1t)), show(final_mean(run.trajectory, pick_overlap)));
    } else if (gufm_flow->parsed()) {
      FlowConfig fc = cfg.flow.flow;
      if (epsilon) fc.epsilon = *epsilon;
      const SsbmParams params{cfg.flow.num_nodes, 2, cfg.flow.p, cfg.flow.q, std::nullopt, std::nullopt};
      const FlowResult r = central_path_flow(params, Rng::derive(cfg.seed, "flow"), fc);
      write_text(out_path(cfg, "flow_metrics.csv"), render_metrics(trajectory_rows(r.trajectory)));
      std::ostringstream traces;
      traces << "step,trW,trB,risk,hypothesis_margin\n";
      for (const auto& pt : r.points) {
        traces << pt.step << ',' << format_number(pt.tr_within) << ',' << format_number(pt.tr_between) << ','
               << format_number(pt.risk) << ',' << format_number(pt.hypothesis_margin) << '\n';
      }
      write_text(out_path(cfg, "flow_traces.csv"), traces.str());
      fmt::print(
          "flow eps={}: Tr Sigma_W non-increasing on {:.2f}% of steps, Tr Sigma_B non-decreasing on {:.2f}%, "
          "hypothesis {} (min margin {:.3g})\n",
          fc.epsilon, 100.0 * r.within_nonincreasing_fraction, 100.0 * r.between_nondecreasing_fraction,
          r.hypothesis_held ? "held throughout" : "violated", r.min_margin);
    } else if (gnn_train->parsed()) {
      GnnTrainConfig tc = cfg.gnn_train();
      if (epochs) tc.epochs = *epochs;
      const auto data = make_dataset(cfg.dataset.params(), cfg.dataset.num_graphs, cfg.dataset.condition_mode,
                                     cfg.model.input_dim, cfg.seed, "graph");
      const GnnRun run = train_gnn(data, tc);
      write_text(out_path(cfg, "gnn_metrics.csv"), render_metrics(trajectory_rows(run.trajectory)));
      write_text(out_path(cfg, "checkpoint.json"), gnn_to_json(run.params));
      fmt::print("gnn trained {} epochs on {} graphs: mean loss {}, mean overlap {}, mean nc1_tilde(H) {} (initial {})\n",
                 tc.epochs, data.size(), show(final_mean(run.trajectory, pick_loss)),
                 show(final_mean(run.trajectory, pick_overlap)), show(final_mean(run.trajectory, pick_nc1t)),
                 show(final_mean({run.trajectory.front()}, pick_nc1t)));
    } else if (gnn_infer->parsed()) {
      const GnnParams params = trained_or_loaded(cfg, checkpoint);
      const auto data = test_data(cfg);
      const auto rows = infer_layerwise(params, data, cfg.optim.instance_norm_eps);
      write_text(out_path(cfg, "gnn_layerwise.csv"), render_layers(rows));
      double mean_overlap = 0.0;
      for (const auto& s : data) mean_overlap += evaluate_graph(params, s, cfg.optim.instance_norm_eps).overlap;
      fmt::print("gnn inference on {} test graphs: {} layerwise rows, mean test overlap {:.6g}\n", data.size(),
                 rows.size(), mean_overlap / static_cast<double>(data.size()));
    } else if (spectral_run->parsed()) {
      SpectralConfig sc = cfg.spectral_config();
      if (!kind.empty()) sc.kind = kind == "nl" ? SpectralKind::nl : SpectralKind::bh;
      const auto graphs = sample_graphs(cfg.dataset.params(), cfg.dataset.num_test_graphs, cfg.dataset.condition_mode,
                                        cfg.seed, "test-graph", cfg.dataset.self_loops);
      std::vector<SpectralRun> runs(graphs.size());
      parallel_for(graphs.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) runs[k] = run_spectral(graphs[k], sc, std::to_string(k));
      });
      std::vector<LayerRow> rows;
      double mean_overlap = 0.0, worst_spread = 0.0;
      for (const auto& r : runs) {
        rows.insert(rows.end(), r.rows.begin(), r.rows.end());
        mean_overlap += r.overlap / static_cast<double>(runs.size());
        worst_spread = std::max(worst_spread, relative_spread(r.between_ratios, 5).value_or(0.0));
      }
      const std::string name = sc.kind == SpectralKind::nl ? "nl" : "bh";
      write_text(out_path(cfg, "spectral_" + name + ".csv"), render_layers(rows));
      fmt::print("{} power iteration on {} graphs: mean overlap {:.6g}, worst Tr Sigma_B ratio spread {:.3g}\n", name,
                 graphs.size(), mean_overlap, worst_spread);
    } else if (verify->parsed()) {
      const GnnParams params = trained_or_loaded(cfg, checkpoint);
      const auto data = test_data(cfg);
      const auto rows = layerwise_bounds(params, data, cfg.dataset.params(), cfg.optim.instance_norm_eps);
      write_text(out_path(cfg, "bounds.csv"), render_bounds(rows));
      std::size_t inside = 0;
      for (const auto& r : rows) inside += r.report.holds(1e-9) ? 1 : 0;
      fmt::print("trace-ratio bounds hold on {} of {} layers\n", inside, rows.size());
    }
  } catch (const DivergenceError& e) {
    fmt::print(stderr, "diverged: {}\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  }
  return 0;
}
