#include "ncgl/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "ncgl/rng.hpp"

namespace ncgl {

using nlohmann::json;

SsbmParams DatasetConfig::params() const {
  if (a && b) return SsbmParams::from_recovery(num_nodes, num_classes, *a, *b);
  if (!p || !q) throw ConfigError("dataset: give either p and q or a and b");
  return SsbmParams{num_nodes, num_classes, *p, *q, std::nullopt, std::nullopt};
}

void ExperimentConfig::validate() const {
  if (dataset.a.has_value() != dataset.b.has_value()) throw ConfigError("dataset: a and b must be given together");
  if (dataset.p.has_value() != dataset.q.has_value()) throw ConfigError("dataset: p and q must be given together");
  if (dataset.a.has_value() == dataset.p.has_value()) throw ConfigError("dataset: give exactly one of (p, q) and (a, b)");
  try {
    dataset.params().validate();
  } catch (const GraphError& e) {
    throw ConfigError(std::string("dataset: ") + e.what());
  }
  if (model.layers == 0 || model.hidden == 0 || model.input_dim == 0) {
    throw ConfigError("model: layers, hidden and input_dim must be positive");
  }
  if (!(optim.lr >= 0.0)) throw ConfigError("optim.lr: must be nonnegative");
  if (!(optim.momentum >= 0.0 && optim.momentum < 1.0)) throw ConfigError("optim.momentum: must lie in [0, 1)");
  if (!(optim.weight_decay >= 0.0)) throw ConfigError("optim.weight_decay: must be nonnegative");
  if (!(optim.instance_norm_eps > 0.0)) throw ConfigError("optim.instance_norm_eps: must be positive");
  if (gufm.dim < dataset.num_classes) throw ConfigError("gufm.dim: must be at least num_classes");
  if (!(gufm.lr >= 0.0)) throw ConfigError("gufm.lr: must be nonnegative");
  if (gufm.lambda_h < 0.0 || gufm.lambda_w2 < 0.0 || gufm.lambda_w1 < 0.0) {
    throw ConfigError("gufm: regularization must be nonnegative");
  }
  try {
    flow.flow.validate();
  } catch (const DimensionError& e) {
    throw ConfigError(std::string("flow: ") + e.what());
  }
  if (spectral.iterations == 0) throw ConfigError("spectral.iterations: must be positive");
}

GnnTrainConfig ExperimentConfig::gnn_train() const {
  GnnTrainConfig out;
  out.shape = {model.family, model.layers, model.input_dim, model.hidden, dataset.num_classes};
  out.sgd = {optim.lr, optim.momentum, optim.weight_decay};
  out.epochs = optim.epochs;
  out.seed = Rng::derive(seed, "gnn-init");
  out.norm_eps = optim.instance_norm_eps;
  return out;
}

GufmTrainConfig ExperimentConfig::gufm_train() const {
  GufmTrainConfig out;
  out.family = gufm.family;
  out.reg = {gufm.lambda_h, gufm.lambda_w2, gufm.lambda_w1};
  out.lr = gufm.lr;
  out.epochs = gufm.epochs;
  out.dim = gufm.dim;
  out.seed = Rng::derive(seed, "gufm-init");
  out.record_every = gufm.record_every;
  return out;
}

SpectralConfig ExperimentConfig::spectral_config() const {
  return {spectral.kind, spectral.bh_scale, spectral.iterations, Rng::derive(seed, "spectral")};
}

namespace {

ExperimentConfig base(const std::string& name) {
  ExperimentConfig c;
  c.name = name;
  c.seed = 0;
  c.dataset = {1000, 2, 0.025, 0.0017, std::nullopt, std::nullopt, 1000, 100, ConditionMode::random, false};
  c.model = {Family::F_prime, 32, 8, 8};
  c.optim = {0.004, 0.9, 5e-4, 8, 1e-5};
  c.gufm = {Family::F_prime, 10, 8, 0.1, 50000, 5e-3, 5e-3, 5e-3, 100};
  c.flow.num_nodes = 100;
  c.flow.p = 0.5;
  c.flow.q = 0.1;
  c.flow.flow = FlowConfig{};
  c.spectral = {SpectralKind::bh, std::nullopt, 32};
  c.output_dir = "out/" + name;
  return c;
}

}  // namespace

std::vector<std::string> preset_names() { return {"d1", "d2", "d1-scaled", "d2-scaled", "paper-example"}; }

ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c = base(name);
  if (name == "d1" || name == "paper-example") {
    if (name == "paper-example") {
      c.dataset.p.reset();
      c.dataset.q.reset();
      c.dataset.a = 3.75;
      c.dataset.b = 0.25;
    }
    return c;
  }
  if (name == "d2") {
    c.dataset = {1500, 4, 0.072, 0.0048, std::nullopt, std::nullopt, 1000, 100, ConditionMode::random, false};
    c.model.hidden = 16;
    c.model.input_dim = 16;
    c.optim.lr = 0.006;
    c.gufm.dim = 16;
    return c;
  }
  if (name == "d1-scaled") {
    c.dataset = {200, 2, std::nullopt, std::nullopt, 3.75, 0.25, 50, 20, ConditionMode::random, false};
    c.model = {Family::F_prime, 8, 8, 8};
    c.optim.epochs = 30;
    c.gufm.epochs = 5000;
    c.spectral.iterations = 32;
    return c;
  }
  if (name == "d2-scaled") {
    c.dataset = {400, 4, std::nullopt, std::nullopt, 14.77, 0.98, 50, 20, ConditionMode::random, false};
    c.model = {Family::F_prime, 8, 16, 16};
    c.optim.lr = 0.006;
    c.optim.epochs = 30;
    c.gufm.dim = 16;
    c.gufm.epochs = 5000;
    return c;
  }
  std::string known;
  for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
  throw ConfigError("unknown preset '" + name + "' (known: " + known + ")");
}

namespace {

const char* family_name(Family f) { return f == Family::F ? "F" : "F_prime"; }

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json to_json(const ExperimentConfig& c) {
  const auto& d = c.dataset;
  const auto& f = c.flow.flow;
  return {
      {"name", c.name},
      {"seed", c.seed},
      {"dataset",
       {{"num_nodes", d.num_nodes},
        {"num_classes", d.num_classes},
        {"p", optional_json(d.p)},
        {"q", optional_json(d.q)},
        {"a", optional_json(d.a)},
        {"b", optional_json(d.b)},
        {"num_graphs", d.num_graphs},
        {"num_test_graphs", d.num_test_graphs},
        {"condition_mode", d.condition_mode == ConditionMode::c_plus ? "c_plus" : "random"},
        {"self_loops", d.self_loops}}},
      {"model",
       {{"family", family_name(c.model.family)},
        {"layers", c.model.layers},
        {"hidden", c.model.hidden},
        {"input_dim", c.model.input_dim}}},
      {"optim",
       {{"lr", c.optim.lr},
        {"momentum", c.optim.momentum},
        {"weight_decay", c.optim.weight_decay},
        {"epochs", c.optim.epochs},
        {"instance_norm_eps", c.optim.instance_norm_eps}}},
      {"gufm",
       {{"family", family_name(c.gufm.family)},
        {"num_graphs", c.gufm.num_graphs},
        {"dim", c.gufm.dim},
        {"lr", c.gufm.lr},
        {"epochs", c.gufm.epochs},
        {"lambda_h", c.gufm.lambda_h},
        {"lambda_w2", c.gufm.lambda_w2},
        {"lambda_w1", c.gufm.lambda_w1},
        {"record_every", c.gufm.record_every}}},
      {"flow",
       {{"num_nodes", c.flow.num_nodes},
        {"p", c.flow.p},
        {"q", c.flow.q},
        {"step", f.step},
        {"steps", f.steps},
        {"epsilon", f.epsilon},
        {"lambda_h", f.lambda_h},
        {"lambda_w2", f.lambda_w2},
        {"dim", f.dim},
        {"record_every", f.record_every}}},
      {"spectral",
       {{"kind", c.spectral.kind == SpectralKind::nl ? "nl" : "bh"},
        {"bh_scale", optional_json(c.spectral.bh_scale)},
        {"iterations", c.spectral.iterations}}},
      {"output_dir", c.output_dir},
  };
}

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  const json& at(const std::string& key) const {
    if (!j_.contains(key)) throw ConfigError("missing field " + where(key));
    return j_.at(key);
  }
  Reader section(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_object()) throw ConfigError(where(key) + ": expected an object");
    return Reader(v, where(key));
  }
  template <class T>
  T get(const std::string& key) const {
    const json& v = at(key);
    try {
      if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
        if (!v.is_number_unsigned()) throw ConfigError(where(key) + ": expected a nonnegative integer");
      } else if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw ConfigError(where(key) + ": expected a number");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(where(key) + ": expected true or false");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError(where(key) + ": expected a string");
      }
      return v.get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where(key) + ": " + e.what());
    }
  }
  std::optional<double> optional_number(const std::string& key) const {
    if (at(key).is_null()) return std::nullopt;
    return get<double>(key);
  }
  std::string choice(const std::string& key, std::initializer_list<const char*> options) const {
    const auto v = get<std::string>(key);
    for (const char* o : options)
      if (v == o) return v;
    std::string list;
    for (const char* o : options) list += (list.empty() ? "" : ", ") + std::string(o);
    throw ConfigError(where(key) + ": '" + v + "' is not one of " + list);
  }

 private:
  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  const json& j_;
  std::string path_;
};

Family parse_family(const std::string& s) { return s == "F" ? Family::F : Family::F_prime; }

ExperimentConfig from_json(const json& j) {
  const Reader root(j, "");
  ExperimentConfig c;
  c.name = root.get<std::string>("name");
  c.seed = root.get<std::uint64_t>("seed");
  const Reader d = root.section("dataset");
  c.dataset.num_nodes = d.get<std::size_t>("num_nodes");
  c.dataset.num_classes = d.get<std::size_t>("num_classes");
  c.dataset.p = d.optional_number("p");
  c.dataset.q = d.optional_number("q");
  c.dataset.a = d.optional_number("a");
  c.dataset.b = d.optional_number("b");
  c.dataset.num_graphs = d.get<std::size_t>("num_graphs");
  c.dataset.num_test_graphs = d.get<std::size_t>("num_test_graphs");
  c.dataset.condition_mode =
      d.choice("condition_mode", {"random", "c_plus"}) == "c_plus" ? ConditionMode::c_plus : ConditionMode::random;
  c.dataset.self_loops = d.get<bool>("self_loops");
  const Reader m = root.section("model");
  c.model.family = parse_family(m.choice("family", {"F", "F_prime"}));
  c.model.layers = m.get<std::size_t>("layers");
  c.model.hidden = m.get<std::size_t>("hidden");
  c.model.input_dim = m.get<std::size_t>("input_dim");
  const Reader o = root.section("optim");
  c.optim.lr = o.get<double>("lr");
  c.optim.momentum = o.get<double>("momentum");
  c.optim.weight_decay = o.get<double>("weight_decay");
  c.optim.epochs = o.get<std::size_t>("epochs");
  c.optim.instance_norm_eps = o.get<double>("instance_norm_eps");
  const Reader g = root.section("gufm");
  c.gufm.family = parse_family(g.choice("family", {"F", "F_prime"}));
  c.gufm.num_graphs = g.get<std::size_t>("num_graphs");
  c.gufm.dim = g.get<std::size_t>("dim");
  c.gufm.lr = g.get<double>("lr");
  c.gufm.epochs = g.get<std::size_t>("epochs");
  c.gufm.lambda_h = g.get<double>("lambda_h");
  c.gufm.lambda_w2 = g.get<double>("lambda_w2");
  c.gufm.lambda_w1 = g.get<double>("lambda_w1");
  c.gufm.record_every = g.get<std::size_t>("record_every");
  const Reader f = root.section("flow");
  c.flow.num_nodes = f.get<std::size_t>("num_nodes");
  c.flow.p = f.get<double>("p");
  c.flow.q = f.get<double>("q");
  c.flow.flow.step = f.get<double>("step");
  c.flow.flow.steps = f.get<std::size_t>("steps");
  c.flow.flow.epsilon = f.get<double>("epsilon");
  c.flow.flow.lambda_h = f.get<double>("lambda_h");
  c.flow.flow.lambda_w2 = f.get<double>("lambda_w2");
  c.flow.flow.dim = f.get<std::size_t>("dim");
  c.flow.flow.record_every = f.get<std::size_t>("record_every");
  const Reader s = root.section("spectral");
  c.spectral.kind = s.choice("kind", {"nl", "bh"}) == "nl" ? SpectralKind::nl : SpectralKind::bh;
  c.spectral.bh_scale = s.optional_number("bh_scale");
  c.spectral.iterations = s.get<std::size_t>("iterations");
  c.output_dir = root.get<std::string>("output_dir");
  return c;
}

void reject_unknown(const json& given, const json& known, const std::string& path) {
  if (!given.is_object()) throw ConfigError((path.empty() ? "config" : path) + ": expected an object");
  for (const auto& [key, value] : given.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!known.contains(key)) throw ConfigError("unknown field " + where);
    if (known.at(key).is_object()) reject_unknown(value, known.at(key), where);
  }
}

void overlay(json& target, const json& patch) {
  for (const auto& [key, value] : patch.items()) {
    if (value.is_object() && target.contains(key) && target[key].is_object()) {
      overlay(target[key], value);
    } else {
      target[key] = value;
    }
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json given;
  try {
    given = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!given.is_object()) throw ConfigError("config: expected a JSON object");
  json merged;
  if (given.contains("preset")) {
    if (!given.at("preset").is_string()) throw ConfigError("preset: expected a string");
    const ExperimentConfig start = preset(given.at("preset").get<std::string>());
    given.erase("preset");
    merged = to_json(start);
  }
  reject_unknown(given, to_json(base("template")), "");
  overlay(merged, given);
  ExperimentConfig c = from_json(merged);
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string config_to_json(const ExperimentConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

}  // namespace ncgl
