#include "dpvae/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dpvae/errors.hpp"

namespace dpvae {

namespace {

using json = nlohmann::json;

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "objective",  "prior_mode",   "beta",          "gamma",        "alpha",
      "lambda",     "c_max",        "c_stop",        "learning_rate", "batch_size",
      "iterations", "seed",         "dataset",       "n_train",      "n_heldout",
      "noise",      "grid_k",       "grid_spacing",  "data_dim",     "latent_dim",
      "hidden",     "activation",   "obs_std",       "flow_blocks",  "flow_width",
      "flow_hidden_layers",         "s_max",         "disc_width",   "disc_layers",
      "disc_learning_rate",         "output_dir"};
  return keys;
}

template <class T>
T get(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "leaky_relu") return Activation::leaky_relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "linear") return Activation::linear;
  throw ConfigError("unknown activation: " + s);
}

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::relu:
      return "relu";
    case Activation::leaky_relu:
      return "leaky_relu";
    case Activation::tanh:
      return "tanh";
    case Activation::linear:
      return "linear";
  }
  return "linear";
}

}  // namespace

TrainConfig two_moons_config(ObjectiveKind kind, PriorMode mode, std::uint64_t seed) {
  TrainConfig c;
  c.objective = ObjectiveConfig::defaults(kind, mode);
  c.seed = seed;
  c.arch.obs_std = 0.1;
  return c;
}

void validate(const TrainConfig& c) {
  if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate)) throw ConfigError("learning_rate must be positive");
  if (c.batch_size < 1) throw ConfigError("batch_size must be positive");
  if (c.iterations < 0) throw ConfigError("iterations must be non-negative");
  if (c.dataset.n_train < c.batch_size) throw ConfigError("n_train must be at least batch_size");
  if (c.dataset.n_heldout < 1) throw ConfigError("n_heldout must be positive");
  if (c.dataset.name != "two_moons" && c.dataset.name != "gaussian_grid") {
    throw ConfigError("dataset must be two_moons or gaussian_grid");
  }
  if (c.dataset.noise < 0.0) throw ConfigError("noise must be non-negative");
  if (c.arch.data_dim != 2) throw ConfigError("data_dim must be 2 for the built-in datasets");
  if (c.arch.latent_dim < 1) throw ConfigError("latent_dim must be positive");
  if (c.objective.prior_mode == PriorMode::decoupled && c.arch.latent_dim < 2) {
    throw ConfigError("decoupled prior needs latent_dim >= 2");
  }
  for (Index h : c.arch.hidden) {
    if (h < 1) throw ConfigError("hidden widths must be positive");
  }
  if (!(c.arch.obs_std > 0.0)) throw ConfigError("obs_std must be positive");
  if (c.arch.flow.blocks < 1 || c.arch.flow.width < 1 || c.arch.flow.hidden_layers < 0) {
    throw ConfigError("invalid flow shape");
  }
  if (!(c.arch.flow.s_max > 0.0)) throw ConfigError("s_max must be positive");
  if (c.objective.c_stop < 1) throw ConfigError("c_stop must be positive");
  for (double v : {c.objective.beta, c.objective.gamma, c.objective.alpha, c.objective.lambda, c.objective.c_max}) {
    if (!std::isfinite(v)) throw ConfigError("objective coefficients must be finite");
  }
  if (c.objective.kind == ObjectiveKind::beta_tc && c.batch_size < 2) throw ConfigError("beta-tc needs batch_size >= 2");
  if (c.objective.kind == ObjectiveKind::factor) {
    if (c.batch_size < 2) throw ConfigError("factor needs batch_size >= 2");
    if (c.disc_width < 1 || c.disc_layers < 1) throw ConfigError("invalid discriminator shape");
    if (!(c.disc_learning_rate > 0.0)) throw ConfigError("disc_learning_rate must be positive");
  }
}

TrainConfig parse_train_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known_keys().count(key)) throw ConfigError("unknown config key: " + key);
  }

  ObjectiveKind kind = ObjectiveKind::vanilla;
  PriorMode mode = PriorMode::standard;
  try {
    if (j.contains("objective")) kind = parse_objective_kind(get<std::string>(j, "objective"));
    if (j.contains("prior_mode")) mode = parse_prior_mode(get<std::string>(j, "prior_mode"));
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
  TrainConfig c = two_moons_config(kind, mode);

  auto& o = c.objective;
  if (j.contains("beta")) o.beta = get<double>(j, "beta");
  if (j.contains("gamma")) o.gamma = get<double>(j, "gamma");
  if (j.contains("alpha")) o.alpha = get<double>(j, "alpha");
  if (j.contains("lambda")) o.lambda = get<double>(j, "lambda");
  if (j.contains("c_max")) o.c_max = get<double>(j, "c_max");
  if (j.contains("c_stop")) o.c_stop = get<long>(j, "c_stop");
  if (j.contains("learning_rate")) c.learning_rate = get<double>(j, "learning_rate");
  if (j.contains("batch_size")) c.batch_size = get<Index>(j, "batch_size");
  if (j.contains("iterations")) c.iterations = get<long>(j, "iterations");
  if (j.contains("seed")) c.seed = get<std::uint64_t>(j, "seed");
  if (j.contains("dataset")) c.dataset.name = get<std::string>(j, "dataset");
  if (j.contains("n_train")) c.dataset.n_train = get<Index>(j, "n_train");
  if (j.contains("n_heldout")) c.dataset.n_heldout = get<Index>(j, "n_heldout");
  if (j.contains("noise")) c.dataset.noise = get<double>(j, "noise");
  if (j.contains("grid_k")) c.dataset.grid_k = get<Index>(j, "grid_k");
  if (j.contains("grid_spacing")) c.dataset.grid_spacing = get<double>(j, "grid_spacing");
  if (j.contains("data_dim")) c.arch.data_dim = get<Index>(j, "data_dim");
  if (j.contains("latent_dim")) c.arch.latent_dim = get<Index>(j, "latent_dim");
  if (j.contains("hidden")) c.arch.hidden = get<std::vector<Index>>(j, "hidden");
  if (j.contains("activation")) c.arch.activation = parse_activation(get<std::string>(j, "activation"));
  if (j.contains("obs_std")) c.arch.obs_std = get<double>(j, "obs_std");
  if (j.contains("flow_blocks")) c.arch.flow.blocks = get<int>(j, "flow_blocks");
  if (j.contains("flow_width")) c.arch.flow.width = get<Index>(j, "flow_width");
  if (j.contains("flow_hidden_layers")) c.arch.flow.hidden_layers = get<int>(j, "flow_hidden_layers");
  if (j.contains("s_max")) c.arch.flow.s_max = get<double>(j, "s_max");
  if (j.contains("disc_width")) c.disc_width = get<Index>(j, "disc_width");
  if (j.contains("disc_layers")) c.disc_layers = get<int>(j, "disc_layers");
  if (j.contains("disc_learning_rate")) c.disc_learning_rate = get<double>(j, "disc_learning_rate");
  if (j.contains("output_dir")) c.output_dir = get<std::string>(j, "output_dir");
  validate(c);
  return c;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_train_config(ss.str());
}

std::string to_json(const TrainConfig& c) {
  json j;
  j["objective"] = std::string(to_string(c.objective.kind));
  j["prior_mode"] = std::string(to_string(c.objective.prior_mode));
  j["beta"] = c.objective.beta;
  j["gamma"] = c.objective.gamma;
  j["alpha"] = c.objective.alpha;
  j["lambda"] = c.objective.lambda;
  j["c_max"] = c.objective.c_max;
  j["c_stop"] = c.objective.c_stop;
  j["learning_rate"] = c.learning_rate;
  j["batch_size"] = c.batch_size;
  j["iterations"] = c.iterations;
  j["seed"] = c.seed;
  j["dataset"] = c.dataset.name;
  j["n_train"] = c.dataset.n_train;
  j["n_heldout"] = c.dataset.n_heldout;
  j["noise"] = c.dataset.noise;
  j["grid_k"] = c.dataset.grid_k;
  j["grid_spacing"] = c.dataset.grid_spacing;
  j["data_dim"] = c.arch.data_dim;
  j["latent_dim"] = c.arch.latent_dim;
  j["hidden"] = c.arch.hidden;
  j["activation"] = activation_name(c.arch.activation);
  j["obs_std"] = c.arch.obs_std;
  j["flow_blocks"] = c.arch.flow.blocks;
  j["flow_width"] = c.arch.flow.width;
  j["flow_hidden_layers"] = c.arch.flow.hidden_layers;
  j["s_max"] = c.arch.flow.s_max;
  j["disc_width"] = c.disc_width;
  j["disc_layers"] = c.disc_layers;
  j["disc_learning_rate"] = c.disc_learning_rate;
  j["output_dir"] = c.output_dir;
  return j.dump();
}

}  // namespace dpvae
