#include "fractal/config.hpp"

#include <fstream>
#include <stdexcept>

namespace fractal {

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  try {
    if (j.contains("mode"))
      cfg.mode = train_mode_from_string(j["mode"].get<std::string>());
    if (j.contains("weights")) {
      const auto& w = j["weights"];
      cfg.weights.bag = w.value("bag", cfg.weights.bag);
      cfg.weights.cosine = w.value("cosine", cfg.weights.cosine);
      cfg.weights.correlation =
          w.value("correlation", cfg.weights.correlation);
      cfg.weights.external = w.value("external", cfg.weights.external);
    }
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.steps_per_epoch = j.value("steps_per_epoch", cfg.steps_per_epoch);
    if (j.contains("optimizer")) {
      const auto& o = j["optimizer"];
      if (o.contains("kind"))
        cfg.optimizer.kind =
            optimizer_kind_from_string(o["kind"].get<std::string>());
      cfg.optimizer.beta1 = o.value("beta1", cfg.optimizer.beta1);
      cfg.optimizer.beta2 = o.value("beta2", cfg.optimizer.beta2);
      cfg.optimizer.epsilon = o.value("epsilon", cfg.optimizer.epsilon);
    }
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("approx"))
      cfg.approx = approx_from_string(j["approx"].get<std::string>());
    cfg.sharpness = j.value("sharpness", cfg.sharpness);
    if (j.contains("hidden")) {
      const auto& h = j["hidden"];
      if (!h.is_array() || h.size() != 2)
        throw std::invalid_argument("hidden must be a two-element array");
      cfg.hidden1 = h[0].get<std::size_t>();
      cfg.hidden2 = h[1].get<std::size_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("bad training config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

nlohmann::ordered_json train_config_to_json(const TrainConfig& cfg) {
  nlohmann::ordered_json j;
  j["mode"] = to_string(cfg.mode);
  j["weights"] = {{"bag", cfg.weights.bag},
                  {"cosine", cfg.weights.cosine},
                  {"correlation", cfg.weights.correlation},
                  {"external", cfg.weights.external}};
  j["learning_rate"] = cfg.learning_rate;
  j["batch_size"] = cfg.batch_size;
  j["epochs"] = cfg.epochs;
  j["steps_per_epoch"] = cfg.steps_per_epoch;
  j["optimizer"] = {{"kind", to_string(cfg.optimizer.kind)},
                    {"beta1", cfg.optimizer.beta1},
                    {"beta2", cfg.optimizer.beta2},
                    {"epsilon", cfg.optimizer.epsilon}};
  j["seed"] = cfg.seed;
  j["approx"] = to_string(cfg.approx);
  j["sharpness"] = cfg.sharpness;
  j["hidden"] = {cfg.hidden1, cfg.hidden2};
  return j;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("bad JSON in " + path + ": " + e.what());
  }
  return train_config_from_json(j);
}

void save_train_config(const std::string& path, const TrainConfig& cfg) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << train_config_to_json(cfg).dump(2) << '\n';
  if (!os) throw std::runtime_error("write failed: " + path);
}

}  // namespace fractal
