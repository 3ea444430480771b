#pragma once

#include <string>

#include "fractal/training.hpp"

#include "json.hpp"

namespace fractal {

// JSON form shared by the CLI, tests, and bindings:
// {"mode":"bag","weights":{"bag":0.7,"cosine":0.2,"correlation":0.1,
//  "external":0.0},"learning_rate":1e-3,"batch_size":16,"epochs":10,
//  "steps_per_epoch":0,"optimizer":{"kind":"adam","beta1":0.9,
//  "beta2":0.999,"epsilon":1e-8},"seed":7,"approx":"mult",
//  "sharpness":10.0,"hidden":[64,32]}
// Missing keys keep their defaults.
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json train_config_to_json(const TrainConfig& cfg);

TrainConfig load_train_config(const std::string& path);
void save_train_config(const std::string& path, const TrainConfig& cfg);

}  // namespace fractal
