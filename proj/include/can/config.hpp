#pragma once

#include "can/trainer.hpp"

#include <json.hpp>

#include <string>

namespace can {

// TrainConfig <-> JSON object with the struct's field names; nested "plan",
// "kmeans" objects. Unknown keys are rejected so typos fail loudly.
nlohmann::json config_to_json(const TrainConfig& c);
// Fields absent from j keep their value in `base`.
TrainConfig config_from_json(const nlohmann::json& j, TrainConfig base = {});
TrainConfig load_config(const std::string& path, TrainConfig base = {});

nlohmann::json metrics_to_json(const LoopMetrics& m);
nlohmann::json summary_to_json(const TrainSummary& s);

}  // namespace can
