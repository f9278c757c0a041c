#include "can/config.hpp"

#include "can/error.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace can {

using nlohmann::json;

namespace {

json optional_number(const std::optional<double>& v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return *v;
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw Error("config: " + where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!known.contains(k)) throw Error("config: unknown key '" + k + "' in " + where);
  }
}

}  // namespace

json config_to_json(const TrainConfig& c) {
  return json{{"method", to_string(c.method)},
              {"beta", c.beta},
              {"d0", c.d0},
              {"n0", c.n0},
              {"k_steps", c.k_steps},
              {"loops", c.loops},
              {"warmup_steps", c.warmup_steps},
              {"plan",
               {{"classes_per_batch", c.plan.classes_per_batch},
                {"per_class_source", c.plan.per_class_source},
                {"per_class_target", c.plan.per_class_target},
                {"ce_batch_size", c.plan.ce_batch_size}}},
              {"eta0", c.eta0},
              {"lr_a", c.lr_a},
              {"lr_b", c.lr_b},
              {"momentum", c.momentum},
              {"weight_decay", c.weight_decay},
              {"logits_lr_multiplier", c.logits_lr_multiplier},
              {"hidden", c.hidden},
              {"bottleneck", c.bottleneck},
              {"kmeans", {{"max_iters", c.kmeans.max_iters}, {"tol", c.kmeans.tol}}},
              {"output_tap", to_string(c.output_tap)},
              {"center_features", c.center_features},
              {"probe_per_class", c.probe_per_class},
              {"seed", c.seed}};
}

TrainConfig config_from_json(const json& j, TrainConfig c) {
  reject_unknown(j,
                 {"method", "beta", "d0", "n0", "k_steps", "loops", "warmup_steps", "plan", "eta0", "lr_a", "lr_b",
                  "momentum", "weight_decay", "logits_lr_multiplier", "hidden", "bottleneck", "kmeans", "output_tap", "center_features", "probe_per_class", "seed"},
                 "config");
  if (j.contains("method")) {
    std::string m;
    read(j, "method", m);
    c.method = parse_method(m);
  }
  read(j, "beta", c.beta);
  read(j, "d0", c.d0);
  read(j, "n0", c.n0);
  read(j, "k_steps", c.k_steps);
  read(j, "loops", c.loops);
  read(j, "warmup_steps", c.warmup_steps);
  if (j.contains("plan")) {
    const json& p = j.at("plan");
    reject_unknown(p, {"classes_per_batch", "per_class_source", "per_class_target", "ce_batch_size"}, "plan");
    read(p, "classes_per_batch", c.plan.classes_per_batch);
    read(p, "per_class_source", c.plan.per_class_source);
    read(p, "per_class_target", c.plan.per_class_target);
    read(p, "ce_batch_size", c.plan.ce_batch_size);
  }
  read(j, "eta0", c.eta0);
  read(j, "lr_a", c.lr_a);
  read(j, "lr_b", c.lr_b);
  read(j, "momentum", c.momentum);
  read(j, "weight_decay", c.weight_decay);
  read(j, "logits_lr_multiplier", c.logits_lr_multiplier);
  read(j, "hidden", c.hidden);
  read(j, "bottleneck", c.bottleneck);
  if (j.contains("kmeans")) {
    const json& k = j.at("kmeans");
    reject_unknown(k, {"max_iters", "tol"}, "kmeans");
    read(k, "max_iters", c.kmeans.max_iters);
    read(k, "tol", c.kmeans.tol);
  }
  if (j.contains("output_tap")) c.output_tap = parse_output_tap(j.at("output_tap").get<std::string>());
  read(j, "center_features", c.center_features);
  read(j, "probe_per_class", c.probe_per_class);
  read(j, "seed", c.seed);
  c.validate();
  return c;
}

TrainConfig load_config(const std::string& path, TrainConfig base) {
  std::ifstream f(path);
  if (!f) throw Error("cannot read config " + path);
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw Error("config " + path + ": " + e.what());
  }
  // A run manifest carries its resolved config under "config".
  if (j.is_object() && j.contains("config") && j.contains("tool")) j = j.at("config");
  return config_from_json(j, std::move(base));
}

json metrics_to_json(const LoopMetrics& m) {
  return json{{"loop", m.loop},
              {"step", m.step},
              {"ce_loss", m.ce_loss},
              {"cdd", optional_number(m.cdd)},
              {"cdd_g", optional_number(m.cdd_g)},
              {"target_accuracy", optional_number(m.target_accuracy)},
              {"target_mean_class_accuracy", optional_number(m.target_mean_class_accuracy)},
              {"cluster_accuracy", optional_number(m.cluster_accuracy)},
              {"kept_samples", m.kept_samples},
              {"kept_classes", m.kept_classes},
              {"num_kept_classes", m.kept_classes.size()},
              {"zero_norm_samples", m.zero_norm_samples},
              {"learning_rate", m.learning_rate},
              {"warnings", m.warnings}};
}

json summary_to_json(const TrainSummary& s) {
  json j{{"method", to_string(s.method)},
         {"loops", s.loops},
         {"steps", s.steps},
         {"source_accuracy", s.source.accuracy},
         {"first_cdd_g", optional_number(s.first_cdd_g)},
         {"final_cdd_g", optional_number(s.final_cdd_g)}};
  if (s.target) {
    j["target_accuracy"] = s.target->accuracy;
    j["target_mean_class_accuracy"] = s.target->mean_class_accuracy;
    json per = json::array();
    for (double v : s.target->per_class) per.push_back(optional_number(v));
    j["target_per_class_accuracy"] = per;
  } else {
    j["target_accuracy"] = nullptr;
    j["target_mean_class_accuracy"] = nullptr;
    j["target_per_class_accuracy"] = nullptr;
  }
  return j;
}

}  // namespace can
