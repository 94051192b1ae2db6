#include "doseins_tools/run_config.hpp"

#include <fstream>

namespace doseins {

bool is_random_label(const std::string& label) {
  return label == "random" || label == "random-monotone" || label == "random-unimodal";
}

EfficacyShape random_label_shape(const std::string& label) {
  return label == "random-unimodal" ? EfficacyShape::kUnimodal : EfficacyShape::kMonotone;
}

namespace {

template <typename T, typename Parse>
std::vector<T> parse_list(const json& j, const char* key, Parse parse) {
  const auto& a = j.at(key);
  if (!a.is_array()) throw ConfigError(std::string(key) + ": expected an array");
  std::vector<T> out;
  for (const auto& x : a) out.push_back(parse(x));
  if (out.empty()) throw ConfigError(std::string(key) + ": must not be empty");
  return out;
}

std::string as_string(const json& x, const char* key) {
  if (!x.is_string()) throw ConfigError(std::string(key) + ": expected strings");
  return x.get<std::string>();
}

template <typename F>
auto named(const json& x, const char* key, F parse) {
  try {
    return parse(as_string(x, key));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string(key) + ": " + e.what());
  }
}

}  // namespace

RunConfig parse_run_config(const json& j) {
  require_keys(j,
               {"seed", "replicates", "workers", "output_dir", "scenarios", "variants", "adaptive_modes", "c_values",
                "engine", "random", "audit"},
               "config");
  RunConfig cfg;
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) throw ConfigError("seed: expected a non-negative integer");
    cfg.seed = j.at("seed").get<std::uint64_t>();
  }
  auto positive_int = [&](const char* key, int& target, int min) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_number_integer() || j.at(key).get<long long>() < min) {
      throw ConfigError(std::string(key) + ": expected an integer >= " + std::to_string(min));
    }
    target = j.at(key).get<int>();
  };
  positive_int("replicates", cfg.replicates, 1);
  positive_int("workers", cfg.workers, 1);
  positive_int("audit", cfg.audit, 0);
  if (j.contains("output_dir")) cfg.output_dir = as_string(j.at("output_dir"), "output_dir");

  if (!j.contains("scenarios")) throw ConfigError("scenarios: required");
  cfg.scenarios = parse_list<std::string>(j, "scenarios", [](const json& x) {
    auto label = as_string(x, "scenarios");
    if (!is_random_label(label)) {
      try {
        (void)fixed_scenario(label);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("scenarios: ") + e.what());
      }
    }
    return label;
  });
  if (!j.contains("variants")) throw ConfigError("variants: required");
  cfg.variants =
      parse_list<Variant>(j, "variants", [](const json& x) { return named(x, "variants", parse_variant); });
  if (j.contains("adaptive_modes")) {
    cfg.adaptive_modes = parse_list<AdaptiveMode>(
        j, "adaptive_modes", [](const json& x) { return named(x, "adaptive_modes", parse_adaptive_mode); });
  }
  if (j.contains("c_values")) {
    cfg.c_values = parse_list<double>(j, "c_values", [](const json& x) {
      if (!x.is_number() || x.get<double>() < 0) throw ConfigError("c_values: expected numbers >= 0");
      return x.get<double>();
    });
  }
  if (j.contains("engine")) cfg.engine = j.at("engine");
  if (j.contains("random")) cfg.random = j.at("random");
  // Validate the nested sections now so errors surface before any work starts.
  (void)cfg.cells();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  return parse_run_config(j);
}

json RunConfig::echo() const {
  json modes = json::array();
  for (auto m : adaptive_modes) modes.push_back(to_string(m));
  json vars = json::array();
  for (auto v : variants) vars.push_back(to_string(v));
  return json{{"seed", seed},     {"replicates", replicates}, {"scenarios", scenarios}, {"variants", vars},
              {"adaptive_modes", modes}, {"c_values", c_values}, {"engine", engine}, {"random", random},
              {"audit", audit}};
}

std::vector<BatchSpec> RunConfig::cells() const {
  std::vector<BatchSpec> out;
  for (const auto& label : scenarios) {
    for (Variant v : variants) {
      std::vector<std::pair<AdaptiveMode, double>> arms;
      if (is_hybrid(v)) {
        for (auto m : adaptive_modes) {
          for (double c : c_values) arms.emplace_back(m, c);
        }
      } else {
        arms.emplace_back(AdaptiveMode::kNone, 1.0);
      }
      for (auto [m, c] : arms) {
        BatchSpec spec;
        spec.engine = engine_config_from_json(engine, v, m, c);
        if (is_random_label(label)) {
          spec.scenario = "random";
          spec.random = random_params_from_json(random, spec.engine.targets.phi1, random_label_shape(label));
        } else {
          spec.scenario = label;
        }
        spec.replicates = replicates;
        spec.master_seed = seed;
        spec.workers = workers;
        out.push_back(std::move(spec));
      }
    }
  }
  return out;
}

}  // namespace doseins
