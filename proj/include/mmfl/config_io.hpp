#ifndef MMFL_CONFIG_IO_HPP
#define MMFL_CONFIG_IO_HPP

#include <algorithm>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mmfl/config.hpp"

namespace mmfl {

namespace detail {

// A per-group list may be written as a single number, broadcast over groups.
template <class T>
std::vector<T> per_group(const nlohmann::json& j, std::size_t n, const char* key) {
  if (j.is_number()) return std::vector<T>(n, j.get<T>());
  if (!j.is_array()) throw ConfigError(std::string("config key '") + key + "' must be a number or array");
  return j.get<std::vector<T>>();
}

inline int pilot_length(const nlohmann::json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "K_total") return 0;
    throw ConfigError("pilot length must be an integer or \"K_total\"");
  }
  return j.get<int>();
}

}  // namespace detail

/// Reads a config from JSON. Absent keys keep their defaults; unknown keys are
/// rejected so typos do not silently fall back to defaults.
inline SystemConfig config_from_json(const nlohmann::json& j) {
  static const std::vector<std::string> known{
      "M",     "N",       "K_n",   "B",     "tau_c",  "tau_dp", "tau_up",          "p_d",
      "p_u",   "p_p",     "N0",    "N0_dbm", "S_d_n", "S_u_n",  "D_n",             "c_nk",
      "L",     "alpha",   "f_max", "t_qos", "area_D", "pathloss_PL0_db", "pathloss_exponent",
      "shadowing_std_db", "min_distance_km", "$schema", "description"};
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError("unknown config key '" + key + "'");

  SystemConfig c;
  try {
    if (j.contains("N")) c.N = j.at("N").get<int>();
    if (c.N < 1) throw ConfigError("N must be >= 1");
    const auto n = static_cast<std::size_t>(c.N);
    c.K_n = j.contains("K_n") ? detail::per_group<int>(j.at("K_n"), n, "K_n") : std::vector<int>(n, c.K_n.at(0));
    auto group_list = [&](const char* key, const std::vector<double>& def) {
      return j.contains(key) ? detail::per_group<double>(j.at(key), n, key) : std::vector<double>(n, def.at(0));
    };
    c.S_d_n = group_list("S_d_n", c.S_d_n);
    c.S_u_n = group_list("S_u_n", c.S_u_n);
    c.D_n = group_list("D_n", c.D_n);
    double c_default = c.c_nk.at(0).at(0);
    c.c_nk.clear();
    if (j.contains("c_nk") && j.at("c_nk").is_array()) {
      c.c_nk = j.at("c_nk").get<std::vector<std::vector<double>>>();
    } else {
      if (j.contains("c_nk")) c_default = j.at("c_nk").get<double>();
      for (std::size_t g = 0; g < n && g < c.K_n.size(); ++g)
        c.c_nk.emplace_back(static_cast<std::size_t>(std::max(c.K_n[g], 0)), c_default);
    }
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("M", c.M);
    get("B", c.B);
    get("tau_c", c.tau_c);
    if (j.contains("tau_dp")) c.tau_dp = detail::pilot_length(j.at("tau_dp"));
    if (j.contains("tau_up")) c.tau_up = detail::pilot_length(j.at("tau_up"));
    get("p_d", c.p_d);
    get("p_u", c.p_u);
    get("p_p", c.p_p);
    get("N0", c.N0);
    if (j.contains("N0_dbm")) c.N0 = dbm_to_watt(j.at("N0_dbm").get<double>());
    get("L", c.L);
    get("alpha", c.alpha);
    get("f_max", c.f_max);
    get("t_qos", c.t_qos);
    get("area_D", c.area_D);
    get("pathloss_PL0_db", c.pathloss_PL0_db);
    get("pathloss_exponent", c.pathloss_exponent);
    get("shadowing_std_db", c.shadowing_std_db);
    get("min_distance_km", c.min_distance_km);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  validate(c);
  return c;
}

inline nlohmann::json config_to_json(const SystemConfig& c) {
  nlohmann::json j;
  j["M"] = c.M;
  j["N"] = c.N;
  j["K_n"] = c.K_n;
  j["B"] = c.B;
  j["tau_c"] = c.tau_c;
  j["tau_dp"] = c.tau_dp;
  j["tau_up"] = c.tau_up;
  j["p_d"] = c.p_d;
  j["p_u"] = c.p_u;
  j["p_p"] = c.p_p;
  j["N0"] = c.N0;
  j["S_d_n"] = c.S_d_n;
  j["S_u_n"] = c.S_u_n;
  j["D_n"] = c.D_n;
  j["c_nk"] = c.c_nk;
  j["L"] = c.L;
  j["alpha"] = c.alpha;
  j["f_max"] = c.f_max;
  j["t_qos"] = c.t_qos;
  j["area_D"] = c.area_D;
  j["pathloss_PL0_db"] = c.pathloss_PL0_db;
  j["pathloss_exponent"] = c.pathloss_exponent;
  j["shadowing_std_db"] = c.shadowing_std_db;
  j["min_distance_km"] = c.min_distance_km;
  return j;
}

inline SystemConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse '" + path + "': " + e.what());
  }
  return config_from_json(j);
}

}  // namespace mmfl

#endif  // MMFL_CONFIG_IO_HPP
