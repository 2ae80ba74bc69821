#pragma once

#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "qmill/collision.hpp"
#include "qmill/model.hpp"
#include "qmill/thermo.hpp"

namespace qmill {

using Json = nlohmann::json;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void reject_unknown(const Json& j, const std::set<std::string>& known, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key()))
      throw ConfigError("config: unknown key \"" + it.key() + "\" in " + where);
  }
}

template <typename T>
void read_if(const Json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

}  // namespace detail

/// Evolve-command settings (also drives the converge command's evolution).
struct EvolveConfig {
  double t_end = 100.0;
  int emit_points = 200;
  bool log_grid = false;
  std::string method = "auto";  // auto | explicit | implicit
  std::string initial_state = "product-gibbs";  // or "rotor-ground"
};

struct ErgotropyConfig {
  std::string two_qubit_hamiltonian = "free";  // free | interacting
};

struct Config {
  Params params;
  EvolveConfig evolve;
  CollisionConfig collision;
  ErgotropyConfig ergotropy;
};

inline Params params_from_json(const Json& j) {
  detail::reject_unknown(j,
                         {"B1", "B2", "lambda", "inertia", "g", "chi", "beta1", "beta2", "beta_r",
                          "gamma", "l_min", "l_max", "omega_cutoff", "eigencluster_tol",
                          "steady_tol", "ode_tol"},
                         "params");
  Params p;
  detail::read_if(j, "B1", p.B1);
  detail::read_if(j, "B2", p.B2);
  detail::read_if(j, "lambda", p.lambda);
  detail::read_if(j, "inertia", p.inertia);
  detail::read_if(j, "g", p.g);
  detail::read_if(j, "chi", p.chi);
  detail::read_if(j, "beta1", p.beta1);
  detail::read_if(j, "beta2", p.beta2);
  detail::read_if(j, "beta_r", p.beta_r);
  detail::read_if(j, "gamma", p.gamma);
  detail::read_if(j, "l_min", p.l_min);
  detail::read_if(j, "l_max", p.l_max);
  detail::read_if(j, "eigencluster_tol", p.eigencluster_tol);
  detail::read_if(j, "steady_tol", p.steady_tol);
  detail::read_if(j, "ode_tol", p.ode_tol);
  if (j.contains("omega_cutoff")) {
    const Json& c = j.at("omega_cutoff");
    detail::reject_unknown(c, {"mode", "value"}, "params.omega_cutoff");
    const std::string mode = c.at("mode").get<std::string>();
    if (mode == "auto-max") {
      p.omega_cutoff_mode = CutoffMode::AutoMax;
    } else if (mode == "fixed") {
      p.omega_cutoff_mode = CutoffMode::Fixed;
      p.omega_cutoff_value = c.at("value").get<double>();
    } else {
      throw ConfigError("config: omega_cutoff.mode must be \"auto-max\" or \"fixed\"");
    }
  }
  p.validate();
  return p;
}

inline Json params_to_json(const Params& p) {
  Json j{{"B1", p.B1},
         {"B2", p.B2},
         {"lambda", p.lambda},
         {"inertia", p.inertia},
         {"g", p.g},
         {"chi", p.chi},
         {"beta1", p.beta1},
         {"beta2", p.beta2},
         {"beta_r", p.beta_r},
         {"gamma", p.gamma},
         {"l_min", p.l_min},
         {"l_max", p.l_max},
         {"eigencluster_tol", p.eigencluster_tol},
         {"steady_tol", p.steady_tol},
         {"ode_tol", p.ode_tol}};
  if (p.omega_cutoff_mode == CutoffMode::Fixed) {
    j["omega_cutoff"] = {{"mode", "fixed"}, {"value", p.omega_cutoff_value}};
  } else {
    j["omega_cutoff"] = {{"mode", "auto-max"}};
  }
  return j;
}

inline Config config_from_json(const Json& j) {
  detail::reject_unknown(j, {"params", "evolve", "collision", "ergotropy", "gme"}, "config root");
  Config c;
  if (!j.contains("params")) throw ConfigError("config: missing \"params\" block");
  c.params = params_from_json(j.at("params"));
  if (j.contains("evolve")) {
    const Json& e = j.at("evolve");
    detail::reject_unknown(e, {"t_end", "emit_points", "log_grid", "method", "initial_state"},
                           "evolve");
    detail::read_if(e, "t_end", c.evolve.t_end);
    detail::read_if(e, "emit_points", c.evolve.emit_points);
    detail::read_if(e, "log_grid", c.evolve.log_grid);
    detail::read_if(e, "method", c.evolve.method);
    detail::read_if(e, "initial_state", c.evolve.initial_state);
    if (c.evolve.method != "auto" && c.evolve.method != "explicit" && c.evolve.method != "implicit")
      throw ConfigError("config: evolve.method must be auto|explicit|implicit");
  }
  if (j.contains("collision")) {
    const Json& k = j.at("collision");
    detail::reject_unknown(
        k, {"tau", "n_fock1", "n_fock2", "steps", "expm_tol", "tail_target", "pair_cutoff"},
        "collision");
    detail::read_if(k, "tau", c.collision.tau);
    detail::read_if(k, "n_fock1", c.collision.n_fock1);
    detail::read_if(k, "n_fock2", c.collision.n_fock2);
    detail::read_if(k, "steps", c.collision.steps);
    detail::read_if(k, "expm_tol", c.collision.expm_tol);
    detail::read_if(k, "tail_target", c.collision.tail_target);
    detail::read_if(k, "pair_cutoff", c.collision.pair_cutoff);
  }
  if (j.contains("ergotropy")) {
    const Json& e = j.at("ergotropy");
    detail::reject_unknown(e, {"two_qubit_hamiltonian"}, "ergotropy");
    detail::read_if(e, "two_qubit_hamiltonian", c.ergotropy.two_qubit_hamiltonian);
    if (c.ergotropy.two_qubit_hamiltonian != "free" &&
        c.ergotropy.two_qubit_hamiltonian != "interacting")
      throw ConfigError("config: ergotropy.two_qubit_hamiltonian must be free|interacting");
  }
  if (j.contains("gme")) {
    const Json& g = j.at("gme");
    detail::reject_unknown(g, {"drop_zero_frequency"}, "gme");
    detail::read_if(g, "drop_zero_frequency", c.params.gme_drop_zero_freq);
  }
  return c;
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::parse_error& e) {
    throw ConfigError("config: JSON parse error in " + path + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace qmill
