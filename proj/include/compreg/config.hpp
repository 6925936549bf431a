// Experiment configuration: a flat `section.key = value` text format with '#'
// comments. Serialisation writes every key in a fixed order, so
// serialize(parse(serialize(c))) == serialize(c).
#pragma once

#include "compreg/algorithms.hpp"
#include "compreg/losses.hpp"
#include "compreg/topology.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace compreg {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class EtaScheme { fixed, theorem, theorem_network };

inline std::string to_string(EtaScheme s) {
  switch (s) {
    case EtaScheme::fixed: return "fixed";
    case EtaScheme::theorem: return "theorem";
    case EtaScheme::theorem_network: return "theorem_network";
  }
  return "fixed";
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct ExperimentConfig {
  std::string mode = "online";  // online | dsgd
  Algorithm algorithm = Algorithm::ocgd;

  std::string topology = "ring";  // complete | ring | star | path | file:<path>
  std::size_t agents = 4;
  std::string mixing = "metropolis";  // metropolis | uniform

  SequenceParams loss;  // horizon and n_agents are filled from run / topology
  double domain_lower = -1.0;
  double domain_upper = 1.0;

  std::size_t horizon = 1000;
  std::vector<std::size_t> k_sweep;
  std::uint64_t seed = 1;
  std::size_t ensemble = 1;
  bool vary_losses = false;  // ensemble member e uses loss seed loss.seed + e
  std::string output = "out";
  bool start_at_minimizer = false;
  bool dump_centers = false;

  std::string schedule = "constant";  // constant | inverse_k | inverse_sqrt_k | theorem name
  double alpha = 0.1;
  std::string G = "auto";    // auto (analytic stacked bound) or a number
  std::string P_K = "auto";  // auto (grid oracle) or a number

  std::size_t oracle_grid_points = 0;  // 0 sizes the grid from the horizon
  double oracle_eta = 0.1;
  EtaScheme eta_scheme = EtaScheme::fixed;
  double oracle_c = 1.0;
  std::size_t oracle_audit_calls = 100;

  std::size_t comparator_grid_points = 10001;
  std::string comparator_method = "automatic";

  std::size_t dsgd_samples = 10;
  double dsgd_spread = 0.5;

  void validate() const;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
  }
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
    throw ConfigError("key '" + key + "': expected a nonnegative integer, got '" + v + "'");
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': integer out of range");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError("key '" + key + "': expected true or false, got '" + v + "'");
}

inline std::vector<std::size_t> parse_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  if (v.empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_uint(key, trim(item)));
  return out;
}

inline std::string join(const std::vector<std::size_t>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + std::to_string(xs[i]);
  return s;
}

struct Field {
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

inline const std::vector<Field>& fields() {
  using C = ExperimentConfig;
  using S = std::string;
  static const std::vector<Field> f = {
      {"experiment.mode", [](const C& c) { return c.mode; },
       [](C& c, const S& v) {
         if (v != "online" && v != "dsgd") throw ConfigError("experiment.mode must be online or dsgd");
         c.mode = v;
       }},
      {"experiment.algorithm", [](const C& c) { return to_string(c.algorithm); },
       [](C& c, const S& v) { c.algorithm = algorithm_from_string(v); }},
      {"topology.kind", [](const C& c) { return c.topology; }, [](C& c, const S& v) { c.topology = v; }},
      {"topology.agents", [](const C& c) { return std::to_string(c.agents); },
       [](C& c, const S& v) { c.agents = parse_uint("topology.agents", v); }},
      {"topology.mixing", [](const C& c) { return c.mixing; },
       [](C& c, const S& v) {
         if (v != "metropolis" && v != "uniform") throw ConfigError("topology.mixing must be metropolis or uniform");
         c.mixing = v;
       }},
      {"loss.family", [](const C& c) { return to_string(c.loss.family); },
       [](C& c, const S& v) { c.loss.family = loss_family_from_string(v); }},
      {"loss.drift", [](const C& c) { return to_string(c.loss.drift); },
       [](C& c, const S& v) { c.loss.drift = drift_kind_from_string(v); }},
      {"loss.heterogeneity", [](const C& c) { return format_double(c.loss.heterogeneity); },
       [](C& c, const S& v) { c.loss.heterogeneity = parse_double("loss.heterogeneity", v); }},
      {"loss.seed", [](const C& c) { return std::to_string(c.loss.seed); },
       [](C& c, const S& v) { c.loss.seed = parse_uint("loss.seed", v); }},
      {"loss.dimension", [](const C& c) { return std::to_string(c.loss.dimension); },
       [](C& c, const S& v) { c.loss.dimension = static_cast<int>(parse_uint("loss.dimension", v)); }},
      {"loss.center_offset", [](const C& c) { return format_double(c.loss.center_offset); },
       [](C& c, const S& v) { c.loss.center_offset = parse_double("loss.center_offset", v); }},
      {"loss.drift_amplitude", [](const C& c) { return format_double(c.loss.drift_amplitude); },
       [](C& c, const S& v) { c.loss.drift_amplitude = parse_double("loss.drift_amplitude", v); }},
      {"loss.drift_shift", [](const C& c) { return format_double(c.loss.drift_shift); },
       [](C& c, const S& v) { c.loss.drift_shift = parse_double("loss.drift_shift", v); }},
      {"loss.drift_exponent", [](const C& c) { return format_double(c.loss.drift_exponent); },
       [](C& c, const S& v) { c.loss.drift_exponent = parse_double("loss.drift_exponent", v); }},
      {"loss.balanced_phases", [](const C& c) { return S(c.loss.balanced_phases ? "true" : "false"); },
       [](C& c, const S& v) { c.loss.balanced_phases = parse_bool("loss.balanced_phases", v); }},
      {"loss.curvature", [](const C& c) { return format_double(c.loss.curvature); },
       [](C& c, const S& v) { c.loss.curvature = parse_double("loss.curvature", v); }},
      {"loss.amplitude", [](const C& c) { return format_double(c.loss.amplitude); },
       [](C& c, const S& v) { c.loss.amplitude = parse_double("loss.amplitude", v); }},
      {"loss.frequency", [](const C& c) { return format_double(c.loss.frequency); },
       [](C& c, const S& v) { c.loss.frequency = parse_double("loss.frequency", v); }},
      {"loss.steepness", [](const C& c) { return format_double(c.loss.steepness); },
       [](C& c, const S& v) { c.loss.steepness = parse_double("loss.steepness", v); }},
      {"loss.knee", [](const C& c) { return format_double(c.loss.knee); },
       [](C& c, const S& v) { c.loss.knee = parse_double("loss.knee", v); }},
      {"domain.lower", [](const C& c) { return format_double(c.domain_lower); },
       [](C& c, const S& v) { c.domain_lower = parse_double("domain.lower", v); }},
      {"domain.upper", [](const C& c) { return format_double(c.domain_upper); },
       [](C& c, const S& v) { c.domain_upper = parse_double("domain.upper", v); }},
      {"run.horizon", [](const C& c) { return std::to_string(c.horizon); },
       [](C& c, const S& v) { c.horizon = parse_uint("run.horizon", v); }},
      {"run.k_sweep", [](const C& c) { return join(c.k_sweep); },
       [](C& c, const S& v) { c.k_sweep = parse_list("run.k_sweep", v); }},
      {"run.seed", [](const C& c) { return std::to_string(c.seed); },
       [](C& c, const S& v) { c.seed = parse_uint("run.seed", v); }},
      {"run.ensemble", [](const C& c) { return std::to_string(c.ensemble); },
       [](C& c, const S& v) { c.ensemble = parse_uint("run.ensemble", v); }},
      {"run.vary_losses", [](const C& c) { return S(c.vary_losses ? "true" : "false"); },
       [](C& c, const S& v) { c.vary_losses = parse_bool("run.vary_losses", v); }},
      {"run.start_at_minimizer", [](const C& c) { return S(c.start_at_minimizer ? "true" : "false"); },
       [](C& c, const S& v) { c.start_at_minimizer = parse_bool("run.start_at_minimizer", v); }},
      {"run.dump_centers", [](const C& c) { return S(c.dump_centers ? "true" : "false"); },
       [](C& c, const S& v) { c.dump_centers = parse_bool("run.dump_centers", v); }},
      {"run.output", [](const C& c) { return c.output; }, [](C& c, const S& v) { c.output = v; }},
      {"step.schedule", [](const C& c) { return c.schedule; }, [](C& c, const S& v) { c.schedule = v; }},
      {"step.alpha", [](const C& c) { return format_double(c.alpha); },
       [](C& c, const S& v) { c.alpha = parse_double("step.alpha", v); }},
      {"step.G", [](const C& c) { return c.G; },
       [](C& c, const S& v) {
         if (v != "auto") parse_double("step.G", v);
         c.G = v;
       }},
      {"step.P_K", [](const C& c) { return c.P_K; },
       [](C& c, const S& v) {
         if (v != "auto") parse_double("step.P_K", v);
         c.P_K = v;
       }},
      {"oracle.grid_points", [](const C& c) { return std::to_string(c.oracle_grid_points); },
       [](C& c, const S& v) { c.oracle_grid_points = parse_uint("oracle.grid_points", v); }},
      {"oracle.eta", [](const C& c) { return format_double(c.oracle_eta); },
       [](C& c, const S& v) { c.oracle_eta = parse_double("oracle.eta", v); }},
      {"oracle.eta_scheme", [](const C& c) { return to_string(c.eta_scheme); },
       [](C& c, const S& v) {
         if (v == "fixed") c.eta_scheme = EtaScheme::fixed;
         else if (v == "theorem") c.eta_scheme = EtaScheme::theorem;
         else if (v == "theorem_network") c.eta_scheme = EtaScheme::theorem_network;
         else throw ConfigError("oracle.eta_scheme must be fixed, theorem or theorem_network");
       }},
      {"oracle.c", [](const C& c) { return format_double(c.oracle_c); },
       [](C& c, const S& v) { c.oracle_c = parse_double("oracle.c", v); }},
      {"oracle.audit_calls", [](const C& c) { return std::to_string(c.oracle_audit_calls); },
       [](C& c, const S& v) { c.oracle_audit_calls = parse_uint("oracle.audit_calls", v); }},
      {"comparator.grid_points", [](const C& c) { return std::to_string(c.comparator_grid_points); },
       [](C& c, const S& v) { c.comparator_grid_points = parse_uint("comparator.grid_points", v); }},
      {"comparator.method", [](const C& c) { return c.comparator_method; },
       [](C& c, const S& v) {
         if (v != "automatic" && v != "grid" && v != "bisection")
           throw ConfigError("comparator.method must be automatic, grid or bisection");
         c.comparator_method = v;
       }},
      {"dsgd.samples_per_agent", [](const C& c) { return std::to_string(c.dsgd_samples); },
       [](C& c, const S& v) { c.dsgd_samples = parse_uint("dsgd.samples_per_agent", v); }},
      {"dsgd.spread", [](const C& c) { return format_double(c.dsgd_spread); },
       [](C& c, const S& v) { c.dsgd_spread = parse_double("dsgd.spread", v); }},
  };
  return f;
}

}  // namespace detail

inline void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& value) {
  for (const auto& f : detail::fields())
    if (f.key == key) {
      f.set(c, value);
      return;
    }
  throw ConfigError("unknown key '" + key + "'");
}

inline ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig c;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    try {
      set_config_value(c, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    } catch (const std::exception& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return c;
}

inline ExperimentConfig parse_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  return parse_config(in);
}

inline std::string serialize_config(const ExperimentConfig& c) {
  std::string out;
  for (const auto& f : detail::fields()) out += f.key + " = " + f.get(c) + "\n";
  return out;
}

inline bool is_theorem_schedule(const std::string& name) {
  try {
    theorem_schedule_from_string(name);
    return true;
  } catch (const AlgorithmError&) {
    return false;
  }
}

inline void ExperimentConfig::validate() const {
  if (agents < 1) throw ConfigError("topology.agents must be at least 1");
  if (horizon < 1) throw ConfigError("run.horizon must be at least 1");
  if (ensemble < 1) throw ConfigError("run.ensemble must be at least 1");
  if (loss.dimension < 1 || loss.dimension > 2) throw ConfigError("loss.dimension must be 1 or 2");
  if (!(domain_lower <= 0.0 && domain_upper >= 0.0 && domain_lower < domain_upper))
    throw ConfigError("domain must be an interval containing the origin");
  if (algorithm == Algorithm::congd && loss.family == LossFamily::sine_quadratic)
    throw ConfigError("congd requires a convex or pseudo-convex loss family");
  if (algorithm == Algorithm::dinoco && loss.dimension != 1) throw ConfigError("dinoco requires loss.dimension = 1");
  if (algorithm == Algorithm::dinoco && eta_scheme == EtaScheme::fixed && !(oracle_eta > 0.0))
    throw ConfigError("oracle.eta must be positive");
  if (algorithm != Algorithm::dinoco) {
    if (schedule == "constant" || schedule == "inverse_k" || schedule == "inverse_sqrt_k") {
      if (!(alpha > 0.0)) throw ConfigError("step.alpha must be positive");
    } else if (is_theorem_schedule(schedule)) {
      const auto t = theorem_schedule_from_string(schedule);
      if (t == TheoremSchedule::congd_dynamic && algorithm != Algorithm::congd)
        throw ConfigError("schedule congd_dynamic requires algorithm congd");
      if (t != TheoremSchedule::congd_dynamic && algorithm != Algorithm::ocgd)
        throw ConfigError("schedule " + schedule + " requires algorithm ocgd");
      if (t == TheoremSchedule::ocgd_strongly_convex && loss.family != LossFamily::quadratic)
        throw ConfigError("schedule ocgd_strongly_convex requires the quadratic family");
    } else {
      throw ConfigError("unknown schedule '" + schedule + "'");
    }
  }
  if (mode == "dsgd") {
    if (algorithm != Algorithm::ocgd) throw ConfigError("dsgd mode runs ocgd");
    if (loss.family != LossFamily::quadratic) throw ConfigError("dsgd mode requires the quadratic family");
    if (dsgd_samples < 1) throw ConfigError("dsgd.samples_per_agent must be at least 1");
  }
  if (topology.rfind("file:", 0) != 0) {
    try {
      graph_kind_from_string(topology);
    } catch (const TopologyError& e) {
      throw ConfigError(e.what());
    }
  }
}

}  // namespace compreg
