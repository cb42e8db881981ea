#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "classifier.hpp"
#include "error.hpp"
#include "frame_io.hpp"
#include "synth_eval.hpp"

namespace gpground {

struct RunConfig {
  PipelineConfig pipeline;
  SceneSpec scene;
};

namespace config_detail {

using json = nlohmann::json;

[[noreturn]] inline void bad(std::string_view key, std::string_view why) {
  throw Error(ErrorKind::Config, "config key '" + std::string(key) + "': " + std::string(why));
}

inline double as_double(std::string_view key, const json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
    if (s == "nan" || s == "auto") return std::numeric_limits<double>::quiet_NaN();
    double d = 0.0;
    if (io_detail::parse_double(s, d)) return d;
  }
  bad(key, "expected a number");
}

inline std::uint64_t as_count(std::string_view key, const json& v) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d >= 0.0 && d == std::floor(d) && d < 1.8e19) return static_cast<std::uint64_t>(d);
  }
  bad(key, "expected a non-negative integer");
}

inline bool as_bool(std::string_view key, const json& v) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
  }
  bad(key, "expected true or false");
}

inline std::string fmt(double d) {
  if (std::isnan(d)) return "auto";
  if (std::isinf(d)) return d > 0 ? "inf" : "-inf";
  std::string s;
  io_detail::append_number(s, d);
  return s;
}

struct Entry {
  std::string key;
  std::string help;
  std::function<void(RunConfig&, const json&)> set;
  std::function<std::string(const RunConfig&)> show;
};

template <typename Get>
Entry real(std::string key, std::string help, Get get) {
  return {key, std::move(help),
          [key, get](RunConfig& c, const json& v) { get(c) = as_double(key, v); },
          [get](const RunConfig& c) { return fmt(get(const_cast<RunConfig&>(c))); }};
}

template <typename Get>
Entry count(std::string key, std::string help, Get get) {
  return {key, std::move(help),
          [key, get](RunConfig& c, const json& v) {
            using T = std::remove_reference_t<decltype(get(c))>;
            get(c) = static_cast<T>(as_count(key, v));
          },
          [get](const RunConfig& c) { return std::to_string(get(const_cast<RunConfig&>(c))); }};
}

template <typename Get>
Entry flag(std::string key, std::string help, Get get) {
  return {key, std::move(help), [key, get](RunConfig& c, const json& v) { get(c) = as_bool(key, v); },
          [get](const RunConfig& c) { return get(const_cast<RunConfig&>(c)) ? "true" : "false"; }};
}

template <typename Get>
Entry maybe(std::string key, std::string help, Get get) {
  return {key, std::move(help),
          [key, get](RunConfig& c, const json& v) {
            if (v.is_null() || (v.is_string() && v.get<std::string>() == "none"))
              get(c).reset();
            else
              get(c) = as_double(key, v);
          },
          [get](const RunConfig& c) {
            const auto& o = get(const_cast<RunConfig&>(c));
            return o ? fmt(*o) : std::string("none");
          }};
}

inline const std::vector<Entry>& registry() {
  static const std::vector<Entry> entries = [] {
    std::vector<Entry> e;
    e.push_back(count("grid.num_segments", "angular wedges M", [](RunConfig& c) -> auto& { return c.pipeline.grid.num_segments; }));
    e.push_back(count("grid.num_bins", "radial bins N per wedge", [](RunConfig& c) -> auto& { return c.pipeline.grid.num_bins; }));
    e.push_back(count("grid.vertical_slices", "vertical slices for the density statistic", [](RunConfig& c) -> auto& { return c.pipeline.grid.vertical_slices; }));
    e.push_back(maybe("grid.r_min", "inner clip radius for model fitting [m] or none", [](RunConfig& c) -> auto& { return c.pipeline.grid.r_min; }));
    e.push_back(maybe("grid.r_max", "outer clip radius for model fitting [m] or none", [](RunConfig& c) -> auto& { return c.pipeline.grid.r_max; }));
    e.push_back(real("lines.zeta_b", "steepest ground slope", [](RunConfig& c) -> auto& { return c.pipeline.thresholds.zeta_b; }));
    e.push_back(real("lines.delta", "max residual of a new candidate [m]", [](RunConfig& c) -> auto& { return c.pipeline.thresholds.delta; }));
    e.push_back(real("lines.zeta_m", "max radial gap [m]; 0 = 3 bin widths", [](RunConfig& c) -> auto& { return c.pipeline.thresholds.zeta_m; }));
    e.push_back(real("lines.rho_jump", "max density ratio of successive candidates", [](RunConfig& c) -> auto& { return c.pipeline.thresholds.rho_jump; }));
    e.push_back(count("lines.seed_size", "candidates in a run's initial fit", [](RunConfig& c) -> auto& { return c.pipeline.thresholds.seed_size; }));
    e.push_back(real("lines.lambda", "Deming error-variance ratio", [](RunConfig& c) -> auto& { return c.pipeline.lambda; }));
    e.push_back(real("gp.g_d", "slope below which length-scales stop growing", [](RunConfig& c) -> auto& { return c.pipeline.thresholds.g_d; }));
    e.push_back(real("gp.sigma_f", "initial signal std [m]", [](RunConfig& c) -> auto& { return c.pipeline.theta0.sigma_f; }));
    e.push_back(real("gp.a", "initial length-scale gain [m]", [](RunConfig& c) -> auto& { return c.pipeline.theta0.a; }));
    e.push_back(real("gp.sigma_n", "initial noise std [m]", [](RunConfig& c) -> auto& { return c.pipeline.theta0.sigma_n; }));
    e.push_back(flag("gp.demean", "subtract each wedge's mean height before fitting", [](RunConfig& c) -> auto& { return c.pipeline.gp.demean; }));
    e.push_back(flag("opt.enabled", "optimize hyperparameters per frame", [](RunConfig& c) -> auto& { return c.pipeline.optimize; }));
    e.push_back(count("opt.max_iters", "max accepted ascent steps", [](RunConfig& c) -> auto& { return c.pipeline.optimizer.max_iters; }));
    e.push_back(real("opt.tol", "gradient-norm and gain tolerance", [](RunConfig& c) -> auto& { return c.pipeline.optimizer.tol; }));
    e.push_back(real("opt.initial_step", "first step length in log units", [](RunConfig& c) -> auto& { return c.pipeline.optimizer.initial_step; }));
    e.push_back(real("opt.max_step", "largest step length in log units", [](RunConfig& c) -> auto& { return c.pipeline.optimizer.max_step; }));
    e.push_back(flag("opt.prior", "add a log-normal prior on theta", [](RunConfig& c) -> auto& { return c.pipeline.optimizer.prior.enabled; }));
    e.push_back(real("opt.prior_log_sd", "log-space std of the prior", [](RunConfig& c) -> auto& { return c.pipeline.optimizer.prior.log_sd; }));
    e.push_back(real("label.tau_abs", "absolute height band above the ground mean [m]", [](RunConfig& c) -> auto& { return c.pipeline.label.tau_abs; }));
    e.push_back(real("label.k_sigma", "predictive-std multiplier; 0 = mean only", [](RunConfig& c) -> auto& { return c.pipeline.label.k_sigma; }));
    e.push_back(real("label.tau_below", "accepted depth below the ground mean [m]; auto = 2 tau_abs", [](RunConfig& c) -> auto& { return c.pipeline.label.tau_below; }));
    e.push_back(count("run.threads", "worker threads", [](RunConfig& c) -> auto& { return c.pipeline.threads; }));

    e.push_back(Entry{"scene.kind",
                      "flat | sloped | ramp_then_flat | flat_with_boxes | sloped_with_boxes | flat_then_wall",
                      [](RunConfig& c, const json& v) {
                        if (!v.is_string()) bad("scene.kind", "expected a string");
                        try {
                          c.scene.kind = parse_scene_kind(v.get<std::string>());
                        } catch (const Error& err) {
                          bad("scene.kind", err.what());
                        }
                      },
                      [](const RunConfig& c) { return std::string(to_string(c.scene.kind)); }});
    e.push_back(real("scene.grade", "terrain grade (rise/run)", [](RunConfig& c) -> auto& { return c.scene.grade; }));
    e.push_back(real("scene.extent", "outermost ring radius [m]", [](RunConfig& c) -> auto& { return c.scene.extent; }));
    e.push_back(count("scene.point_count", "points per frame", [](RunConfig& c) -> auto& { return c.scene.point_count; }));
    e.push_back(real("scene.noise", "vertical ground noise std [m]", [](RunConfig& c) -> auto& { return c.scene.noise; }));
    e.push_back(count("scene.rng_seed", "generator seed", [](RunConfig& c) -> auto& { return c.scene.rng_seed; }));
    e.push_back(count("scene.num_rings", "scan rings", [](RunConfig& c) -> auto& { return c.scene.num_rings; }));
    e.push_back(real("scene.inner_radius", "innermost ring radius [m]", [](RunConfig& c) -> auto& { return c.scene.inner_radius; }));
    e.push_back(count("scene.box_count", "boxes in *_with_boxes scenes", [](RunConfig& c) -> auto& { return c.scene.box_count; }));
    e.push_back(real("scene.box_fraction", "share of points on obstacles", [](RunConfig& c) -> auto& { return c.scene.box_fraction; }));
    e.push_back(real("scene.box_min_height", "lowest box [m]", [](RunConfig& c) -> auto& { return c.scene.box_min_height; }));
    e.push_back(real("scene.box_max_height", "tallest box [m]", [](RunConfig& c) -> auto& { return c.scene.box_max_height; }));
    e.push_back(real("scene.junction_radius", "ramp end or wall radius [m]", [](RunConfig& c) -> auto& { return c.scene.junction_radius; }));
    e.push_back(real("scene.wall_height", "wall height in flat_then_wall [m]", [](RunConfig& c) -> auto& { return c.scene.wall_height; }));
    return e;
  }();
  return entries;
}

inline const Entry* find(std::string_view key) {
  for (const auto& e : registry())
    if (e.key == key) return &e;
  return nullptr;
}

inline void flatten(const json& j, const std::string& prefix, std::vector<std::pair<std::string, json>>& out) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it)
      flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
  } else {
    out.emplace_back(prefix, j);
  }
}

}  // namespace config_detail

/// Applies one dotted key. Unknown keys and ill-typed values are Config errors.
inline void apply_setting(RunConfig& cfg, std::string_view key, const nlohmann::json& value) {
  const auto* e = config_detail::find(key);
  if (!e) throw Error(ErrorKind::Config, "unknown config key '" + std::string(key) + "'");
  e->set(cfg, value);
}

/// `key=value` override; the value is read as JSON when it parses, else as a string.
inline void apply_override(RunConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw Error(ErrorKind::Config, "override '" + std::string(assignment) + "' is not key=value");
  const std::string key(io_detail::trim(assignment.substr(0, eq)));
  const std::string raw(io_detail::trim(assignment.substr(eq + 1)));
  auto value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  apply_setting(cfg, key, value);
}

/// Merges a JSON document (nested objects or flat dotted keys) into `cfg`.
/// `bare_prefix` is prepended to keys without a dot, so scene files may
/// write "kind" for "scene.kind".
inline void merge_json(RunConfig& cfg, const nlohmann::json& doc, std::string_view bare_prefix = {}) {
  if (!doc.is_object()) throw Error(ErrorKind::Config, "config document must be a JSON object");
  std::vector<std::pair<std::string, nlohmann::json>> flat;
  config_detail::flatten(doc, "", flat);
  for (auto& [key, value] : flat) {
    std::string k = key;
    if (!bare_prefix.empty() && k.find('.') == std::string::npos) k = std::string(bare_prefix) + "." + k;
    apply_setting(cfg, k, value);
  }
}

inline RunConfig load_config(const std::string& path, std::string_view bare_prefix = {}) {
  const auto text = io_detail::read_all(path);
  auto doc = nlohmann::json::parse(text.begin(), text.end(), nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorKind::Config, path + ": not valid JSON");
  RunConfig cfg;
  try {
    merge_json(cfg, doc, bare_prefix);
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, path + ": " + e.what());
  }
  return cfg;
}

inline std::string describe_config(const RunConfig& cfg = {}) {
  std::ostringstream os;
  std::size_t width = 0;
  for (const auto& e : config_detail::registry()) width = std::max(width, e.key.size());
  for (const auto& e : config_detail::registry()) {
    const auto value = e.show(cfg);
    os << "  " << e.key << std::string(width - e.key.size() + 2, ' ') << "= " << value
       << std::string(value.size() < 8 ? 8 - value.size() : 1, ' ') << e.help << '\n';
  }
  return os.str();
}

}  // namespace gpground
