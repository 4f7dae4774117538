#include "defrad/config.hpp"

#include <cmath>

#include "defrad/errors.hpp"
#include "defrad/io.hpp"

namespace defrad::config {

using nlohmann::json;

namespace {

json vec(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Eigen::Vector3d vec(const json& j, const char* name) {
  if (!j.is_array() || j.size() != 3)
    throw InvalidArgument(std::string(name) + " must be a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

void merge_checked(json& base, const json& patch, const std::string& path) {
  if (!patch.is_object()) throw InvalidArgument("config '" + path + "' must be an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) throw InvalidArgument("unknown config key '" + key + "'");
    json& slot = base[it.key()];
    if (slot.is_object() && it.value().is_object())
      merge_checked(slot, it.value(), key);
    else
      slot = it.value();
  }
}

json bump_json(const scene::Bump& b) {
  return {{"center_x", b.center_x}, {"center_y", b.center_y}, {"width", b.width},
          {"amplitude", b.amplitude}, {"rate", b.rate},       {"phase", b.phase}};
}

scene::Bump bump_from(const json& patch) {
  json j = bump_json(scene::Bump{});
  merge_checked(j, patch, "scene.bumps[]");
  scene::Bump b;
  b.center_x = j.at("center_x").get<double>();
  b.center_y = j.at("center_y").get<double>();
  b.width = j.at("width").get<double>();
  b.amplitude = j.at("amplitude").get<double>();
  b.rate = j.at("rate").get<double>();
  b.phase = j.at("phase").get<double>();
  return b;
}

template <class T>
T get(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace

Mode parse_mode(const std::string& s) {
  if (s == "conventional") return Mode::conventional;
  if (s == "proposed") return Mode::proposed;
  if (s == "both") return Mode::both;
  throw InvalidArgument("unknown mode '" + s + "' (conventional|proposed|both)");
}

std::string to_string(Mode m) {
  switch (m) {
    case Mode::conventional: return "conventional";
    case Mode::proposed: return "proposed";
    default: return "both";
  }
}

void PipelineConfig::validate() const {
  scene.validate();
  cpd.validate();
  radar.chirp.validate();
  if (!(em.a0 > 0.0)) throw InvalidArgument("em.a0 must be > 0");
  if (!(em.map_spacing >= 0.0)) throw InvalidArgument("em.map_spacing must be >= 0");
  if (!(em.edge_taper >= 0.0)) throw InvalidArgument("em.edge_taper must be >= 0");
  if (std::abs(em.dipole_axis.norm() - 1.0) > 1e-9)
    throw InvalidArgument("em.dipole_axis must be a unit vector");
  if (!(radar.theta_scat > 0.0 && radar.theta_scat <= 1.0))
    throw InvalidArgument("radar.theta_scat must lie in (0, 1]");
  if (!(radar.theta_thresh > 0.0 && radar.theta_thresh <= 1.0))
    throw InvalidArgument("radar.theta_thresh must lie in (0, 1]");
  if (std::abs(radar.array.axis.norm() - 1.0) > 1e-9)
    throw InvalidArgument("radar.array.axis must be a unit vector");
  dsp::parse_window(dsp.window);
  dsp::parse_spacing_mode(dsp.spacing);
  if (dsp.zero_pad < 1 || dsp.n_theta < 1) throw InvalidArgument("dsp grid sizes must be >= 1");
  if (!(dsp.range_max > dsp.range_min)) throw InvalidArgument("dsp range window is empty");
  if (!(dsp.theta_half_width_deg >= 0.0 && dsp.theta_half_width_deg < 90.0))
    throw InvalidArgument("dsp.theta_half_width_deg must lie in [0, 90)");
  if (processing.cpd_points < 1 || processing.normal_k < 3)
    throw InvalidArgument("processing.cpd_points >= 1 and processing.normal_k >= 3 required");
  if (!(t_obs >= 0.0)) throw InvalidArgument("t_obs must be >= 0");
}

json to_json(const scene::SceneConfig& c) {
  json bumps = json::array();
  for (const auto& b : c.bumps) bumps.push_back(bump_json(b));
  return {{"semi_x", c.semi_x},
          {"semi_y", c.semi_y},
          {"semi_z", c.semi_z},
          {"apex_z", c.apex_z},
          {"half_x", c.half_x},
          {"half_y", c.half_y},
          {"bumps", bumps},
          {"template_density", c.template_density},
          {"camera_density", c.camera_density},
          {"template_jitter", c.template_jitter},
          {"camera_noise_sigma", c.camera_noise_sigma},
          {"duration_s", c.duration_s},
          {"frame_rate", c.frame_rate},
          {"seed", c.seed}};
}

scene::SceneConfig scene_from_json(const json& patch) {
  json j = to_json(scene::SceneConfig{});
  merge_checked(j, patch, "scene");
  scene::SceneConfig c;
  c.semi_x = get<double>(j, "semi_x");
  c.semi_y = get<double>(j, "semi_y");
  c.semi_z = get<double>(j, "semi_z");
  c.apex_z = get<double>(j, "apex_z");
  c.half_x = get<double>(j, "half_x");
  c.half_y = get<double>(j, "half_y");
  c.bumps.clear();
  if (!j.at("bumps").is_array()) throw InvalidArgument("scene.bumps must be an array");
  for (const auto& b : j.at("bumps")) c.bumps.push_back(bump_from(b));
  c.template_density = get<double>(j, "template_density");
  c.camera_density = get<double>(j, "camera_density");
  c.template_jitter = get<double>(j, "template_jitter");
  c.camera_noise_sigma = get<double>(j, "camera_noise_sigma");
  c.duration_s = get<double>(j, "duration_s");
  c.frame_rate = get<double>(j, "frame_rate");
  c.seed = get<std::uint64_t>(j, "seed");
  return c;
}

json to_json(const PipelineConfig& c) {
  const auto& ch = c.radar.chirp;
  const auto& ar = c.radar.array;
  return {
      {"scene", to_json(c.scene)},
      {"cpd",
       {{"beta", c.cpd.beta},
        {"lambda_reg", c.cpd.lambda_reg},
        {"outlier_w", c.cpd.outlier_w},
        {"max_iters", c.cpd.max_iters},
        {"tol", c.cpd.tol},
        {"sigma2_floor", c.cpd.sigma2_floor}}},
      {"em",
       {{"a0", c.em.a0},
        {"map_spacing", c.em.map_spacing},
        {"edge_taper", c.em.edge_taper},
        {"shadowing", c.em.shadowing},
        {"moment", c.em.moment},
        {"dipole_axis", vec(c.em.dipole_axis)}}},
      {"radar",
       {{"chirp",
         {{"f_min", ch.f_min},
          {"bandwidth", ch.bandwidth},
          {"chirp_duration", ch.chirp_duration},
          {"n_fast", ch.n_fast},
          {"fs_fast", ch.fs_fast},
          {"slow_rate", ch.slow_rate}}},
        {"array",
         {{"n_tx", ar.n_tx},
          {"tx_pitch", ar.tx_pitch},
          {"n_rx", ar.n_rx},
          {"rx_pitch", ar.rx_pitch},
          {"origin", vec(ar.origin)},
          {"axis", vec(ar.axis)}}},
        {"theta_scat", c.radar.theta_scat},
        {"theta_thresh", c.radar.theta_thresh},
        {"eta_phase", c.radar.eta_phase}}},
      {"dsp",
       {{"window", c.dsp.window},
        {"zero_pad", c.dsp.zero_pad},
        {"n_theta", c.dsp.n_theta},
        {"theta_half_width_deg", c.dsp.theta_half_width_deg},
        {"range_min", c.dsp.range_min},
        {"range_max", c.dsp.range_max},
        {"smooth_window_s", c.dsp.smooth_window_s},
        {"detrend_window_s", c.dsp.detrend_window_s},
        {"spacing", c.dsp.spacing},
        {"max_lag_s", c.dsp.max_lag_s}}},
      {"processing",
       {{"cpd_points", c.processing.cpd_points},
        {"normal_k", c.processing.normal_k},
        {"write_cubes", c.processing.write_cubes},
        {"write_maps", c.processing.write_maps}}},
      {"mode", to_string(c.mode)},
      {"t_obs", c.t_obs}};
}

PipelineConfig from_json(const json& patch) {
  PipelineConfig c;
  json j = to_json(c);
  merge_checked(j, patch, "");
  // The scene section merges again inside scene_from_json so that partial
  // bump entries pick up defaults.
  c.scene = scene_from_json(patch.contains("scene") ? patch.at("scene") : json::object());

  const json& p = j.at("cpd");
  c.cpd.beta = get<double>(p, "beta");
  c.cpd.lambda_reg = get<double>(p, "lambda_reg");
  c.cpd.outlier_w = get<double>(p, "outlier_w");
  c.cpd.max_iters = get<int>(p, "max_iters");
  c.cpd.tol = get<double>(p, "tol");
  c.cpd.sigma2_floor = get<double>(p, "sigma2_floor");

  const json& e = j.at("em");
  c.em.a0 = get<double>(e, "a0");
  c.em.map_spacing = get<double>(e, "map_spacing");
  c.em.edge_taper = get<double>(e, "edge_taper");
  c.em.shadowing = get<bool>(e, "shadowing");
  c.em.moment = get<double>(e, "moment");
  c.em.dipole_axis = vec(e.at("dipole_axis"), "em.dipole_axis");

  const json& r = j.at("radar");
  const json& ch = r.at("chirp");
  c.radar.chirp.f_min = get<double>(ch, "f_min");
  c.radar.chirp.bandwidth = get<double>(ch, "bandwidth");
  c.radar.chirp.chirp_duration = get<double>(ch, "chirp_duration");
  c.radar.chirp.n_fast = get<std::size_t>(ch, "n_fast");
  c.radar.chirp.fs_fast = get<double>(ch, "fs_fast");
  c.radar.chirp.slow_rate = get<double>(ch, "slow_rate");
  const json& ar = r.at("array");
  c.radar.array.n_tx = get<std::size_t>(ar, "n_tx");
  c.radar.array.tx_pitch = get<double>(ar, "tx_pitch");
  c.radar.array.n_rx = get<std::size_t>(ar, "n_rx");
  c.radar.array.rx_pitch = get<double>(ar, "rx_pitch");
  c.radar.array.origin = vec(ar.at("origin"), "radar.array.origin");
  c.radar.array.axis = vec(ar.at("axis"), "radar.array.axis");
  c.radar.theta_scat = get<double>(r, "theta_scat");
  c.radar.theta_thresh = get<double>(r, "theta_thresh");
  c.radar.eta_phase = get<double>(r, "eta_phase");

  const json& d = j.at("dsp");
  c.dsp.window = get<std::string>(d, "window");
  c.dsp.zero_pad = get<std::size_t>(d, "zero_pad");
  c.dsp.n_theta = get<std::size_t>(d, "n_theta");
  c.dsp.theta_half_width_deg = get<double>(d, "theta_half_width_deg");
  c.dsp.range_min = get<double>(d, "range_min");
  c.dsp.range_max = get<double>(d, "range_max");
  c.dsp.smooth_window_s = get<double>(d, "smooth_window_s");
  c.dsp.detrend_window_s = get<double>(d, "detrend_window_s");
  c.dsp.spacing = get<std::string>(d, "spacing");
  c.dsp.max_lag_s = get<double>(d, "max_lag_s");

  const json& pr = j.at("processing");
  c.processing.cpd_points = get<std::size_t>(pr, "cpd_points");
  c.processing.normal_k = get<std::size_t>(pr, "normal_k");
  c.processing.write_cubes = get<bool>(pr, "write_cubes");
  c.processing.write_maps = get<bool>(pr, "write_maps");

  c.mode = parse_mode(get<std::string>(j, "mode"));
  c.t_obs = get<double>(j, "t_obs");
  c.validate();
  return c;
}

PipelineConfig load(const std::filesystem::path& path) {
  return from_json(io::read_json(path));
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw InvalidArgument("override must look like path.to.key=value");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const auto dot = path.find('.', start);
    const std::string seg = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (seg.empty()) throw InvalidArgument("empty segment in override path '" + path + "'");
    json* next = nullptr;
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(seg);
      } catch (const std::exception&) {
        throw InvalidArgument("override path '" + path + "': '" + seg + "' is not an index");
      }
      if (idx > node->size()) throw InvalidArgument("override index out of range in '" + path + "'");
      if (idx == node->size()) node->push_back(json::object());
      next = &(*node)[idx];
    } else {
      if (node->is_null()) *node = json::object();
      if (!node->is_object()) throw InvalidArgument("override path '" + path + "' descends into a value");
      next = &(*node)[seg];
    }
    node = next;
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = value;
}

}  // namespace defrad::config
