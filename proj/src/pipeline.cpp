#include "defrad/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>

#include "defrad/errors.hpp"
#include "defrad/io.hpp"
#include "defrad/ply.hpp"

namespace defrad::pipeline {

namespace {

constexpr std::size_t kAreaNeighbors = 6;
// Window membership is fixed on the first cloud; samples may drift this far
// relative to their window centre over a sequence [m].
constexpr double kWindowMargin = 0.005;

// Raised-cosine weights falling to 0 at the cloud's x-y bounding box, so the
// truncated patch edge does not diffract like a physical edge.
std::vector<double> edge_taper(std::span<const Point3> points, double width) {
  std::vector<double> w(points.size(), 1.0);
  if (width <= 0.0 || points.empty()) return w;
  Eigen::Vector2d lo = points.front().head<2>(), hi = lo;
  for (const auto& p : points) {
    lo = lo.cwiseMin(p.head<2>());
    hi = hi.cwiseMax(p.head<2>());
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Eigen::Vector2d q = points[i].head<2>();
    const double d = std::min((q - lo).minCoeff(), (hi - q).minCoeff());
    if (d < width) w[i] = 0.5 * (1.0 - std::cos(std::numbers::pi * d / width));
  }
  return w;
}

template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const PipelineError&) {
    throw;
  } catch (const std::exception& e) {
    throw PipelineError(name, e.what());
  }
}

std::string element_tag(std::size_t e) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "e%02zu", e);
  return buf;
}

nlohmann::json pixel_json(const dsp::PeakPixel& p) {
  return {{"range_m", p.range},
          {"theta_deg", p.theta * 180.0 / std::numbers::pi},
          {"range_index", p.range_index},
          {"theta_index", p.theta_index}};
}

}  // namespace

RadarSetup make_radar_setup(const config::PipelineConfig& cfg) {
  const auto& a = cfg.radar.array;
  RadarSetup s;
  s.array = radar::build_virtual_array(a.n_tx, a.tx_pitch, a.n_rx, a.rx_pitch, a.origin, a.axis);
  s.consts = em::EmConstants::at(cfg.radar.chirp.center_frequency());
  s.wavelength = cfg.radar.chirp.wavelength();
  s.d0 = dsp::beam_spacing(s.array, dsp::parse_spacing_mode(cfg.dsp.spacing));
  s.theta_grid = dsp::make_theta_grid(cfg.dsp.n_theta,
                                      cfg.dsp.theta_half_width_deg * std::numbers::pi / 180.0);
  Point3 c = Point3::Zero();
  for (const auto& e : s.array.elements) c += e.phase_center;
  s.viewpoint = c / static_cast<double>(s.array.size());
  return s;
}

RegisteredSequence register_sequence(const PointCloudFrame& template_cloud,
                                     std::span<const PointCloudFrame> frames,
                                     const cpd::CpdParams& params,
                                     std::size_t cpd_points, std::uint64_t seed) {
  const std::size_t m = std::min(cpd_points, template_cloud.size());
  PointCloudFrame sub = subsample(template_cloud, m, seed);
  sub.normals.reset();
  const cpd::Matrix G = cpd::build_kernel(sub, params.beta);
  const cpd::Matrix Gx = cpd::build_cross_kernel(template_cloud.points, sub.points, params.beta);

  RegisteredSequence out;
  out.clouds.reserve(frames.size());
  std::optional<cpd::WarmStart> warm;
  for (const auto& frame : frames) {
    auto field = cpd::register_nonrigid(frame, sub, params, warm, &G);
    PointCloudFrame dense;
    dense.timestamp = frame.timestamp;
    dense.points = cpd::deform_points(template_cloud.points, Gx, field.weights);
    out.clouds.push_back(std::move(dense));
    out.stats.iterations.push_back(field.iterations_run);
    out.stats.sigma2.push_back(field.sigma2);
    out.stats.converged.push_back(field.converged ? 1 : 0);
    out.stats.final_nll.push_back(field.neg_log_likelihood_trace.back());
    warm = cpd::WarmStart{field.weights, field.sigma2};
  }
  return out;
}

MapStack scattering_maps(std::span<const PointCloudFrame> clouds,
                         const RadarSetup& setup, const config::PipelineConfig& cfg) {
  MapStack maps(setup.array.size(), std::vector<std::vector<double>>(clouds.size()));
  if (clouds.empty()) return maps;
  // Topology is fixed by the template indexing, so neighbour tables are
  // built once on the first cloud.
  const auto normal_table = build_neighbor_table(clouds.front().points, cfg.processing.normal_k);
  const auto area_table = build_neighbor_table(clouds.front().points, kAreaNeighbors);
  const auto centres = em::spaced_subset(clouds.front().points, cfg.em.map_spacing);
  auto windows = em::build_eye_windows(clouds.front().points, cfg.em.a0, centres,
                                       kWindowMargin);
  const auto taper = edge_taper(clouds.front().points, cfg.em.edge_taper);
  const auto& arr = setup.array;

  for (std::size_t f = 0; f < clouds.size(); ++f) {
    SurfaceSampling s;
    s.cloud.points = clouds[f].points;
    s.cloud.timestamp = clouds[f].timestamp;
    s.cloud.normals = normals_from_table(s.cloud.points, normal_table, setup.viewpoint);
    s.area_weights = area_weights_from_table(s.cloud.points, area_table);
    for (std::size_t i = 0; i < taper.size(); ++i) s.area_weights[i] *= taper[i];
    if (f > 0) em::reweight_eye_windows(windows, s.cloud.points, centres);
    for (std::size_t tx = 0; tx < arr.tx_positions.size(); ++tx) {
      em::DipoleSource src{arr.tx_positions[tx], cfg.em.dipole_axis, cfg.em.moment};
      const auto currents = em::induce_currents(s, src, setup.consts, cfg.em.shadowing);
      for (std::size_t e = 0; e < arr.size(); ++e) {
        if (arr.elements[e].tx_index != tx) continue;
        const auto contrib = em::point_contributions(
            currents, setup.consts, arr.rx_positions[arr.elements[e].rx_index]);
        const auto mags = em::windowed_magnitudes(contrib, windows);
        // Points that are not window centres keep magnitude 0.
        maps[e][f].assign(s.cloud.points.size(), 0.0);
        for (std::size_t i = 0; i < centres.size(); ++i) maps[e][f][centres[i]] = mags[i];
      }
    }
  }
  return maps;
}

std::vector<radar::ScatterCenter> time_resolved_centers(
    std::span<const PointCloudFrame> clouds, const MapStack& maps,
    const RadarSetup& setup, const config::PipelineConfig& cfg) {
  std::vector<std::vector<double>> all;
  for (const auto& per_element : maps)
    for (const auto& m : per_element) all.push_back(m);
  const auto index_set = radar::select_index_set(all, cfg.radar.theta_thresh);

  const double dt = 1.0 / cfg.scene.frame_rate;
  const radar::cplx eta = std::polar(1.0, cfg.radar.eta_phase);
  std::vector<radar::ScatterCenter> centers;
  centers.reserve(index_set.size());
  for (auto k : index_set) {
    radar::ScatterCenter c;
    c.index = k;
    c.t0 = clouds.front().timestamp;
    c.dt = dt;
    c.eta = eta;
    c.range.assign(setup.array.size(), std::vector<double>(clouds.size()));
    c.amplitude.assign(setup.array.size(), std::vector<double>(clouds.size()));
    for (std::size_t e = 0; e < setup.array.size(); ++e) {
      const Point3& pc = setup.array.elements[e].phase_center;
      for (std::size_t f = 0; f < clouds.size(); ++f) {
        c.range[e][f] = (clouds[f].points[k] - pc).norm();
        c.amplitude[e][f] = maps[e][f][k];
      }
    }
    centers.push_back(std::move(c));
  }
  return centers;
}

ConventionalModel conventional_centers(std::span<const PointCloudFrame> frames,
                                       const RadarSetup& setup,
                                       const config::PipelineConfig& cfg) {
  ConventionalModel cm;
  cm.averaged = time_average_frames(frames);
  auto sampling = make_surface_sampling(cm.averaged, cfg.processing.normal_k, setup.viewpoint);
  const auto taper = edge_taper(sampling.cloud.points, cfg.em.edge_taper);
  for (std::size_t i = 0; i < taper.size(); ++i) sampling.area_weights[i] *= taper[i];
  const auto& arr = setup.array;
  const auto windows = em::build_eye_windows(sampling.cloud.points, cfg.em.a0);

  cm.maps.resize(arr.size());
  std::vector<char> chosen(sampling.size(), 0);
  for (std::size_t tx = 0; tx < arr.tx_positions.size(); ++tx) {
    em::DipoleSource src{arr.tx_positions[tx], cfg.em.dipole_axis, cfg.em.moment};
    const auto currents = em::induce_currents(sampling, src, setup.consts, cfg.em.shadowing);
    for (std::size_t e = 0; e < arr.size(); ++e) {
      if (arr.elements[e].tx_index != tx) continue;
      const Point3& rx = arr.rx_positions[arr.elements[e].rx_index];
      auto& map = cm.maps[e];
      map.observation_point = rx;
      map.eye_radius = cfg.em.a0;
      map.magnitudes = em::windowed_magnitudes(
          em::point_contributions(currents, setup.consts, rx), windows);
      for (auto k : radar::select_centers_conventional(map, sampling.cloud.points,
                                                        cfg.radar.theta_scat))
        chosen[k] = 1;
    }
  }
  for (std::size_t k = 0; k < chosen.size(); ++k)
    if (chosen[k]) cm.centers.push_back(k);

  const radar::cplx eta = std::polar(1.0, cfg.radar.eta_phase);
  cm.scatter_centers.resize(cm.centers.size());
  for (std::size_t c = 0; c < cm.centers.size(); ++c) {
    auto& sc = cm.scatter_centers[c];
    sc.index = cm.centers[c];
    sc.t0 = frames.front().timestamp;
    sc.dt = 1.0 / cfg.scene.frame_rate;
    sc.eta = eta;
    sc.range.resize(arr.size());
    sc.amplitude.resize(arr.size());
  }
  for (std::size_t e = 0; e < arr.size(); ++e) {
    const auto tracked = radar::track_centers_conventional(
        frames, cm.averaged.points, cm.centers, arr.elements[e].phase_center);
    for (std::size_t c = 0; c < cm.centers.size(); ++c) {
      cm.scatter_centers[c].range[e] = tracked.range[c];
      cm.scatter_centers[c].amplitude[e] = {cm.maps[e].magnitudes[cm.centers[c]]};
    }
  }
  return cm;
}

std::vector<double> slow_grid_for(const scene::Scene& scene,
                                  const config::PipelineConfig& cfg) {
  double t_end = scene.truth.times.back();
  if (cfg.t_obs > 0.0) t_end = std::min(t_end, cfg.t_obs);
  return radar::make_slow_grid(scene.truth.times.front(), t_end, cfg.radar.chirp.slow_rate);
}

dsp::RangeProfileOptions profile_options(const config::PipelineConfig& cfg) {
  dsp::RangeProfileOptions o;
  o.window = dsp::parse_window(cfg.dsp.window);
  o.zero_pad = cfg.dsp.zero_pad;
  o.r_min = cfg.dsp.range_min;
  o.r_max = cfg.dsp.range_max;
  return o;
}

DspResult process_cube(const radar::IFCube& cube, const RadarSetup& setup,
                       const config::PipelineConfig& cfg) {
  const auto prof = dsp::range_profile(cube, profile_options(cfg));
  DspResult r;
  r.range_axis = prof.range_axis;
  r.power = dsp::time_averaged_power(prof, setup.d0, setup.theta_grid, setup.wavelength);
  r.pixel = dsp::select_peak_pixel(r.power, prof.range_axis, setup.theta_grid);
  const auto series =
      dsp::pixel_series(prof, setup.d0, r.pixel.range_index, r.pixel.theta, setup.wavelength);
  r.raw = dsp::displacement(series, setup.wavelength, cube.slow_rate,
                            cube.slow_axis.empty() ? 0.0 : cube.slow_axis.front());
  return r;
}

PipelineResult run_pipeline(const config::PipelineConfig& cfg,
                            const std::filesystem::path& out_dir) {
  stage("config", [&] { cfg.validate(); return 0; });
  const bool write = !out_dir.empty();
  if (write) {
    std::filesystem::create_directories(out_dir);
    io::write_json(out_dir / "config.json", config::to_json(cfg));
  }
  const bool want_proposed = cfg.mode != config::Mode::conventional;
  const bool want_conventional = cfg.mode != config::Mode::proposed;

  const auto sc = stage("scene", [&] {
    auto s = scene::gen_frames(cfg.scene);
    if (write) scene::save_scene(s, out_dir / "scene");
    return s;
  });
  const RadarSetup setup = stage("setup", [&] { return make_radar_setup(cfg); });
  const auto grid = stage("setup", [&] { return slow_grid_for(sc, cfg); });
  const std::size_t n_el = setup.array.size();

  PipelineResult result;
  nlohmann::json report;
  report["seed"] = cfg.scene.seed;
  report["mode"] = config::to_string(cfg.mode);
  report["n_frames"] = sc.frames.size();
  report["n_slow"] = grid.size();
  report["ground_truth"] = "reference radar synthesised on the noiseless deforming surface";

  auto finish_cube = [&](const char* name, const radar::IFCube& cube) {
    return stage("dsp", [&] {
      if (write && cfg.processing.write_cubes)
        io::write_ifcube(out_dir / (std::string("if_") + name + ".bin"), cube);
      auto r = process_cube(cube, setup, cfg);
      if (write) {
        io::write_range_angle_csv(out_dir / (std::string("range_angle_") + name + ".csv"),
                                  r.power, r.range_axis, setup.theta_grid);
        io::write_waveform_csv(out_dir / (std::string("waveform_") + name + "_raw.csv"), r.raw);
      }
      return r;
    });
  };

  // Reference: the time-resolved model evaluated on the true surfaces.
  std::optional<radar::IFCube> cube_ref;
  std::size_t n_ref_centers = 0;
  stage("reference", [&] {
    const auto maps = scattering_maps(sc.truth.per_frame_truth, setup, cfg);
    const auto centers = time_resolved_centers(sc.truth.per_frame_truth, maps, setup, cfg);
    n_ref_centers = centers.size();
    cube_ref = radar::synth_if_proposed(centers, cfg.radar.chirp, grid, n_el);
    return 0;
  });
  result.reference = finish_cube("reference", *cube_ref);
  cube_ref.reset();

  std::optional<radar::IFCube> cube_prop, cube_conv;
  nlohmann::json prop_info, conv_info;
  if (want_proposed) {
    stage("proposed", [&] {
      auto reg = register_sequence(sc.template_cloud, sc.frames, cfg.cpd,
                                   cfg.processing.cpd_points, cfg.scene.seed);
      if (write) {
        std::vector<double> idx, it, s2, conv;
        for (std::size_t f = 0; f < reg.clouds.size(); ++f) {
          idx.push_back(static_cast<double>(f));
          it.push_back(reg.stats.iterations[f]);
          s2.push_back(reg.stats.sigma2[f]);
          conv.push_back(reg.stats.converged[f]);
        }
        const std::string header[] = {"frame", "iterations", "sigma2_m2", "converged", "final_nll"};
        const std::vector<double> cols[] = {idx, it, s2, conv, reg.stats.final_nll};
        io::write_columns_csv(out_dir / "cpd_trace.csv", header, cols);
      }
      const auto maps = scattering_maps(reg.clouds, setup, cfg);
      if (write) {
        const std::size_t nf = cfg.processing.write_maps ? reg.clouds.size() : 1;
        for (std::size_t e = 0; e < n_el; ++e)
          for (std::size_t f = 0; f < nf; ++f) {
            em::ScatteringMap m{setup.array.rx_positions[setup.array.elements[e].rx_index],
                                maps[e][f], cfg.em.a0};
            char name[64];
            std::snprintf(name, sizeof name, "maps/proposed_%s_f%04zu.csv",
                          element_tag(e).c_str(), f);
            io::write_scattering_map_csv(out_dir / name, m, reg.clouds[f].points);
          }
      }
      const auto centers = time_resolved_centers(reg.clouds, maps, setup, cfg);
      prop_info["n_centers"] = centers.size();
      double it_sum = 0.0;
      std::size_t n_conv = 0;
      for (std::size_t f = 0; f < reg.clouds.size(); ++f) {
        it_sum += reg.stats.iterations[f];
        n_conv += reg.stats.converged[f] ? 1 : 0;
      }
      prop_info["cpd_mean_iterations"] = it_sum / static_cast<double>(reg.clouds.size());
      prop_info["cpd_converged_frames"] = n_conv;
      cube_prop = radar::synth_if_proposed(centers, cfg.radar.chirp, grid, n_el);
      return 0;
    });
    result.proposed = finish_cube("proposed", *cube_prop);
  }
  if (want_conventional) {
    stage("conventional", [&] {
      const auto cm = conventional_centers(sc.frames, setup, cfg);
      if (write) {
        save_ply(cm.averaged, out_dir / "averaged_cloud.ply");
        for (std::size_t e = 0; e < n_el; ++e)
          io::write_scattering_map_csv(
              out_dir / ("maps/conventional_" + element_tag(e) + ".csv"), cm.maps[e],
              cm.averaged.points);
      }
      conv_info["n_centers"] = cm.centers.size();
      cube_conv = radar::synth_if_conventional(cm.scatter_centers, cfg.radar.chirp, grid, n_el);
      return 0;
    });
    result.conventional = finish_cube("conventional", *cube_conv);
  }

  stage("metrics", [&] {
    const double record = static_cast<double>(grid.size()) / cfg.radar.chirp.slow_rate;
    const double resp_rate = cfg.scene.bumps.empty() ? 0.0 : cfg.scene.bumps.front().rate;
    if (!(resp_rate > 0.0) || record * resp_rate < 2.0)
      throw Error("record of " + std::to_string(record) +
                  " s covers fewer than 2 respiration cycles");
    const double rate = cfg.radar.chirp.slow_rate;
    const double sw = cfg.dsp.smooth_window_s, dw = cfg.dsp.detrend_window_s;
    const double lag = cfg.dsp.max_lag_s;

    const auto& ref_raw = result.reference.raw;
    const auto ref_smooth = dsp::smooth_detrend(ref_raw, sw, dw);

    // Site truth as radial motion: outward (toward the sensor) shortens range.
    dsp::DisplacementWaveform truth;
    truth.rate = rate;
    truth.t0 = grid.front();
    truth.values = radar::resample_cubic(sc.truth.times.front(),
                                         1.0 / cfg.scene.frame_rate,
                                         sc.truth.site_displacement.front(), grid);
    double mean = 0.0;
    for (double& v : truth.values) mean += (v = -v);
    mean /= static_cast<double>(truth.values.size());
    for (double& v : truth.values) v -= mean;
    const auto truth_smooth = dsp::smooth_detrend(truth, sw, dw);
    if (write) {
      io::write_waveform_csv(out_dir / "truth_radial.csv", truth);
      io::write_waveform_csv(out_dir / "waveform_reference_smoothed.csv", ref_smooth);
    }
    report["reference"] = {{"n_centers", n_ref_centers},
                           {"peak_pixel", pixel_json(result.reference.pixel)},
                           {"vs_site_truth",
                            {{"no_smoothing", metrics::to_json(metrics::compare(
                                                  ref_raw.values, truth.values, rate, lag, false))},
                             {"smoothed", metrics::to_json(metrics::compare(
                                              ref_smooth.values, truth_smooth.values, rate, lag, true))}}}};

    auto evaluate = [&](const char* name, const DspResult& r, nlohmann::json info) {
      const auto smooth = dsp::smooth_detrend(r.raw, sw, dw);
      if (write)
        io::write_waveform_csv(out_dir / (std::string("waveform_") + name + "_smoothed.csv"), smooth);
      info["peak_pixel"] = pixel_json(r.pixel);
      info["vs_reference"] = {
          {"no_smoothing", metrics::to_json(metrics::compare(r.raw.values, ref_raw.values, rate, lag, false))},
          {"smoothed", metrics::to_json(metrics::compare(smooth.values, ref_smooth.values, rate, lag, true))}};
      info["vs_site_truth"] = {
          {"no_smoothing", metrics::to_json(metrics::compare(r.raw.values, truth.values, rate, lag, false))},
          {"smoothed", metrics::to_json(metrics::compare(smooth.values, truth_smooth.values, rate, lag, true))}};
      report[name] = info;
    };
    if (result.proposed) evaluate("proposed", *result.proposed, prop_info);
    if (result.conventional) evaluate("conventional", *result.conventional, conv_info);
    if (cube_prop && cube_conv) {
      const auto iq = metrics::iq_magnitude_compare(*cube_prop, *cube_conv, result.proposed->pixel,
                                                    profile_options(cfg), setup.d0,
                                                    setup.wavelength, lag);
      report["iq_magnitude_proposed_vs_conventional"] = metrics::to_json(iq, 1.0);
    }
    return 0;
  });

  result.report = report;
  if (write) io::write_json(out_dir / "report.json", report);
  return result;
}

}  // namespace defrad::pipeline
