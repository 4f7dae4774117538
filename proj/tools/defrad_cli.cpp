#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "defrad/config.hpp"
#include "defrad/errors.hpp"
#include "defrad/io.hpp"
#include "defrad/metrics.hpp"
#include "defrad/pipeline.hpp"
#include "defrad/ply.hpp"

namespace fs = std::filesystem;
using namespace defrad;

namespace {

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* app, CommonOpts& o) {
  app->add_option("-c,--config", o.config_path, "JSON configuration file")->check(CLI::ExistingFile);
  app->add_option("-s,--set", o.overrides, "override, e.g. --set dsp.spacing=pitch");
  app->add_option("--seed", o.seed, "scene seed");
}

config::PipelineConfig resolve(const CommonOpts& o) {
  nlohmann::json doc = o.config_path.empty() ? nlohmann::json::object() : io::read_json(o.config_path);
  for (const auto& s : o.overrides) config::apply_override(doc, s);
  if (o.seed) config::apply_override(doc, "scene.seed=" + std::to_string(*o.seed));
  return config::from_json(doc);
}

// Scene from a saved directory, or freshly generated from the configuration.
scene::Scene scene_for(const std::string& dir, const config::PipelineConfig& cfg) {
  return dir.empty() ? scene::gen_frames(cfg.scene) : scene::load_scene(dir);
}

void write_cpd_trace(const fs::path& path, const pipeline::RegistrationStats& st) {
  std::vector<double> idx, it, s2, conv;
  for (std::size_t f = 0; f < st.iterations.size(); ++f) {
    idx.push_back(static_cast<double>(f));
    it.push_back(st.iterations[f]);
    s2.push_back(st.sigma2[f]);
    conv.push_back(st.converged[f]);
  }
  const std::string header[] = {"frame", "iterations", "sigma2_m2", "converged", "final_nll"};
  const std::vector<double> cols[] = {idx, it, s2, conv, st.final_nll};
  io::write_columns_csv(path, header, cols);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"defrad: deformation-aware FMCW radar simulation"};
  app.require_subcommand(1);

  CommonOpts scene_o, reg_o, scat_o, synth_o, dsp_o, metr_o, pipe_o;
  std::string out, scene_dir, cloud_path, cube_path, recovered_path, truth_path, mode;

  auto* sc = app.add_subcommand("scene", "generate a synthetic scene");
  add_common(sc, scene_o);
  sc->add_option("-o,--out", out, "output directory")->required();

  auto* rg = app.add_subcommand("register", "CPD-register the template onto every frame");
  add_common(rg, reg_o);
  rg->add_option("--scene", scene_dir, "scene directory (default: generate)");
  rg->add_option("-o,--out", out, "output directory")->required();

  auto* st = app.add_subcommand("scatter", "per-element scattering maps of one cloud");
  add_common(st, scat_o);
  st->add_option("--cloud", cloud_path, "PLY point cloud")->required()->check(CLI::ExistingFile);
  st->add_option("-o,--out", out, "output directory")->required();

  auto* sy = app.add_subcommand("synth", "synthesise IF cubes");
  add_common(sy, synth_o);
  sy->add_option("--scene", scene_dir, "scene directory (default: generate)");
  sy->add_option("--mode", mode, "conventional | proposed | both");
  sy->add_option("-o,--out", out, "output directory")->required();

  auto* ds = app.add_subcommand("dsp", "range-angle processing of an IF cube");
  add_common(ds, dsp_o);
  ds->add_option("--cube", cube_path, "IF cube (.bin)")->required()->check(CLI::ExistingFile);
  ds->add_option("-o,--out", out, "output directory")->required();

  auto* me = app.add_subcommand("metrics", "compare two waveform CSVs");
  add_common(me, metr_o);
  me->add_option("--recovered", recovered_path, "recovered waveform")->required()->check(CLI::ExistingFile);
  me->add_option("--truth", truth_path, "reference waveform")->required()->check(CLI::ExistingFile);
  bool smoothed = false;
  me->add_flag("--smoothed", smoothed, "apply smoothing/detrending to both first");

  auto* pp = app.add_subcommand("pipeline", "scene to metrics in one run");
  add_common(pp, pipe_o);
  pp->add_option("--mode", mode, "conventional | proposed | both");
  pp->add_option("-o,--out", out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (sc->parsed()) {
      const auto cfg = resolve(scene_o);
      const auto s = scene::gen_frames(cfg.scene);
      scene::save_scene(s, out);
      std::printf("scene: %zu frames, template %zu points -> %s\n", s.frames.size(),
                  s.template_cloud.size(), out.c_str());
    } else if (rg->parsed()) {
      const auto cfg = resolve(reg_o);
      const auto s = scene_for(scene_dir, cfg);
      const auto reg = pipeline::register_sequence(s.template_cloud, s.frames, cfg.cpd,
                                                   cfg.processing.cpd_points, s.config.seed);
      for (std::size_t f = 0; f < reg.clouds.size(); ++f) {
        char name[64];
        std::snprintf(name, sizeof name, "registered/frame_%04zu.ply", f);
        fs::create_directories(fs::path(out) / "registered");
        save_ply(reg.clouds[f], fs::path(out) / name);
      }
      write_cpd_trace(fs::path(out) / "cpd_trace.csv", reg.stats);
      std::printf("register: %zu frames -> %s\n", reg.clouds.size(), out.c_str());
    } else if (st->parsed()) {
      const auto cfg = resolve(scat_o);
      const auto setup = pipeline::make_radar_setup(cfg);
      const auto cloud = load_ply(cloud_path);
      const std::vector<PointCloudFrame> clouds{cloud};
      const auto maps = pipeline::scattering_maps(clouds, setup, cfg);
      for (std::size_t e = 0; e < maps.size(); ++e) {
        const auto& el = setup.array.elements[e];
        em::ScatteringMap m{setup.array.rx_positions[el.rx_index], maps[e][0], cfg.em.a0};
        char name[32];
        std::snprintf(name, sizeof name, "map_e%02zu.csv", e);
        io::write_scattering_map_csv(fs::path(out) / name, m, cloud.points);
      }
      std::printf("scatter: %zu element maps -> %s\n", maps.size(), out.c_str());
    } else if (sy->parsed()) {
      auto cfg = resolve(synth_o);
      if (!mode.empty()) cfg.mode = config::parse_mode(mode);
      const auto s = scene_for(scene_dir, cfg);
      const auto setup = pipeline::make_radar_setup(cfg);
      const auto grid = pipeline::slow_grid_for(s, cfg);
      const std::size_t n_el = setup.array.size();
      if (cfg.mode != config::Mode::conventional) {
        const auto reg = pipeline::register_sequence(s.template_cloud, s.frames, cfg.cpd,
                                                     cfg.processing.cpd_points, s.config.seed);
        const auto maps = pipeline::scattering_maps(reg.clouds, setup, cfg);
        const auto centers = pipeline::time_resolved_centers(reg.clouds, maps, setup, cfg);
        io::write_ifcube(fs::path(out) / "if_proposed.bin",
                         radar::synth_if_proposed(centers, cfg.radar.chirp, grid, n_el));
        std::printf("synth proposed: %zu centres\n", centers.size());
      }
      if (cfg.mode != config::Mode::proposed) {
        const auto cm = pipeline::conventional_centers(s.frames, setup, cfg);
        io::write_ifcube(fs::path(out) / "if_conventional.bin",
                         radar::synth_if_conventional(cm.scatter_centers, cfg.radar.chirp, grid, n_el));
        std::printf("synth conventional: %zu centres\n", cm.centers.size());
      }
    } else if (ds->parsed()) {
      const auto cfg = resolve(dsp_o);
      const auto setup = pipeline::make_radar_setup(cfg);
      const auto cube = io::read_ifcube(cube_path);
      const auto r = pipeline::process_cube(cube, setup, cfg);
      io::write_range_angle_csv(fs::path(out) / "range_angle.csv", r.power, r.range_axis,
                                setup.theta_grid);
      io::write_waveform_csv(fs::path(out) / "waveform_raw.csv", r.raw);
      io::write_waveform_csv(fs::path(out) / "waveform_smoothed.csv",
                             dsp::smooth_detrend(r.raw, cfg.dsp.smooth_window_s,
                                                 cfg.dsp.detrend_window_s));
      std::printf("dsp: peak at r=%.4f m, theta=%.2f deg\n", r.pixel.range,
                  r.pixel.theta * 180.0 / 3.141592653589793);
    } else if (me->parsed()) {
      const auto cfg = resolve(metr_o);
      auto a = io::read_waveform_csv(recovered_path);
      auto b = io::read_waveform_csv(truth_path);
      if (smoothed) {
        a = dsp::smooth_detrend(a, cfg.dsp.smooth_window_s, cfg.dsp.detrend_window_s);
        b = dsp::smooth_detrend(b, cfg.dsp.smooth_window_s, cfg.dsp.detrend_window_s);
      }
      const auto rep = metrics::compare(a.values, b.values, a.rate, cfg.dsp.max_lag_s, smoothed);
      std::cout << metrics::to_json(rep).dump(2) << "\n";
    } else if (pp->parsed()) {
      auto cfg = resolve(pipe_o);
      if (!mode.empty()) cfg.mode = config::parse_mode(mode);
      const auto r = pipeline::run_pipeline(cfg, out);
      std::cout << r.report.dump(2) << "\n";
    }
  } catch (const InvalidArgument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const PipelineError& e) {
    std::fprintf(stderr, "pipeline error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
