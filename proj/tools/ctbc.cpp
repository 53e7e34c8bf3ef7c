// Command-line harness: train / eval / replay / plot / gen-terrain.
// Exit codes: 0 success, 2 config error, 3 runtime fault.
#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ctbc/checkpoint.hpp"
#include "ctbc/evaluation.hpp"
#include "ctbc/trainer.hpp"

using json = nlohmann::json;
using namespace ctbc;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

Config load_config_or_empty(const std::string& path) {
  if (path.empty()) return Config();
  return Config::load(path);
}

void write_run_metadata(const std::string& out_dir, const Config& cfg,
                        uint64_t seed) {
  json meta;
  meta["seed"] = seed;
  meta["config_hash"] = cfg.hash();
  meta["version"] = "ctbc-1";
  std::ofstream os(out_dir + "/run.json");
  os << meta.dump(2) << "\n";
}

// ---- replay trace ----

struct TraceTick {
  int tick = 0;
  double time = 0.0;
  double base[3] = {0, 0, 0};
  std::vector<double> q, foot_x, foot_z, action;
  std::vector<std::pair<int, double>> triggers;  // foot, force
};

void write_trace_line(std::ofstream& os, const Env& env,
                      const EnvStepResult& r, int tick) {
  json j;
  j["tick"] = tick;
  j["time"] = env.state().time;
  j["base"] = {env.state().base.x, env.state().base.z, env.state().base.pitch};
  j["q"] = {env.state().q[0], env.state().q[1], env.state().q[2],
            env.state().q[3]};
  const auto feet = forward_kinematics(
      env.model(), env.state().q, env.state().base);
  j["foot_x"] = {feet[0].x, feet[1].x};
  j["foot_z"] = {feet[0].z, feet[1].z};
  std::vector<double> act(r.composite.leg.data(), r.composite.leg.data() + 4);
  act.push_back(r.composite.wheel[0]);
  act.push_back(r.composite.wheel[1]);
  j["action"] = act;
  json trig = json::array();
  // trigger count only; per-event forces live in the reflex events
  j["trigger_events"] = r.trigger_events;
  j["triggers"] = trig;
  os << j.dump() << "\n";
}

std::vector<TraceTick> read_trace(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open trace: " + path);
  std::vector<TraceTick> out;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error("trace parse error at line " +
                               std::to_string(line_no) + ": " + e.what());
    }
    TraceTick t;
    t.tick = j.value("tick", 0);
    t.time = j.value("time", 0.0);
    if (j.contains("base"))
      for (int i = 0; i < 3; ++i) t.base[i] = j["base"][i];
    for (auto& v : j.value("q", json::array())) t.q.push_back(v);
    for (auto& v : j.value("foot_x", json::array())) t.foot_x.push_back(v);
    for (auto& v : j.value("foot_z", json::array())) t.foot_z.push_back(v);
    for (auto& v : j.value("action", json::array())) t.action.push_back(v);
    const int n_trig = j.value("trigger_events", 0);
    for (int i = 0; i < n_trig; ++i) t.triggers.push_back({-1, 0.0});
    out.push_back(std::move(t));
  }
  return out;
}

void write_replay_svg(const std::vector<TraceTick>& trace,
                      const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open svg: " + path);
  const double sx = 120.0, sz = -120.0, oy = 300.0;
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='1200' height='400'>\n";
  const size_t stride = std::max<size_t>(1, trace.size() / 24);
  for (size_t i = 0; i < trace.size(); i += stride) {
    const TraceTick& t = trace[i];
    const double bx = 40 + t.base[0] * sx, bz = oy + t.base[2] * sz;
    os << "<circle cx='" << bx << "' cy='" << bz
       << "' r='4' fill='none' stroke='black'/>\n";
    for (size_t f = 0; f + 1 < t.foot_x.size() + 1 && f < t.foot_x.size(); ++f) {
      const double fx = 40 + t.foot_x[f] * sx, fz = oy + t.foot_z[f] * sz;
      os << "<line x1='" << bx << "' y1='" << bz << "' x2='" << fx << "' y2='"
         << fz << "' stroke='" << (f == 0 ? "steelblue" : "indianred")
         << "' stroke-width='1'/>\n"
         << "<circle cx='" << fx << "' cy='" << fz
         << "' r='6' fill='none' stroke='gray'/>\n";
    }
  }
  os << "</svg>\n";
}

// ---- plot ----

struct Series {
  std::string label;
  std::vector<double> x, y;
};

Series read_level_series(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot open csv: " + path);
  std::string header;
  if (!std::getline(is, header))
    throw std::invalid_argument("empty csv: " + path);
  std::vector<std::string> cols;
  {
    std::stringstream ss(header);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
  }
  int it_col = -1, lvl_col = -1;
  for (size_t i = 0; i < cols.size(); ++i) {
    if (cols[i] == "iteration") it_col = int(i);
    if (cols[i] == "mean_terrain_level") lvl_col = int(i);
  }
  if (it_col < 0 || lvl_col < 0)
    throw std::invalid_argument(
        path + ": missing required columns iteration/mean_terrain_level");
  Series s;
  s.label = std::filesystem::path(path).stem().string();
  std::string line;
  while (std::getline(is, line)) {
    std::stringstream ss(line);
    std::string c;
    std::vector<std::string> vals;
    while (std::getline(ss, c, ',')) vals.push_back(c);
    if (int(vals.size()) <= std::max(it_col, lvl_col)) continue;
    s.x.push_back(std::stod(vals[it_col]));
    s.y.push_back(std::stod(vals[lvl_col]));
  }
  return s;
}

void write_plot_svg(const std::vector<Series>& series, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open svg: " + path);
  const double W = 900, H = 520, L = 70, B = 60;
  double xmax = 1, ymax = 1;
  for (const auto& s : series)
    for (size_t i = 0; i < s.x.size(); ++i) {
      xmax = std::max(xmax, s.x[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  const char* colors[] = {"steelblue", "indianred", "seagreen", "darkorange",
                          "mediumpurple", "gray"};
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='"
     << H << "'>\n<rect width='100%' height='100%' fill='white'/>\n"
     << "<line x1='" << L << "' y1='" << H - B << "' x2='" << W - 20
     << "' y2='" << H - B << "' stroke='black'/>\n"
     << "<line x1='" << L << "' y1='" << H - B << "' x2='" << L
     << "' y2='20' stroke='black'/>\n"
     << "<text x='" << W / 2 << "' y='" << H - 15
     << "' text-anchor='middle'>iteration</text>\n"
     << "<text x='18' y='" << H / 2
     << "' transform='rotate(-90 18 " << H / 2
     << ")' text-anchor='middle'>mean terrain level</text>\n";
  for (size_t k = 0; k < series.size(); ++k) {
    const Series& s = series[k];
    os << "<polyline fill='none' stroke='" << colors[k % 6]
       << "' stroke-width='1.5' points='";
    for (size_t i = 0; i < s.x.size(); ++i)
      os << L + s.x[i] / xmax * (W - L - 20) << ","
         << (H - B) - s.y[i] / ymax * (H - B - 20) << " ";
    os << "'/>\n<text x='" << W - 180 << "' y='" << 30 + 18 * k << "' fill='"
       << colors[k % 6] << "'>" << s.label << "</text>\n";
  }
  os << "</svg>\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"planar wheeled-biped climbing stack"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_dir = "out";
  uint64_t seed = 0;
  app.add_option("--config", config_path, "key=value config file");
  app.add_option("--seed", seed, "master seed");
  app.add_option("--out-dir", out_dir, "output directory");

  // train
  auto* train_cmd = app.add_subcommand("train", "train a policy");
  bool no_ff = false, no_trigger = false;
  double stage2_at = -1.0;
  int num_envs = 0, iterations = 0;
  train_cmd->add_flag("--no-feedforward", no_ff, "disable feedforward (k_ff = 0)");
  train_cmd->add_flag("--no-contact-trigger", no_trigger,
                      "disable the contact trigger");
  train_cmd->add_option("--stage2-at", stage2_at,
                        "progress fraction for the stage-2 reward switch");
  train_cmd->add_option("--num-envs", num_envs, "parallel environments");
  train_cmd->add_option("--iterations", iterations, "training iterations");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "success-rate evaluation");
  std::string ckpt_path, trace_path;
  int n_robots = 0;
  double time_limit = 0.0;
  bool hole_escape = false;
  double pit_depth = 0.05, pit_width = 0.8;
  eval_cmd->add_option("--checkpoint", ckpt_path, "policy checkpoint")
      ->required();
  eval_cmd->add_option("--n-robots", n_robots, "trials per stair height");
  eval_cmd->add_option("--time-limit", time_limit, "seconds per trial");
  eval_cmd->add_option("--trace", trace_path, "write a JSONL replay trace");
  eval_cmd->add_flag("--hole-escape", hole_escape, "run the pit-escape preset");
  eval_cmd->add_option("--pit-depth", pit_depth, "pit depth (m)");
  eval_cmd->add_option("--pit-width", pit_width, "pit width (m)");

  // replay
  auto* replay_cmd = app.add_subcommand("replay", "inspect a JSONL trace");
  std::string replay_path, svg_path;
  replay_cmd->add_option("trace", replay_path, "trace file")->required();
  replay_cmd->add_option("--svg", svg_path, "stick-figure strip output");

  // plot
  auto* plot_cmd = app.add_subcommand("plot", "terrain level vs iteration");
  std::vector<std::string> csvs;
  std::string plot_out = "levels.svg";
  plot_cmd->add_option("csv", csvs, "training CSVs")->required();
  plot_cmd->add_option("--out", plot_out, "SVG output path");

  // gen-terrain
  auto* gen_cmd = app.add_subcommand("gen-terrain", "export a terrain grid");
  bool stairs_only = false;
  gen_cmd->add_flag("--stairs-only", stairs_only, "stairs in every column");

  for (CLI::App* sub : {train_cmd, eval_cmd, replay_cmd, plot_cmd, gen_cmd})
    sub->fallthrough();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;  // bad flags are config errors
  }

  try {
    if (train_cmd->parsed()) {
      Config file_cfg;
      try {
        file_cfg = load_config_or_empty(config_path);
      } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
      }
      TrainConfig cfg = TrainConfig::from_config(file_cfg);
      cfg.seed = seed;
      cfg.out_dir = out_dir;
      if (no_ff) cfg.feedforward = false;
      if (no_trigger) cfg.contact_trigger = false;
      if (stage2_at >= 0.0) cfg.stage2_at = stage2_at;
      if (num_envs > 0) cfg.num_envs = num_envs;
      if (iterations > 0) cfg.iterations = iterations;
      if (cfg.num_envs <= 0 || cfg.iterations <= 0 || cfg.horizon <= 0) {
        std::cerr << "config error: num_envs, iterations, horizon must be > 0\n";
        return kExitConfig;
      }
      std::filesystem::create_directories(out_dir);
      write_run_metadata(out_dir, file_cfg, seed);
      TrainResult r = train(cfg);
      std::cout << "final mean terrain level: "
                << (r.log.empty() ? 0.0 : r.log.back().mean_level) << "\n"
                << "log: " << r.csv_path << "\ncheckpoint: "
                << r.checkpoint_path << "\n";
      if (r.diverged) {
        std::cerr << "training diverged; last checkpoint saved\n";
        return kExitRuntime;
      }
      return 0;
    }

    if (eval_cmd->parsed()) {
      PolicyBundle bundle;
      try {
        bundle = load_checkpoint(ckpt_path);
      } catch (const std::exception& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
        return kExitConfig;
      }
      Config file_cfg;
      try {
        file_cfg = load_config_or_empty(config_path);
      } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
      }
      const RobotModel model = model_from_config(file_cfg);
      EnvConfig ecfg = EnvConfig::from_config(file_cfg);
      if (bundle.obs_dim != ObservationSpec::planar().dim()) {
        std::cerr << "checkpoint/model mismatch: checkpoint obs dim "
                  << bundle.obs_dim << " vs model "
                  << ObservationSpec::planar().dim() << "\n";
        return kExitConfig;
      }
      std::filesystem::create_directories(out_dir);

      if (hole_escape) {
        const HoleEscapeResult r = evaluate_hole_escape(
            bundle, model, ecfg, pit_depth, pit_width, n_robots > 0 ? n_robots : 50,
            time_limit > 0 ? time_limit : 10.0, seed);
        std::cout << "hole escape: " << r.successes << "/" << r.trials << "\n";
        return 0;
      }

      EvalProtocol protocol;
      if (n_robots > 0) protocol.n_robots = n_robots;
      if (time_limit > 0) protocol.time_limit = time_limit;
      const auto rows = evaluate_stairs(bundle, model, ecfg, protocol, seed);
      const std::string csv = out_dir + "/eval.csv";
      write_eval_csv(rows, csv);
      for (const auto& r : rows)
        std::cout << "h=" << r.height << " m: " << r.successes << "/"
                  << r.trials << " (" << r.rate() << "%)\n";
      std::cout << "csv: " << csv << "\n";

      if (!trace_path.empty()) {
        // one deterministic flat-ground rollout for inspection
        EnvConfig tcfg = ecfg;
        tcfg.randomize = false;
        tcfg.noise_on = false;
        Env env(model, make_flat_profile(20.0), tcfg,
                RewardCoeffs::planar_defaults(), Rng(seed));
        Eigen::VectorXd obs = env.reset();
        std::ofstream os(trace_path);
        for (int t = 0; t < 250; ++t) {
          const ActResult a = act(bundle, obs, env.stacked_observation(), true);
          const EnvStepResult r = env.step(a.action);
          write_trace_line(os, env, r, t);
          if (r.done) break;
          obs = r.obs;
        }
        std::cout << "trace: " << trace_path << "\n";
      }
      return 0;
    }

    if (replay_cmd->parsed()) {
      const auto trace = read_trace(replay_path);
      int total_triggers = 0;
      std::cout << "tick  time    base_x  base_z  pitch   footL_z footR_z trig\n";
      for (const auto& t : trace) {
        total_triggers += int(t.triggers.size());
        std::printf("%-5d %-7.3f %-7.3f %-7.3f %-7.3f %-7.3f %-7.3f %zu\n",
                    t.tick, t.time, t.base[0], t.base[1], t.base[2],
                    t.foot_z.size() > 0 ? t.foot_z[0] : 0.0,
                    t.foot_z.size() > 1 ? t.foot_z[1] : 0.0,
                    t.triggers.size());
      }
      std::cout << "ticks: " << trace.size()
                << ", trigger events: " << total_triggers << "\n";
      if (!svg_path.empty()) {
        write_replay_svg(trace, svg_path);
        std::cout << "svg: " << svg_path << "\n";
      }
      return 0;
    }

    if (plot_cmd->parsed()) {
      std::vector<Series> series;
      for (const auto& p : csvs) series.push_back(read_level_series(p));
      write_plot_svg(series, plot_out);
      std::cout << "plot: " << plot_out << " (" << series.size()
                << " series)\n";
      return 0;
    }

    if (gen_cmd->parsed()) {
      GridSpec spec;
      spec.stairs_only = stairs_only;
      const TerrainGrid grid = generate(seed, spec);
      std::filesystem::create_directories(out_dir);
      grid.export_csv(out_dir + "/terrain.csv");
      grid.export_pgm(out_dir + "/terrain.pgm");
      std::cout << "terrain: " << out_dir << "/terrain.{csv,pgm}\n";
      return 0;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
