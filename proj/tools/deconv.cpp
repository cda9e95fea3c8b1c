// Command-line front end: streaming fit, density/interval/band reports,
// learning-rate calibration and synthetic-stream generation.
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
// degeneracy (likelihood underflow, window mass-check failures).

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "deconv/deconv.hpp"

namespace {

using nlohmann::json;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct GridOptions {
  deconv::GridSpec spec;
  bool paper_scale = false;

  void attach(CLI::App* cmd) {
    // Underscored aliases are the config-file key names.
    cmd->add_option("--mean-min,--mean_min", spec.mean_min, "Smallest kernel mean");
    cmd->add_option("--mean-max,--mean_max", spec.mean_max, "Largest kernel mean");
    cmd->add_option("--mean-step,--mean_step", spec.mean_step, "Kernel mean step");
    cmd->add_option("--var-min,--var_min", spec.var_min, "Smallest kernel variance");
    cmd->add_option("--var-max,--var_max", spec.var_max, "Largest kernel variance");
    cmd->add_option("--var-step,--var_step", spec.var_step, "Kernel variance step");
    cmd->add_flag("--paper-grid", paper_scale,
                  "Use the full-scale grid (means step 0.5 on [-40,40], variances step 0.01 on "
                  "[0.01,5]; 80500 atoms)");
  }

  deconv::GridSpec resolve() const {
    if (paper_scale) return deconv::GridSpec{-40.0, 40.0, 0.5, 0.01, 5.0, 0.01};
    return spec;
  }
};

struct NoiseOptions {
  std::string family = "laplace";
  double sd = 1.0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--noise", family, "Noise family: laplace or gaussian")
        ->check(CLI::IsMember({"laplace", "gaussian"}));
    cmd->add_option("--noise-sd,--noise_sd", sd, "Noise standard deviation")->required();
  }

  deconv::NoiseModel resolve() const {
    deconv::NoiseModel noise{deconv::NoiseModel::parse_family(family), sd};
    noise.validate();
    return noise;
  }
};

struct ScheduleOptions {
  double alpha = 1.0;
  double gamma = 1.0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--alpha", alpha, "Learning-rate alpha");
    cmd->add_option("--gamma", gamma, "Learning-rate exponent gamma, in (1/2, 1]");
  }

  deconv::LearningRateSchedule resolve() const {
    deconv::LearningRateSchedule s{alpha, gamma};
    s.validate();
    return s;
  }
};

struct QuadOptions {
  double y_low = 0.0, y_high = 0.0;
  std::size_t y_nodes = 801;
  std::size_t z_nodes = 256;
  double window_sigmas = 10.0;
  std::size_t x_probes = 201;
  std::size_t pair_probes = 101;
  CLI::Option* window_opt = nullptr;

  void attach(CLI::App* cmd, bool with_probes) {
    window_opt = cmd->add_option("--y-low", y_low, "Lower edge of the y-integration window");
    auto* hi = cmd->add_option("--y-high", y_high, "Upper edge of the y-integration window");
    window_opt->needs(hi);
    hi->needs(window_opt);
    cmd->add_option("--y-nodes", y_nodes, "Simpson nodes over the y window (odd, >= 401)");
    cmd->add_option("--z-nodes", z_nodes, "Nodes of the entropy integral (>= 256)");
    cmd->add_option("--window-sigmas", window_sigmas,
                    "Combined standard deviations of padding for the automatic y window");
    if (with_probes) {
      cmd->add_option("--x-probes", x_probes, "Probe points for the sup of sqrt(v_n) over I");
      cmd->add_option("--pair-probes", pair_probes, "Probe points per axis for the pair modulus");
    }
  }

  deconv::QuadratureSpec resolve(const deconv::EstimatorState& state) const {
    if (window_opt != nullptr && window_opt->count() > 0) {
      deconv::QuadratureSpec spec{y_low, y_high, y_nodes, z_nodes};
      spec.validate();
      return spec;
    }
    return deconv::QuadratureSpec::for_state(state, window_sigmas, y_nodes, z_nodes);
  }
};

struct EvalOptions {
  double min = -10.0;
  double max = 10.0;
  std::size_t points = 201;
  CLI::Option* min_opt = nullptr;

  void attach(CLI::App* cmd) {
    min_opt = cmd->add_option("--eval-min", min, "Smallest report point");
    cmd->add_option("--eval-max", max, "Largest report point");
    cmd->add_option("--eval-points", points, "Number of report points");
  }

  bool given() const { return min_opt != nullptr && min_opt->count() > 0; }

  deconv::EvalGrid resolve() const { return deconv::EvalGrid::linspace(min, max, points); }
};

json noise_json(const deconv::NoiseModel& noise) {
  return json{{"family", noise.family_name()}, {"sd", noise.std_dev}};
}

json grid_json(const deconv::GridSpec& spec) {
  return json{{"mean_min", spec.mean_min}, {"mean_max", spec.mean_max},
              {"mean_step", spec.mean_step}, {"var_min", spec.var_min},
              {"var_max", spec.var_max},     {"var_step", spec.var_step}};
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw deconv::data_error("cannot open output file: " + path);
  return out;
}

void write_report(const std::string& path, const json& header,
                  const std::vector<std::string>& columns,
                  const std::vector<std::vector<double>>& rows) {
  auto out = open_output(path);
  out << "# " << header.dump() << "\n";
  for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c];
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << fmt17(row[c]);
    out << "\n";
  }
  if (!out) throw deconv::data_error("failed writing output file: " + path);
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string preset = "unimodal";
  std::size_t n = 1000;
  std::uint64_t seed = 1;
  bool no_renormalize = false;
  NoiseOptions noise;
  std::string out;
};

void run_simulate(const SimulateArgs& args) {
  const auto preset = deconv::preset_by_name(args.preset, !args.no_renormalize);
  const auto noise = args.noise.resolve();
  deconv::Philox rng(args.seed);
  const auto stream = deconv::generate_stream(preset, noise, args.n, rng);

  auto out = open_output(args.out);
  out << "x,z,y\n";
  for (const auto& obs : stream)
    out << fmt17(obs.x) << "," << fmt17(obs.z) << "," << fmt17(obs.y) << "\n";
  if (!out) throw deconv::data_error("failed writing output file: " + args.out);

  json components = json::array();
  for (const auto& c : preset.components())
    components.push_back({{"weight", c.weight}, {"mean", c.mean}, {"variance", c.variance}});
  json sidecar{{"preset", args.preset},
               {"components", components},
               {"renormalized", !args.no_renormalize},
               {"noise", noise_json(noise)},
               {"n", args.n},
               {"seed", args.seed},
               {"rng", "philox4x32-10/v1"}};
  auto side = open_output(args.out + ".json");
  side << sidecar.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
  std::string input;
  std::string checkpoint;
  std::string resume;
  std::size_t csv_col = 0;  // 0: one plain observation per line; k >= 1: CSV column k
  bool skip_header = false;
  GridOptions grid;
  ScheduleOptions schedule;
  NoiseOptions noise;
};

std::vector<double> read_observations(std::istream& in, std::size_t csv_col, bool skip_header) {
  std::vector<double> ys;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_header && line_no == 1) continue;
    if (line.empty()) continue;
    std::string field = line;
    if (csv_col >= 1) {
      std::size_t start = 0;
      for (std::size_t c = 1; c < csv_col; ++c) {
        const auto comma = line.find(',', start);
        if (comma == std::string::npos)
          throw deconv::data_error("line " + std::to_string(line_no) + ": fewer than " +
                                   std::to_string(csv_col) + " columns");
        start = comma + 1;
      }
      const auto end = line.find(',', start);
      field = line.substr(start, end == std::string::npos ? std::string::npos : end - start);
    }
    try {
      std::size_t used = 0;
      const double v = std::stod(field, &used);
      while (used < field.size() && std::isspace(static_cast<unsigned char>(field[used]))) ++used;
      if (used != field.size()) throw std::invalid_argument(field);
      if (!std::isfinite(v)) throw std::invalid_argument(field);
      ys.push_back(v);
    } catch (const std::exception&) {
      throw deconv::data_error("line " + std::to_string(line_no) + ": cannot parse observation '" +
                               field + "'");
    }
  }
  return ys;
}

void run_fit(const FitArgs& args) {
  std::vector<double> ys;
  if (args.input == "-") {
    ys = read_observations(std::cin, args.csv_col, args.skip_header);
  } else {
    std::ifstream in(args.input);
    if (!in) throw deconv::data_error("cannot open input file: " + args.input);
    ys = read_observations(in, args.csv_col, args.skip_header);
  }

  std::optional<deconv::EstimatorState> state;
  if (!args.resume.empty()) {
    state = deconv::checkpoint_read_file(args.resume);
  } else {
    auto grid = std::make_shared<const deconv::ParameterGrid>(
        deconv::ParameterGrid::from_spec(args.grid.resolve()));
    state = deconv::EstimatorState::with_uniform_prior(grid, args.schedule.resolve(),
                                                       args.noise.resolve());
  }

  const auto start = std::chrono::steady_clock::now();
  for (double y : ys) deconv::update_in_place(*state, y);
  const auto stop = std::chrono::steady_clock::now();
  const double elapsed = std::chrono::duration<double>(stop - start).count();

  deconv::checkpoint_write_file(*state, args.checkpoint);

  std::cout << "observations_read: " << ys.size() << "\n";
  std::cout << "total_observations: " << state->count() << "\n";
  if (state->count() >= 1)
    std::cout << "final_learning_rate: "
              << fmt17(deconv::learning_rate(state->schedule(), state->count())) << "\n";
  if (!ys.empty())
    std::cout << "seconds_per_update: " << fmt17(elapsed / static_cast<double>(ys.size())) << "\n";
  std::cout << "checkpoint: " << args.checkpoint << "\n";
}

// ---------------------------------------------------------------------------
// reports

struct EstimateArgs {
  std::string checkpoint;
  EvalOptions eval;
  std::string out;
};

json state_json(const deconv::EstimatorState& state) {
  return json{{"n", state.count()},
              {"atoms", state.grid().size()},
              {"alpha", state.schedule().alpha},
              {"gamma", state.schedule().gamma},
              {"noise", noise_json(state.noise())}};
}

void run_estimate(const EstimateArgs& args) {
  const auto state = deconv::checkpoint_read_file(args.checkpoint);
  const auto eval = args.eval.resolve();
  json header = state_json(state);
  header["eval"] = {{"min", args.eval.min}, {"max", args.eval.max}, {"points", args.eval.points}};
  std::vector<std::vector<double>> rows;
  rows.reserve(eval.size());
  for (double x : eval.points()) rows.push_back({x, deconv::plugin_pdf(state, x)});
  write_report(args.out, header, {"x", "density"}, rows);
}

struct IntervalArgs {
  std::string checkpoint;
  double beta = 0.05;
  double epsilon = 1e-12;
  EvalOptions eval;
  QuadOptions quad;
  std::string out;
};

void run_interval(const IntervalArgs& args) {
  const auto state = deconv::checkpoint_read_file(args.checkpoint);
  const auto eval = args.eval.resolve();
  const auto quad = args.quad.resolve(state);
  const auto intervals = deconv::credible_intervals(state, eval, args.beta, args.epsilon, quad);
  json header = state_json(state);
  header["beta"] = args.beta;
  header["epsilon"] = args.epsilon;
  header["b_n"] = deconv::variance_normalizer(state.schedule(), state.count());
  header["y_window"] = {quad.y_low, quad.y_high};
  header["y_nodes"] = quad.y_nodes;
  std::vector<std::vector<double>> rows;
  rows.reserve(intervals.size());
  for (const auto& r : intervals)
    rows.push_back({r.x, r.center, r.center - r.half_width, r.center + r.half_width, r.variance});
  write_report(args.out, header, {"x", "center", "lower", "upper", "variance"}, rows);
}

struct BandArgs {
  std::string checkpoint;
  double interval_low = 0.0;
  double interval_high = 0.0;
  double beta = 0.05;
  double epsilon = 1e-12;
  EvalOptions eval;
  QuadOptions quad;
  std::string out;
};

void run_band(const BandArgs& args) {
  const auto state = deconv::checkpoint_read_file(args.checkpoint);
  const deconv::Interval interval{args.interval_low, args.interval_high};
  interval.validate();
  const auto eval = args.eval.given()
                        ? args.eval.resolve()
                        : deconv::EvalGrid::linspace(interval.lo, interval.hi, args.eval.points);
  const auto quad = args.quad.resolve(state);
  const auto band = deconv::credible_band(state, interval, eval, args.beta, args.epsilon, quad,
                                          args.quad.x_probes, args.quad.pair_probes);
  json header = state_json(state);
  header["beta"] = args.beta;
  header["epsilon"] = args.epsilon;
  header["b_n"] = band.b_n;
  header["interval"] = {interval.lo, interval.hi};
  header["sigma_I"] = band.info.sigma_sup;
  header["band_constant"] = band.info.band_constant;
  header["half_width"] = band.half_width;
  header["y_window"] = {quad.y_low, quad.y_high};
  header["y_nodes"] = quad.y_nodes;
  header["z_nodes"] = quad.z_nodes;
  header["x_probes"] = args.quad.x_probes;
  header["pair_probes"] = args.quad.pair_probes;
  std::vector<std::vector<double>> rows;
  rows.reserve(band.points.size());
  for (const auto& p : band.points) rows.push_back({p.x, p.center, p.lower, p.upper});
  write_report(args.out, header, {"x", "center", "lower", "upper"}, rows);
}

// ---------------------------------------------------------------------------
// calibrate

struct CalibrateArgs {
  NoiseOptions noise;
  GridOptions grid;
  std::uint64_t horizon = 1000;
  double alpha = 1.0;
  double gamma_min = 0.501;
  double gamma_max = 1.0;
  double gamma_step = 0.001;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::string out;
};

void run_calibrate(const CalibrateArgs& args) {
  deconv::CalibrationConfig config;
  config.grid = std::make_shared<const deconv::ParameterGrid>(
      deconv::ParameterGrid::from_spec(args.grid.resolve()));
  config.g0 = deconv::MixingPmf::uniform(config.grid->size());
  config.noise = args.noise.resolve();
  config.horizon = args.horizon;
  config.alpha = args.alpha;
  config.seed = args.seed;
  config.threads = args.threads;
  if (!(args.gamma_step > 0.0)) throw deconv::config_error("--gamma-step must be positive");
  for (double g = args.gamma_min; g <= args.gamma_max + 1e-12; g += args.gamma_step)
    config.gamma_grid.push_back(std::min(g, 1.0));

  const auto result = deconv::calibrate_gamma(config);

  json header{{"gamma_hat", result.gamma_hat},
              {"horizon", args.horizon},
              {"alpha", args.alpha},
              {"seed", args.seed},
              {"noise", noise_json(config.noise)},
              {"grid", grid_json(args.grid.resolve())},
              {"atoms", config.grid->size()},
              {"gamma_grid",
               {{"min", args.gamma_min}, {"max", args.gamma_max}, {"step", args.gamma_step}}}};
  std::vector<std::vector<double>> rows;
  rows.reserve(result.objective.size());
  for (const auto& s : result.objective)
    rows.push_back({s.gamma, s.score, static_cast<double>(s.skipped)});
  write_report(args.out, header, {"gamma", "score", "skipped"}, rows);
  std::cout << "gamma_hat: " << fmt17(result.gamma_hat) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming density deconvolution on a finite mixing grid"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a key=value config file (section per subcommand)");
  app.allow_config_extras(CLI::config_extras_mode::error);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic observation stream");
  simulate->add_option("--preset", sim.preset, "Mixture preset: unimodal, bimodal or multimodal")
      ->check(CLI::IsMember({"unimodal", "bimodal", "multimodal"}));
  simulate->add_option("--n", sim.n, "Number of observations")->required();
  simulate->add_option("--seed", sim.seed, "Generator seed");
  simulate->add_flag("--no-renormalize", sim.no_renormalize,
                     "Keep preset weights exactly as published even if they do not sum to 1");
  sim.noise.attach(simulate);
  simulate->add_option("--out", sim.out, "Output CSV path (sidecar written to <out>.json)")
      ->required();

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Stream observations through the recursion");
  fit_cmd->add_option("--input", fit.input, "Observation file, or - for stdin")->required();
  fit_cmd->add_option("--csv-col", fit.csv_col,
                      "Read observations from this 1-based CSV column (default: plain lines)");
  fit_cmd->add_flag("--skip-header", fit.skip_header, "Skip the first input line");
  fit_cmd->add_option("--checkpoint", fit.checkpoint, "Checkpoint file to write")->required();
  fit_cmd->add_option("--resume", fit.resume,
                      "Resume from this checkpoint (grid/schedule/noise flags are ignored)");
  fit.grid.attach(fit_cmd);
  fit.schedule.attach(fit_cmd);
  fit.noise.attach(fit_cmd);

  EstimateArgs est;
  auto* estimate = app.add_subcommand("estimate", "Report the plug-in signal density");
  estimate->add_option("--checkpoint", est.checkpoint, "Checkpoint to read")->required();
  est.eval.attach(estimate);
  estimate->add_option("--out", est.out, "Output CSV path")->required();

  IntervalArgs itv;
  auto* interval = app.add_subcommand("interval", "Report pointwise credible intervals");
  interval->add_option("--checkpoint", itv.checkpoint, "Checkpoint to read")->required();
  interval->add_option("--beta", itv.beta, "Credible level parameter (coverage 1 - beta)");
  interval->add_option("--epsilon", itv.epsilon, "Variance floor");
  itv.eval.attach(interval);
  itv.quad.attach(interval, false);
  interval->add_option("--out", itv.out, "Output CSV path")->required();

  BandArgs band;
  auto* band_cmd = app.add_subcommand("band", "Report a uniform credible band");
  band_cmd->add_option("--checkpoint", band.checkpoint, "Checkpoint to read")->required();
  band_cmd->add_option("--interval-low", band.interval_low, "Left end of the band interval")
      ->required();
  band_cmd->add_option("--interval-high", band.interval_high, "Right end of the band interval")
      ->required();
  band_cmd->add_option("--beta", band.beta, "Credible level parameter (coverage 1 - beta)");
  band_cmd->add_option("--epsilon", band.epsilon, "Band-constant floor");
  band.eval.attach(band_cmd);
  band.quad.attach(band_cmd, true);
  band_cmd->add_option("--out", band.out, "Output CSV path")->required();

  CalibrateArgs cal;
  auto* calibrate = app.add_subcommand("calibrate", "Calibrate the learning-rate exponent gamma");
  cal.noise.attach(calibrate);
  cal.grid.attach(calibrate);
  calibrate->add_option("--horizon", cal.horizon, "Simulation horizon M");
  calibrate->add_option("--alpha", cal.alpha, "Learning-rate alpha");
  calibrate->add_option("--gamma-min", cal.gamma_min, "Smallest gamma to score");
  calibrate->add_option("--gamma-max", cal.gamma_max, "Largest gamma to score");
  calibrate->add_option("--gamma-step", cal.gamma_step, "Gamma grid step");
  calibrate->add_option("--seed", cal.seed, "Generator seed");
  calibrate->add_option("--threads", cal.threads, "Worker threads (0 = hardware)");
  calibrate->add_option("--out", cal.out, "Objective trace CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(simulate)) run_simulate(sim);
    if (app.got_subcommand(fit_cmd)) run_fit(fit);
    if (app.got_subcommand(estimate)) run_estimate(est);
    if (app.got_subcommand(interval)) run_interval(itv);
    if (app.got_subcommand(band_cmd)) run_band(band);
    if (app.got_subcommand(calibrate)) run_calibrate(cal);
  } catch (const deconv::window_mass_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const deconv::degenerate_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const deconv::data_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const deconv::checkpoint_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const deconv::config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const deconv::contract_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const deconv::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
