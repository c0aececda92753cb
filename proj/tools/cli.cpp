#include "cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <memory>
#include <numeric>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "rtls/building.hpp"
#include "rtls/eval.hpp"
#include "rtls/frame_io.hpp"
#include "rtls/net.hpp"
#include "rtls/pipeline.hpp"
#include "rtls/rng.hpp"
#include "rtls/tracker.hpp"

namespace rtls::cli {

namespace {

struct GlobalOptions {
  std::uint64_t seed = 0;
  std::string building;
  std::string layout;
};

struct BuildingOptions {
  std::string preset = "desk";
  int zones = 0;
  int sensors = 0;
  int floors = 0;
  int edges = -1;
  double cell_size = 8.0;
};

struct DataOptions {
  std::string out_dir;
  DataSpec spec;
};

struct TrainOptions {
  std::string data_dir;
  std::string model;
  std::string losses;
  int hidden = 200;
  int dense = 200;
  int layers = 1;
  double dropout = 0.5;
  double learning_rate = 0.01;
  int epochs = 30;
  int half_len = 25;
  int per_pair = 3;
};

struct TrackOptions {
  std::string model;
  std::string input = "-";
  std::string output = "-";
  double k = 40.0;
  int lookback = 10;
};

struct EvalOptions {
  std::string model;
  std::string data_dir;
  std::string walks = "test";
  double k = 40.0;
  int lookback = 10;
  std::vector<double> sweep_k;
  std::vector<int> sweep_lookback;
  std::vector<int> history;
  std::string out;
  std::string grid_out;
  std::string history_out;
};

struct AblateOptions {
  std::vector<double> densities{0.5, 0.75, 1.0, 1.25};
  std::string out;
};

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw Error(fmt::format("missing required option {}", flag));
}

std::string provenance_line(const char* kind, const Provenance& p) {
  return fmt::format("# {} v1 seed={} digest={}\n", kind, p.seed, digest_hex(p.digest));
}

template <class... Args>
Provenance provenance_of(std::uint64_t seed, fmt::format_string<Args...> f, Args&&... args) {
  return {seed, fnv1a(fmt::format(f, std::forward<Args>(args)...))};
}

std::string propagation_key(const PropagationParams& p) {
  return fmt::format("p0={}|n={}|wall={}|floor={}|sigma={}|mb={}|mpm={}", p.p0,
                     p.path_loss_exponent, p.wall_attenuation, p.floor_attenuation, p.noise_sigma,
                     p.missing_prob_base, p.missing_prob_per_meter);
}

// ---------------------------------------------------------------------------

int gen_building(const GlobalOptions& g, const BuildingOptions& o, const CLI::App& cmd,
                 std::ostream& out) {
  require(g.building, "--building");
  require(g.layout, "--layout");
  BuildingSpec spec;
  if (o.preset == "desk")
    spec = BuildingSpec::desk();
  else if (o.preset == "paper")
    spec = BuildingSpec::paper();
  else
    throw Error(fmt::format("unknown preset '{}' (expected desk or paper)", o.preset));
  if (cmd.count("--zones") > 0) spec.zones = o.zones;
  if (cmd.count("--sensors") > 0) spec.sensors = o.sensors;
  if (cmd.count("--floors") > 0) spec.floors = o.floors;
  if (cmd.count("--edges") > 0) spec.edges = o.edges;
  if (cmd.count("--cell-size") > 0) spec.cell_size = o.cell_size;
  if (cmd.count("--zones") > 0 && cmd.count("--edges") == 0) spec.edges = -1;
  spec.seed = g.seed;

  const auto b = generate_building(spec);
  const auto prov = provenance_of(g.seed, "gen-building|Z={}|S={}|F={}|E={}|cell={}", spec.zones,
                                  spec.sensors, spec.floors, spec.edges, spec.cell_size);
  write_file(g.building, building_to_json(b.graph, prov));
  write_file(g.layout, layout_to_json(b.layout, prov));
  out << fmt::format("building: {} zones, {} connected pairs, {} floors\n", b.graph.zone_count(),
                     b.graph.connected_pairs().size(), b.graph.floor_count());
  out << fmt::format("layout: {} sensors, density {:.3f}\n", b.layout.sensor_count(),
                     b.layout.density());
  return 0;
}

int gen_data(const GlobalOptions& g, const DataOptions& o, std::ostream& out) {
  require(g.building, "--building");
  require(g.layout, "--layout");
  require(o.out_dir, "--out");
  const auto graph = load_building(g.building);
  const auto layout = load_layout(g.layout);
  layout.validate(graph);
  const auto& s = o.spec;
  const auto prov = provenance_of(
      g.seed, "gen-data|Z={}|S={}|tags={}+{}|session={}|walks={}x{}|dwell={}|{}",
      graph.zone_count(), layout.sensor_count(), s.train_tags, s.test_tags, s.session_seconds,
      s.walks, s.walk_seconds, s.dwell_mean, propagation_key(s.propagation));
  const auto corpus = generate_corpus(graph, layout, s, g.seed);
  write_corpus(corpus, o.out_dir, layout.sensor_count(), prov);
  out << fmt::format("wrote {} tags x {} zone sessions and {} walks to {}\n", corpus.tag_count(),
                     graph.zone_count(), corpus.walks.size(), o.out_dir);
  return 0;
}

int train_cmd(const GlobalOptions& g, const TrainOptions& o, std::ostream& out) {
  require(g.building, "--building");
  require(g.layout, "--layout");
  require(o.data_dir, "--data");
  require(o.model, "--model");
  NetConfig cfg;
  cfg.dropout_rate = o.dropout;
  cfg.learning_rate = o.learning_rate;
  cfg.epochs = o.epochs;
  cfg.seed = g.seed;
  cfg.shape.hidden_dim = o.hidden;
  cfg.shape.dense_dim = o.dense;
  cfg.shape.layers = o.layers;
  cfg.shape.input_dim = 1;
  cfg.shape.class_dim = 1;
  cfg.validate();

  const auto graph = load_building(g.building);
  const auto layout = load_layout(g.layout);
  layout.validate(graph);
  const int sensors = layout.sensor_count();
  cfg.shape.input_dim = sensors;
  cfg.shape.class_dim = graph.zone_count();

  const auto corpus = read_corpus(o.data_dir, sensors, graph.zone_count());
  const Normalization norm;
  const auto split = make_split(training_recordings(corpus, sensors, norm),
                                test_sessions(corpus, sensors, norm), graph, o.half_len,
                                o.per_pair, g.seed);
  out << fmt::format("training on {} trajectories, validating on {}\n", split.train.size(),
                     split.validation.size());
  const auto report = train(cfg, split, [&out](int epoch, double tl, double vl) {
    out << fmt::format("epoch {:>3}  train {:.6f}  validation {:.6f}\n", epoch, tl, vl);
    out.flush();
  });
  const auto prov = provenance_of(
      g.seed, "train|S={}|H={}|Z={}|D={}|L={}|drop={}|lr={}|epochs={}|N={}|per_pair={}", sensors,
      cfg.shape.hidden_dim, cfg.shape.class_dim, cfg.shape.dense_dim, cfg.shape.layers,
      cfg.dropout_rate, cfg.learning_rate, cfg.epochs, o.half_len, o.per_pair);
  save_params(report.selected_params, o.model, {prov.seed, prov.digest});
  if (!o.losses.empty()) {
    std::string csv = provenance_line("rtls-losses", prov) + "epoch,train_loss,validation_loss,selected\n";
    for (std::size_t e = 0; e < report.train_loss.size(); ++e)
      csv += fmt::format("{},{},{},{}\n", e + 1, report.train_loss[e], report.validation_loss[e],
                         static_cast<int>(e + 1) == report.selected_epoch ? 1 : 0);
    write_file(o.losses, csv);
  }
  out << fmt::format("selected epoch {} (validation loss {:.6f}); model written to {}\n",
                     report.selected_epoch, report.validation_loss[report.selected_epoch - 1],
                     o.model);
  return 0;
}

LoadedModel load_model_for(const std::string& path, int sensors, const ZoneGraph& graph) {
  auto model = load_params(path);
  NetShape expected = model.params.shape;
  if (sensors > 0) expected.input_dim = sensors;
  expected.class_dim = graph.zone_count();
  check_shape(model.params.shape, expected);
  return model;
}

int track_cmd(const GlobalOptions& g, const TrackOptions& o, std::istream& in, std::ostream& out,
              std::ostream& err) {
  require(g.building, "--building");
  require(o.model, "--model");
  auto graph = std::make_shared<const ZoneGraph>(load_building(g.building));
  auto model = load_model_for(o.model, 0, *graph);
  auto params = std::make_shared<const NetParams>(std::move(model.params));
  TrackerOptions opts;
  opts.k = o.k;
  opts.lookback = o.lookback;
  opts.validate();

  std::ifstream file_in;
  std::istream* src = &in;
  if (o.input != "-") {
    file_in.open(o.input);
    if (!file_in) throw Error(fmt::format("cannot open '{}'", o.input));
    src = &file_in;
  }
  std::ofstream file_out;
  std::ostream* dst = &out;
  if (o.output != "-") {
    file_out.open(o.output, std::ios::trunc);
    if (!file_out) throw Error(fmt::format("cannot open '{}' for writing", o.output));
    dst = &file_out;
  }

  const Provenance prov{model.provenance.seed,
                        fnv1a(fmt::format("track|model={}|k={}|L={}",
                                          digest_hex(model.provenance.config_digest), o.k,
                                          o.lookback))};
  *dst << provenance_line("rtls-decisions", prov);
  *dst << "timestamp,tag,zone,top1_zone,top1_prob,top2_zone,top2_prob,top3_zone,top3_prob\n";
  auto emit = [&](const std::string& tag, const ZoneDecision& d) {
    std::vector<int> order(d.constrained_probs.size());
    std::iota(order.begin(), order.end(), 0);
    const auto top = std::min<std::size_t>(3, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top), order.end(),
                      [&](int a, int b) {
                        return d.constrained_probs[a] > d.constrained_probs[b] ||
                               (d.constrained_probs[a] == d.constrained_probs[b] && a < b);
                      });
    std::string line = fmt::format("{},{},{}", d.timestamp, tag, d.zone);
    for (std::size_t i = 0; i < 3; ++i) {
      if (i < top)
        line += fmt::format(",{},{}", order[i], d.constrained_probs[order[i]]);
      else
        line += ",,";
    }
    *dst << line << '\n';
  };

  TrackerPool pool(params, graph, opts);
  FrameReader reader(*src, params->shape.input_dim);
  StreamRecord rec;
  while (reader.next(rec)) {
    for (const auto& d : pool.ingest(rec.tag, rec.frame)) emit(rec.tag, d);
    if (dst == &out) dst->flush();
  }
  for (const auto& [tag, d] : pool.flush_all()) emit(tag, d);
  if (pool.dropped_frames() > 0)
    err << fmt::format("warning: dropped {} out-of-order frames\n", pool.dropped_frames());
  return 0;
}

std::string metrics_row(const char* dataset, double k, int lookback, const MetricReport& r) {
  return fmt::format("{},{},{},{},{},{},{},{},{}\n", dataset, k, lookback, r.accuracy_star,
                     r.incorrect_per_trajectory(), r.mean_error_distance, r.incorrect_zone_changes,
                     r.total_zone_changes, r.trajectories);
}

int evaluate_cmd(const GlobalOptions& g, const EvalOptions& o, std::ostream& out) {
  require(g.building, "--building");
  require(g.layout, "--layout");
  require(o.model, "--model");
  require(o.data_dir, "--data");
  auto graph = std::make_shared<const ZoneGraph>(load_building(g.building));
  const auto layout = load_layout(g.layout);
  layout.validate(*graph);
  const int sensors = layout.sensor_count();
  auto model = load_model_for(o.model, sensors, *graph);
  auto params = std::make_shared<const NetParams>(std::move(model.params));
  const auto corpus = read_corpus(o.data_dir, sensors, graph->zone_count());

  std::vector<int> walk_ids;
  if (o.walks == "test")
    walk_ids = corpus.test_walks;
  else if (o.walks == "validation")
    walk_ids = corpus.validation_walks;
  else if (o.walks == "all") {
    walk_ids.resize(corpus.walks.size());
    std::iota(walk_ids.begin(), walk_ids.end(), 0);
  } else
    throw Error(fmt::format("unknown walk set '{}' (expected test, validation, or all)", o.walks));
  const auto walks = pick_walks(corpus, walk_ids);

  TrackerOptions opts;
  opts.k = o.k;
  opts.lookback = o.lookback;
  opts.validate();
  const Normalization norm;
  const auto sessions = test_sessions(corpus, sensors, norm);
  const Provenance prov{model.provenance.seed,
                        fnv1a(fmt::format("evaluate|model={}|k={}|L={}|walks={}",
                                          digest_hex(model.provenance.config_digest), o.k,
                                          o.lookback, o.walks))};

  const auto zone_report = evaluate_zone_sessions(*params, *graph, sessions, o.lookback);
  std::string csv = provenance_line("rtls-metrics", prov) +
                    "dataset,k,lookback,accuracy_star,incorrect_changes,mean_error_distance,"
                    "incorrect_total,changes_total,trajectories\n";
  csv += metrics_row("zones", 1.0, o.lookback, zone_report);
  out << fmt::format("single-zone accuracy (lookback {}): {:.2f}%  mean error distance {:.3f}\n",
                     o.lookback, 100.0 * zone_report.accuracy_star,
                     zone_report.mean_error_distance);
  if (!walks.empty()) {
    const auto walk_report = evaluate_walks(params, graph, walks, opts);
    csv += metrics_row("walks", o.k, o.lookback, walk_report);
    out << fmt::format(
        "walks ({} {}, k={}, lookback {}): accuracy* {:.2f}%  incorrect changes {:.2f} per walk "
        "({} of {})  mean error distance {:.3f}\n",
        walks.size(), o.walks, o.k, o.lookback, 100.0 * walk_report.accuracy_star,
        walk_report.incorrect_per_trajectory(), walk_report.incorrect_zone_changes,
        walk_report.total_zone_changes, walk_report.mean_error_distance);
  }
  if (!o.out.empty()) write_file(o.out, csv);

  if (!o.sweep_k.empty()) {
    const auto lbs = o.sweep_lookback.empty() ? std::vector<int>{o.lookback} : o.sweep_lookback;
    const auto grid = sweep_k(params, graph, walks, o.sweep_k, lbs, opts);
    out << grid_table(grid);
    if (!o.grid_out.empty()) write_file(o.grid_out, provenance_line("rtls-k-sweep", prov) + grid_csv(grid));
  }
  if (!o.history.empty()) {
    const auto sweep = sweep_history_length(*params, *graph, sessions, o.history);
    out << sweep_table(sweep);
    if (!o.history_out.empty())
      write_file(o.history_out, provenance_line("rtls-history-sweep", prov) + sweep_csv(sweep));
  }
  return 0;
}

int ablate_cmd(const GlobalOptions& g, const TrainOptions& t, const AblateOptions& o,
               std::ostream& out) {
  require(g.building, "--building");
  require(g.layout, "--layout");
  require(t.data_dir, "--data");
  auto graph = std::make_shared<const ZoneGraph>(load_building(g.building));
  const auto layout = load_layout(g.layout);
  layout.validate(*graph);
  const int sensors = layout.sensor_count();
  const auto corpus = read_corpus(t.data_dir, sensors, graph->zone_count());
  const Normalization norm;

  DensityExperiment exp;
  exp.graph = graph;
  exp.sensor_count = sensors;
  exp.recordings = training_recordings(corpus, sensors, norm);
  exp.test_sessions = test_sessions(corpus, sensors, norm);
  exp.net.shape = {sensors, t.hidden, graph->zone_count(), t.dense, t.layers};
  exp.net.dropout_rate = t.dropout;
  exp.net.learning_rate = t.learning_rate;
  exp.net.epochs = t.epochs;
  exp.net.seed = g.seed;
  exp.net.validate();
  exp.half_len = t.half_len;
  exp.per_pair = t.per_pair;

  const auto sweep = sweep_sensor_density(exp, o.densities, g.seed);
  out << sweep_table(sweep);
  if (!o.out.empty()) {
    const auto prov = provenance_of(g.seed, "ablate|H={}|D={}|drop={}|lr={}|epochs={}", t.hidden,
                                    t.dense, t.dropout, t.learning_rate, t.epochs);
    write_file(o.out, provenance_line("rtls-density-sweep", prov) + sweep_csv(sweep));
  }
  return 0;
}

void add_training_flags(CLI::App* cmd, TrainOptions& t) {
  cmd->add_option("--data", t.data_dir, "Corpus directory written by gen-data");
  cmd->add_option("--hidden", t.hidden, "LSTM width")->capture_default_str();
  cmd->add_option("--dense", t.dense, "Dense layer width")->capture_default_str();
  cmd->add_option("--layers", t.layers, "Stacked LSTM layers")->capture_default_str();
  cmd->add_option("--dropout", t.dropout, "Dropout fraction")->capture_default_str();
  cmd->add_option("--lr", t.learning_rate, "SGD learning rate")->capture_default_str();
  cmd->add_option("--epochs", t.epochs, "Training epochs")->capture_default_str();
  cmd->add_option("--half-len", t.half_len, "Steps per half of an augmented trajectory")
      ->capture_default_str();
  cmd->add_option("--per-pair", t.per_pair, "Augmented trajectories per connected pair and tag")
      ->capture_default_str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"BLE zone localization: simulation, training, tracking, and evaluation", "rtls"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--seed", g.seed, "Seed for every random stream")->capture_default_str();
  app.add_option("--building", g.building, "Building JSON (zones and adjacency)");
  app.add_option("--layout", g.layout, "Sensor layout JSON");

  BuildingOptions bo;
  auto* gb = app.add_subcommand("gen-building", "Generate a synthetic building and sensor layout");
  gb->add_option("--preset", bo.preset, "desk (20 zones, 25 sensors) or paper (115 zones, 142 sensors)")
      ->capture_default_str();
  gb->add_option("--zones", bo.zones, "Zone count");
  gb->add_option("--sensors", bo.sensors, "Sensor count");
  gb->add_option("--floors", bo.floors, "Floor count");
  gb->add_option("--edges", bo.edges, "Connected zone pairs");
  gb->add_option("--cell-size", bo.cell_size, "Zone cell side in meters");

  DataOptions dopt;
  auto* gd = app.add_subcommand("gen-data", "Simulate zone sessions and walks");
  gd->add_option("--out", dopt.out_dir, "Output directory");
  gd->add_option("--train-tags", dopt.spec.train_tags, "Training tags")->capture_default_str();
  gd->add_option("--test-tags", dopt.spec.test_tags, "Held-out tags")->capture_default_str();
  gd->add_option("--session-seconds", dopt.spec.session_seconds, "Seconds per zone session")
      ->capture_default_str();
  gd->add_option("--walks", dopt.spec.walks, "Cross-zone walks")->capture_default_str();
  gd->add_option("--walk-seconds", dopt.spec.walk_seconds, "Seconds per walk")->capture_default_str();
  gd->add_option("--dwell-mean", dopt.spec.dwell_mean, "Mean seconds per zone on a walk")
      ->capture_default_str();
  auto& pp = dopt.spec.propagation;
  gd->add_option("--p0", pp.p0, "RSSI at 1 m (dBm)")->capture_default_str();
  gd->add_option("--path-loss-exponent", pp.path_loss_exponent)->capture_default_str();
  gd->add_option("--wall-attenuation", pp.wall_attenuation, "dB per zone boundary")->capture_default_str();
  gd->add_option("--floor-attenuation", pp.floor_attenuation, "dB per floor")->capture_default_str();
  gd->add_option("--noise-sigma", pp.noise_sigma, "Gaussian noise (dB)")->capture_default_str();
  gd->add_option("--missing-base", pp.missing_prob_base)->capture_default_str();
  gd->add_option("--missing-per-meter", pp.missing_prob_per_meter)->capture_default_str();

  TrainOptions topt;
  auto* tr = app.add_subcommand("train", "Train the LSTM classifier on augmented trajectories");
  add_training_flags(tr, topt);
  tr->add_option("--model", topt.model, "Output model file");
  tr->add_option("--losses", topt.losses, "Optional per-epoch loss CSV");

  TrackOptions kopt;
  auto* tk = app.add_subcommand("track", "Stream frames through per-tag trackers");
  tk->add_option("--model", kopt.model, "Model file");
  tk->add_option("--input", kopt.input, "Frame CSV, '-' for stdin")->capture_default_str();
  tk->add_option("--output", kopt.output, "Decision CSV, '-' for stdout")->capture_default_str();
  tk->add_option("--k", kopt.k, "Mobility constraint (1 disables)")->capture_default_str();
  tk->add_option("--lookback", kopt.lookback, "History steps per decision")->capture_default_str();

  EvalOptions eopt;
  auto* ev = app.add_subcommand("evaluate", "Score a model on held-out sessions and walks");
  ev->add_option("--model", eopt.model, "Model file");
  ev->add_option("--data", eopt.data_dir, "Corpus directory");
  ev->add_option("--walks", eopt.walks, "Walk set: test, validation, or all")->capture_default_str();
  ev->add_option("--k", eopt.k)->capture_default_str();
  ev->add_option("--lookback", eopt.lookback)->capture_default_str();
  ev->add_option("--sweep-k", eopt.sweep_k, "Comma-separated k grid")->delimiter(',');
  ev->add_option("--sweep-lookback", eopt.sweep_lookback, "Comma-separated lookbacks for --sweep-k")
      ->delimiter(',');
  ev->add_option("--history", eopt.history, "Comma-separated history lengths")->delimiter(',');
  ev->add_option("--out", eopt.out, "Metrics CSV");
  ev->add_option("--grid-out", eopt.grid_out, "k-sweep CSV");
  ev->add_option("--history-out", eopt.history_out, "History sweep CSV");

  TrainOptions aopt_train;
  AblateOptions aopt;
  auto* ab = app.add_subcommand("ablate", "Retrain with fewer sensors and score accuracy");
  add_training_flags(ab, aopt_train);
  ab->add_option("--densities", aopt.densities, "Sensors per zone, comma-separated")
      ->delimiter(',')
      ->capture_default_str();
  ab->add_option("--out", aopt.out, "Density sweep CSV");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return e.get_exit_code() != 0 ? e.get_exit_code() : 2;
  }

  try {
    if (gb->parsed()) return gen_building(g, bo, *gb, out);
    if (gd->parsed()) return gen_data(g, dopt, out);
    if (tr->parsed()) return train_cmd(g, topt, out);
    if (tk->parsed()) return track_cmd(g, kopt, in, out, err);
    if (ev->parsed()) return evaluate_cmd(g, eopt, out);
    if (ab->parsed()) return ablate_cmd(g, aopt_train, aopt, out);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error: " << msg << '\n';
    return 1;
  }
  return 1;
}

}  // namespace rtls::cli
