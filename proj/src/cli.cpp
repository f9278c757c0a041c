#include "can/cli.hpp"

#include "can/config.hpp"
#include "can/data.hpp"
#include "can/error.hpp"
#include "can/gradcheck.hpp"
#include "can/simd.hpp"
#include "can/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>

namespace can {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct GenArgs {
  std::string kind;
  std::string out;
  std::uint64_t seed = 0;
  std::size_t per_class = 200;
  double rotation = 0.0;
  std::optional<double> noise;
  int classes = 4;
  std::size_t dims = 2;
  double translation = 0.0;
  double scale = 1.0;
  double spread = 2.0;
  double min_separation = 0.0;
};

struct TrainArgs {
  std::string source;
  std::string target;
  std::string config;
  std::string manifest;
  std::string out;
  std::optional<std::string> method;
  std::optional<double> beta, d0, eta0, lr_a, lr_b, momentum, weight_decay;
  std::optional<std::size_t> n0, k_steps, loops, warmup;
  std::optional<std::uint64_t> seed;
};

struct EvalArgs {
  std::string checkpoint;
  std::string data;
};

struct GradArgs {
  std::uint64_t seed = 0;
  double rtol = 1e-4;
  double step = 1e-5;
  std::size_t instances = 10;
};

struct SweepArgs {
  std::string source;
  std::string target;
  std::string config;
  std::string out;
  std::vector<std::string> methods;
  std::size_t seeds = 10;
  std::uint64_t first_seed = 0;
};

void write_json(const fs::path& p, const json& j) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error("cannot write " + p.string());
  f << j.dump(2) << '\n';
}

json read_json(const std::string& p) {
  std::ifstream f(p);
  if (!f) throw Error("cannot read " + p);
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw Error(p + ": " + e.what());
  }
}

json generator_json(const GeneratorInfo& g) { return json{{"name", g.name}, {"seed", g.seed}, {"params", g.params}}; }

int cmd_gen(const GenArgs& a, std::ostream& out) {
  DomainPair pair;
  if (a.kind == "moons") {
    pair = gen_moons(a.seed, a.per_class, a.rotation, a.noise.value_or(0.05));
  } else if (a.kind == "blobs") {
    pair = gen_blobs(a.seed, a.classes, a.per_class, a.dims,
                     BlobShift{a.rotation, a.translation, a.scale, a.noise.value_or(0.5)}, a.spread,
                     a.min_separation);
  } else {
    throw Error("unknown generator kind '" + a.kind + "'");
  }
  fs::create_directories(a.out);
  const fs::path dir(a.out);
  save_csv(pair.source, (dir / "source.csv").string());
  save_csv(pair.target, (dir / "target.csv").string());
  write_json(dir / "manifest.json", json{{"tool", "can"},
                                         {"version", kToolVersion},
                                         {"command", "gen"},
                                         {"generator", generator_json(pair.source.generator)},
                                         {"files", {{"source", "source.csv"}, {"target", "target.csv"}}}});
  out << "wrote " << (dir / "source.csv").string() << " and " << (dir / "target.csv").string() << " ("
      << pair.source.size() << " + " << pair.target.size() << " rows)\n";
  return 0;
}

TrainConfig resolve_config(TrainArgs& a) {
  TrainConfig c;
  if (!a.manifest.empty()) {
    const json m = read_json(a.manifest);
    if (!m.contains("config")) throw Error("manifest " + a.manifest + " has no config");
    c = config_from_json(m.at("config"));
    if (a.source.empty()) a.source = m.at("data").at("source").at("path").get<std::string>();
    if (a.target.empty()) a.target = m.at("data").at("target").at("path").get<std::string>();
  }
  if (!a.config.empty()) c = load_config(a.config, c);
  if (a.method) c.method = parse_method(*a.method);
  if (a.beta) c.beta = *a.beta;
  if (a.d0) c.d0 = *a.d0;
  if (a.n0) c.n0 = *a.n0;
  if (a.k_steps) c.k_steps = *a.k_steps;
  if (a.loops) c.loops = *a.loops;
  if (a.warmup) c.warmup_steps = *a.warmup;
  if (a.eta0) c.eta0 = *a.eta0;
  if (a.lr_a) c.lr_a = *a.lr_a;
  if (a.lr_b) c.lr_b = *a.lr_b;
  if (a.momentum) c.momentum = *a.momentum;
  if (a.weight_decay) c.weight_decay = *a.weight_decay;
  if (a.seed) c.seed = *a.seed;
  c.validate();
  if (a.source.empty() || a.target.empty()) throw Error("train: --source and --target are required");
  return c;
}

json dataset_ref(const std::string& path, const Dataset& d) {
  return json{{"path", fs::absolute(path).lexically_normal().string()}, {"rows", d.size()}, {"dims", d.dims()}};
}

int cmd_train(TrainArgs a, std::ostream& out, std::ostream& err) {
  const TrainConfig config = resolve_config(a);
  const Dataset source = load_csv(a.source);
  const Dataset target = load_csv(a.target);
  if (source.domain != Domain::Source) err << "warning: " << a.source << " is not tagged as source\n";
  if (target.domain != Domain::Target) err << "warning: " << a.target << " is not tagged as target\n";

  const fs::path dir(a.out);
  fs::create_directories(dir);
  json manifest{{"tool", "can"},
                {"version", kToolVersion},
                {"command", "train"},
                {"config", config_to_json(config)},
                {"data", {{"source", dataset_ref(a.source, source)}, {"target", dataset_ref(a.target, target)}}},
                {"seeds", {{"seed", config.seed}}},
                {"artifacts",
                 {{"metrics", "metrics.jsonl"},
                  {"summary", "summary.json"},
                  {"checkpoint", "checkpoint.txt"},
                  {"timing", "timing.jsonl"}}}};
  write_json(dir / "manifest.json", manifest);

  std::ofstream metrics(dir / "metrics.jsonl", std::ios::binary | std::ios::trunc);
  std::ofstream timing(dir / "timing.jsonl", std::ios::binary | std::ios::trunc);
  if (!metrics || !timing) throw Error("cannot write metrics in " + dir.string());

  const TrainResult r = train(config, source, target, [&](const LoopMetrics& m) {
    metrics << metrics_to_json(m).dump() << '\n' << std::flush;
    timing << json{{"loop", m.loop}, {"wall_seconds", m.wall_seconds}}.dump() << '\n' << std::flush;
    for (const auto& w : m.warnings) err << "loop " << m.loop << ": warning: " << w << '\n';
  });

  save_checkpoint(r.params, (dir / "checkpoint.txt").string());
  const json summary = summary_to_json(r.summary);
  write_json(dir / "summary.json", summary);
  out << summary.dump(2) << '\n';
  return 0;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const ModelParams params = load_checkpoint(a.checkpoint);
  const Dataset data = load_csv(a.data);
  const Evaluation e = evaluate(params, data);
  json per = json::array();
  for (double v : e.per_class) per.push_back(std::isfinite(v) ? json(v) : json(nullptr));
  out << json{{"accuracy", e.accuracy}, {"mean_class_accuracy", e.mean_class_accuracy}, {"per_class_accuracy", per}}
             .dump(2)
      << '\n';
  return 0;
}

int cmd_gradcheck(const GradArgs& a, std::ostream& out, std::ostream& err) {
  const GradCheckReport r = run_gradcheck(GradCheckOptions{a.seed, a.rtol, a.step, a.instances});
  std::ostream& dst = r.passed() ? out : err;
  for (const auto& c : r.components) {
    dst << std::left << std::setw(24) << c.name << " instances=" << c.instances << " entries=" << c.entries
        << " max_scaled_error=" << std::scientific << std::setprecision(3) << c.max_error << std::defaultfloat
        << (c.passed ? "  PASS" : "  FAIL") << '\n';
  }
  dst << (r.passed() ? "gradcheck passed" : "gradcheck FAILED") << " (rtol " << a.rtol << ", " << std::fixed
      << std::setprecision(2) << r.seconds << " s)\n"
      << std::defaultfloat;
  return r.passed() ? 0 : 1;
}

int cmd_sweep(const SweepArgs& a, std::ostream& out) {
  TrainConfig base;
  if (!a.config.empty()) base = load_config(a.config);
  const Dataset source = load_csv(a.source);
  const Dataset target = load_csv(a.target);
  if (!target.fully_labeled()) throw Error("sweep: target ground truth is required to compare methods");
  std::vector<Method> methods;
  for (const auto& m : a.methods) methods.push_back(parse_method(m));
  if (methods.empty()) methods = all_methods();

  json results = json::array();
  out << std::left << std::setw(12) << "method" << " mean_target_acc  per-seed\n";
  for (Method m : methods) {
    json row{{"method", to_string(m)}, {"target_accuracy", json::array()}};
    double sum = 0.0;
    for (std::size_t s = 0; s < a.seeds; ++s) {
      TrainConfig c = base;
      c.method = m;
      c.seed = a.first_seed + s;
      const TrainResult r = train(c, source, target);
      row["target_accuracy"].push_back(r.summary.target->accuracy);
      row["final_cdd_g"].push_back(r.summary.final_cdd_g ? json(*r.summary.final_cdd_g) : json(nullptr));
      sum += r.summary.target->accuracy;
    }
    row["mean_target_accuracy"] = sum / static_cast<double>(a.seeds);
    out << std::left << std::setw(12) << to_string(m) << ' ' << std::fixed << std::setprecision(4)
        << row["mean_target_accuracy"].get<double>() << "          ";
    for (const auto& v : row["target_accuracy"]) out << ' ' << std::setprecision(3) << v.get<double>();
    out << '\n' << std::defaultfloat;
    results.push_back(row);
  }
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    write_json(fs::path(a.out) / "sweep.json",
               json{{"tool", "can"}, {"version", kToolVersion}, {"config", config_to_json(base)}, {"results", results}});
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Contrastive adaptation network training on synthetic domain-shift data", "can"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate a seeded source/target dataset pair");
  g->add_option("--kind", gen.kind, "Generator: moons or blobs")->required()->check(CLI::IsMember({"moons", "blobs"}));
  g->add_option("--out", gen.out, "Output directory")->default_val(".");
  g->add_option("--seed", gen.seed, "Generator seed");
  g->add_option("--per-class", gen.per_class, "Samples per class per domain")->default_val(200);
  g->add_option("--rotation", gen.rotation, "Target rotation in degrees");
  g->add_option("--noise", gen.noise, "Noise standard deviation (moons 0.05, blobs 0.5)");
  g->add_option("--classes", gen.classes, "Number of classes (blobs)")->default_val(4);
  g->add_option("--dims", gen.dims, "Feature dimension (blobs)")->default_val(2);
  g->add_option("--translation", gen.translation, "Target translation length (blobs)");
  g->add_option("--scale", gen.scale, "Target mean scale factor (blobs)")->default_val(1.0);
  g->add_option("--spread", gen.spread, "Standard deviation of class means (blobs)")->default_val(2.0);
  g->add_option("--min-separation", gen.min_separation, "Minimum distance between class means (blobs)")
      ->default_val(0.0);

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train one method and write metrics, summary, checkpoint and manifest");
  t->add_option("--source", tr.source, "Source CSV");
  t->add_option("--target", tr.target, "Target CSV (labels, if present, are used for diagnostics only)");
  auto* cfg_opt = t->add_option("--config", tr.config, "JSON config file");
  t->add_option("--manifest", tr.manifest, "Re-run from a manifest.json written by a previous run")->excludes(cfg_opt);
  t->add_option("--out", tr.out, "Run directory")->required();
  t->add_option("--method", tr.method, "source-only|can|intra-only|no-ao|no-cas|pseudo0|pseudo1");
  t->add_option("--beta", tr.beta, "Discrepancy weight");
  t->add_option("--d0", tr.d0, "Sample filter threshold");
  t->add_option("--n0", tr.n0, "Class filter threshold");
  t->add_option("--k", tr.k_steps, "Network updates per loop");
  t->add_option("--loops", tr.loops, "Number of loops");
  t->add_option("--warmup", tr.warmup, "Source-only steps before the first loop");
  t->add_option("--eta0", tr.eta0, "Initial learning rate");
  t->add_option("--lr-a", tr.lr_a, "Learning-rate schedule a");
  t->add_option("--lr-b", tr.lr_b, "Learning-rate schedule b");
  t->add_option("--momentum", tr.momentum, "SGD momentum");
  t->add_option("--weight-decay", tr.weight_decay, "L2 penalty on weights");
  t->add_option("--seed", tr.seed, "Training seed");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on a labeled CSV");
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  e->add_option("--data", ev.data, "Labeled CSV")->required();

  GradArgs gr;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of all analytic gradients");
  gc->add_option("--seed", gr.seed, "Seed");
  gc->add_option("--rtol", gr.rtol, "Tolerance on the scaled max error")->default_val(1e-4);
  gc->add_option("--step", gr.step, "Finite-difference step")->default_val(1e-5);
  gc->add_option("--instances", gr.instances, "Instances per component")->default_val(10);

  SweepArgs sw;
  auto* s = app.add_subcommand("sweep", "Train several methods over several seeds and tabulate target accuracy");
  s->add_option("--source", sw.source, "Source CSV")->required();
  s->add_option("--target", sw.target, "Target CSV with ground truth")->required();
  s->add_option("--config", sw.config, "JSON config file");
  s->add_option("--methods", sw.methods, "Methods (default: all)");
  s->add_option("--seeds", sw.seeds, "Number of training seeds")->default_val(10);
  s->add_option("--first-seed", sw.first_seed, "First training seed");
  s->add_option("--out", sw.out, "Directory for sweep.json");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << "\n\n";
    const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return 2;
  }

  try {
    if (g->parsed()) return cmd_gen(gen, out);
    if (t->parsed()) return cmd_train(tr, out, err);
    if (e->parsed()) return cmd_eval(ev, out);
    if (gc->parsed()) return cmd_gradcheck(gr, out, err);
    if (s->parsed()) return cmd_sweep(sw, out);
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace can
