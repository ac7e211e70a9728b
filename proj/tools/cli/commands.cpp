#include "commands.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "coopseg/coop.hpp"
#include "coopseg/dataset.hpp"
#include "coopseg/error.hpp"
#include "coopseg/gradcheck.hpp"
#include "coopseg/model_io.hpp"
#include "coopseg/rng.hpp"
#include "coopseg/spec_io.hpp"
#include "coopseg/trainer.hpp"
#include "gradcheck_f64.hpp"

namespace coopseg::cli {

namespace {

namespace fs = std::filesystem;

const std::set<std::string> kRunKeys{"command", "version", "command_line", "data_hash", "val_hash", "test_hash"};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join(const std::vector<std::string>& v, const char* sep = ",") {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
  return s;
}

std::string quote_arg(const std::string& a) {
  if (!a.empty() && a.find_first_of(" \t\"'") == std::string::npos) return a;
  std::string q = "'";
  for (char c : a) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return q + "'";
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open '" + path.string() + "' for writing");
  f << text;
  if (!f) throw DataError("write to '" + path.string() + "' failed");
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory '" + dir.string() + "': " + ec.message());
}

// Manifest lines are `key = value`, readable back through --config.
class Manifest {
 public:
  Manifest(std::string command, const std::vector<std::string>& argv) {
    add("command", std::move(command));
    add("version", std::string(kVersion));
    std::vector<std::string> quoted;
    for (const auto& a : argv) quoted.push_back(quote_arg(a));
    add("command_line", "\"" + join(quoted, " ") + "\"");
  }
  void add(const std::string& key, const std::string& value) { lines_ += key + " = " + value + '\n'; }
  void add(const std::string& key, std::uint64_t value) { add(key, std::to_string(value)); }
  void add(const std::string& key, double value) { add(key, fmt_double(value)); }
  void add(const std::string& key, bool value) { add(key, std::string(value ? "true" : "false")); }
  void write(const fs::path& path) const { write_text(path, "# coopseg run manifest\n" + lines_); }

 private:
  std::string lines_;
};

struct DataFlags {
  std::uint32_t n = 100, h = 64, w = 64, k = 4, min_shapes = 3, max_shapes = 6;
  double noise = 0.1;
  std::uint64_t seed = 1;
  std::string split = "train";
  std::string out = "dataset.cseg";
};

struct TrainFlags {
  std::string method = "single";
  std::string taps;
  std::string target;
  bool detach = false;
  std::uint32_t epochs = 30, batch = 8, crop = 32, eval_crop = 0, eval_every = 0;
  double lr = 0.05, momentum = 0.9, clip_norm = 5.0;
  std::uint64_t seed = 1;
  std::string data, val, spec_file, out = "run";
};

struct CompareFlags {
  TrainFlags train;
  std::string seeds = "1,2,3";
  std::string test;
  std::string same_taps, multi_taps;
  unsigned jobs = 1;
};

struct EvalFlags {
  std::string model, data, head, out;
  std::uint32_t crop = 0, batch = 8;
};

struct GradcheckFlags {
  bool detach = false;
  std::string corrupt_op;
  std::uint64_t seed = 1234;
  int precision = 32;
};

void add_train_options(CLI::App* app, TrainFlags& f, bool single_run) {
  if (single_run) {
    app->add_option("--method", f.method, "single|ensemble|same|multi")
        ->check(CLI::IsMember({"single", "ensemble", "same", "multi"}))
        ->capture_default_str();
    app->add_option("--taps", f.taps, "Comma-separated tap names (same: receiving blocks; multi: sources)");
    app->add_option("--target", f.target, "Receiving block for multi");
  }
  app->add_flag("--detach", f.detach, "Cut bottom-loss gradients at every connection");
  app->add_option("--epochs", f.epochs)->capture_default_str();
  app->add_option("--lr", f.lr)->capture_default_str();
  app->add_option("--momentum", f.momentum)->capture_default_str();
  app->add_option("--clip-norm", f.clip_norm, "Joint gradient-norm limit per step, 0 = off")->capture_default_str();
  app->add_option("--batch", f.batch)->capture_default_str();
  app->add_option("--crop", f.crop, "Square training crop")->capture_default_str();
  app->add_option("--eval-crop", f.eval_crop, "Square centre crop for evaluation, 0 = full image")
      ->capture_default_str();
  app->add_option("--eval-every", f.eval_every, "Validation interval in epochs, 0 = final epoch only")
      ->capture_default_str();
  if (single_run) app->add_option("--seed", f.seed)->capture_default_str();
  app->add_option("--data", f.data, "Training dataset")->required();
  if (single_run) app->add_option("--val", f.val, "Validation dataset");
  app->add_option("--spec-file", f.spec_file, "Network description");
  app->add_option("--out", f.out, "Output directory")->capture_default_str();
  app->add_option("--config", "Flat key = value file; flags on the command line win");
}

NetworkSpec spec_for(const TrainFlags& f, const Dataset& d) {
  NetworkSpec spec = f.spec_file.empty() ? default_spec(static_cast<int>(d.channels), static_cast<int>(d.num_classes))
                                         : load_spec_file(f.spec_file);
  if (spec.in_channels != static_cast<int>(d.channels) || spec.num_classes != static_cast<int>(d.num_classes)) {
    throw ConfigError("network expects " + std::to_string(spec.in_channels) + " channels and " +
                      std::to_string(spec.num_classes) + " classes; dataset has " + std::to_string(d.channels) +
                      " and " + std::to_string(d.num_classes));
  }
  return spec;
}

// Resolves --taps/--target against the network, materialising defaults.
ConnectionScheme scheme_for(Method m, const std::string& taps, const std::string& target, bool detach,
                            const NetworkSpec& spec) {
  ConnectionScheme s = default_scheme(m, spec);
  if (m == Method::SameLayer && !taps.empty()) s = ConnectionScheme::same_layer(split_commas(taps));
  if (m == Method::MultiLayer) {
    auto& ml = std::get<MultiLayerScheme>(s.variant);
    s = ConnectionScheme::multi_layer(taps.empty() ? ml.sources : split_commas(taps),
                                      target.empty() ? ml.target : target);
  }
  if ((m == Method::Single || m == Method::Ensemble) && (!taps.empty() || !target.empty())) {
    throw ConfigError("--taps/--target only apply to --method same or multi");
  }
  if (m != Method::MultiLayer && !target.empty()) throw ConfigError("--target only applies to --method multi");
  if (detach && !(m == Method::SameLayer || m == Method::MultiLayer)) {
    throw ConfigError("--detach only applies to --method same or multi");
  }
  s.detach_gradients = detach;
  validate_scheme(spec, s);
  return s;
}

void add_scheme_lines(Manifest& m, const ConnectionScheme& s, const char* taps_key) {
  if (const auto* sl = std::get_if<SameLayerScheme>(&s.variant)) m.add(taps_key, join(sl->taps));
  if (const auto* ml = std::get_if<MultiLayerScheme>(&s.variant)) {
    m.add(taps_key, join(ml->sources));
    m.add("target", ml->target);
  }
}

void add_train_lines(Manifest& m, const TrainFlags& f) {
  m.add("detach", f.detach);
  m.add("epochs", std::uint64_t{f.epochs});
  m.add("lr", f.lr);
  m.add("momentum", f.momentum);
  m.add("clip-norm", f.clip_norm);
  m.add("batch", std::uint64_t{f.batch});
  m.add("crop", std::uint64_t{f.crop});
  m.add("eval-crop", std::uint64_t{f.eval_crop});
  m.add("eval-every", std::uint64_t{f.eval_every});
  m.add("data", f.data);
  m.add("data_hash", file_hash(f.data));
  if (!f.spec_file.empty()) m.add("spec-file", f.spec_file);
  m.add("out", f.out);
}

TrainConfig train_config(const TrainFlags& f) {
  TrainConfig tc;
  tc.epochs = f.epochs;
  tc.batch = f.batch;
  tc.lr = f.lr;
  tc.momentum = f.momentum;
  tc.clip_norm = f.clip_norm;
  tc.crop = f.crop;
  tc.eval_crop = f.eval_crop;
  tc.eval_every = f.eval_every;
  tc.seed = f.seed;
  return tc;
}

int cmd_gen_data(const DataFlags& f, const std::vector<std::string>& argv, std::ostream& out) {
  static const std::map<std::string, std::uint64_t> kSplitOffset{{"train", 0}, {"val", 1}, {"test", 2}};
  DatasetConfig cfg;
  cfg.n_samples = f.n;
  cfg.height = f.h;
  cfg.width = f.w;
  cfg.num_classes = f.k;
  cfg.min_shapes = f.min_shapes;
  cfg.max_shapes = f.max_shapes;
  cfg.noise = f.noise;
  cfg.seed = f.seed + kSplitOffset.at(f.split);
  const Dataset d = generate_dataset(cfg);
  save_dataset(f.out, d);

  Manifest m("gen-data", argv);
  m.add("n", std::uint64_t{f.n});
  m.add("h", std::uint64_t{f.h});
  m.add("w", std::uint64_t{f.w});
  m.add("k", std::uint64_t{f.k});
  m.add("min-shapes", std::uint64_t{f.min_shapes});
  m.add("max-shapes", std::uint64_t{f.max_shapes});
  m.add("noise", f.noise);
  m.add("seed", f.seed);
  m.add("split", f.split);
  m.add("out", f.out);
  m.add("data_hash", file_hash(f.out));
  m.write(f.out + ".manifest");
  out << "wrote " << f.out << " (" << d.size() << " samples, " << dataset_file_size(d) << " bytes)\n";
  return kOk;
}

int cmd_train(const TrainFlags& f, const std::vector<std::string>& argv, std::ostream& out) {
  const Dataset train_set = load_dataset(f.data);
  const Dataset val_set = f.val.empty() ? train_set : load_dataset(f.val);
  const NetworkSpec spec = spec_for(f, train_set);
  const Method method = parse_method(f.method);

  TrainConfig tc = train_config(f);
  tc.scheme = scheme_for(method, f.taps, f.target, f.detach, spec);
  tc.validate(train_set);

  CoopModel model = build_for_seed(spec, tc.scheme, tc.seed);
  RunRecord rec = train(model, train_set, val_set, tc);
  if (f.val.empty()) {
    for (auto& e : rec.evals) e.split = "train";
  }

  const fs::path dir(f.out);
  ensure_dir(dir);
  write_text(dir / "losses.csv", losses_csv_header() + '\n' + losses_csv_rows(rec, method_name(method), tc.seed));
  std::string eval = eval_csv_header(train_set.num_classes) + '\n';
  for (const auto& e : rec.evals) eval += eval_csv_row(e) + '\n';
  write_text(dir / "eval.csv", eval);
  save_model((dir / "model.bin").string(), model);

  Manifest m("train", argv);
  m.add("method", f.method);
  add_scheme_lines(m, tc.scheme, "taps");
  m.add("seed", f.seed);
  add_train_lines(m, f);
  if (!f.val.empty()) {
    m.add("val", f.val);
    m.add("val_hash", file_hash(f.val));
  }
  m.write(dir / "manifest.txt");

  const auto& last = rec.losses.empty() ? EpochLoss{} : rec.losses.back();
  out << method_name(method) << " seed " << tc.seed << ": " << rec.losses.size() << " epochs, final loss "
      << format_metric(last.total) << '\n';
  for (const auto& e : rec.evals) {
    if (e.epoch == tc.epochs) out << "  " << e.head << " mIoU " << format_metric(e.miou) << '\n';
  }
  out << "outputs in " << dir.string() << '\n';
  return kOk;
}

int cmd_eval(const EvalFlags& f, const std::vector<std::string>& argv, std::ostream& out) {
  const CoopModel model = load_model(f.model);
  const Dataset data = load_dataset(f.data);
  if (model.spec.in_channels != static_cast<int>(data.channels) ||
      model.spec.num_classes != static_cast<int>(data.num_classes)) {
    throw DataError("model and dataset disagree on channels or classes");
  }
  const Method method = model.scheme.method();
  const HeadKind head = f.head.empty() ? primary_head(method) : parse_head(f.head);
  EvalOptions opts;
  opts.crop = f.crop;
  opts.batch = f.batch;
  opts.seed = model.top.seed();
  opts.split = "eval";
  const EvalReport r = evaluate(model, data, head, opts);
  const std::string csv = eval_csv_header(data.num_classes) + '\n' + eval_csv_row(r) + '\n';
  if (f.out.empty()) {
    out << csv;
    return kOk;
  }
  write_text(f.out, csv);
  Manifest m("eval", argv);
  m.add("model", f.model);
  m.add("data", f.data);
  m.add("data_hash", file_hash(f.data));
  m.add("head", std::string(head_name(head)));
  m.add("crop", std::uint64_t{f.crop});
  m.add("batch", std::uint64_t{f.batch});
  m.add("out", f.out);
  m.write(f.out + ".manifest");
  out << head_name(head) << " mIoU " << format_metric(r.miou) << '\n';
  return kOk;
}

int cmd_compare(const CompareFlags& f, const std::vector<std::string>& argv, std::ostream& out) {
  const Dataset train_set = load_dataset(f.train.data);
  const Dataset test_set = load_dataset(f.test);
  const NetworkSpec spec = spec_for(f.train, train_set);

  CompareConfig cc;
  cc.base = train_config(f.train);
  cc.seeds.clear();
  for (const auto& s : split_commas(f.seeds)) {
    try {
      std::size_t used = 0;
      cc.seeds.push_back(std::stoull(s, &used));
      if (used != s.size()) throw std::invalid_argument(s);
    } catch (const std::logic_error&) {
      throw ConfigError("--seeds: '" + s + "' is not an unsigned integer");
    }
  }
  cc.detach = f.train.detach;
  cc.same = scheme_for(Method::SameLayer, f.same_taps, "", f.train.detach, spec);
  cc.multi = scheme_for(Method::MultiLayer, f.multi_taps, f.train.target, f.train.detach, spec);
  cc.jobs = f.jobs;
  const CompareResult r = compare(spec, train_set, test_set, cc);

  const fs::path dir(f.train.out);
  ensure_dir(dir);
  const std::string table = comparison_csv(r);
  write_text(dir / "comparison.csv", table);
  write_text(dir / "eval.csv", comparison_evals_csv(r, train_set.num_classes));
  std::string losses = losses_csv_header() + '\n';
  for (const auto& c : r.cells) losses += losses_csv_rows(c.record, method_name(c.method), c.seed);
  write_text(dir / "losses.csv", losses);

  Manifest m("compare", argv);
  m.add("seeds", f.seeds);
  add_scheme_lines(m, *cc.same, "same-taps");
  add_scheme_lines(m, *cc.multi, "multi-taps");
  add_train_lines(m, f.train);
  m.add("test", f.test);
  m.add("test_hash", file_hash(f.test));
  m.add("jobs", std::uint64_t{f.jobs});
  m.write(dir / "manifest.txt");

  out << table;
  return kOk;
}

int cmd_gradcheck(const GradcheckFlags& f, std::ostream& out) {
  std::vector<OpResult> ops;
  if (f.precision == 64) {
    ops = run_gradient_suite_f64(f.seed, f.corrupt_op);
  } else {
    GradcheckOptions opts = default_gradcheck_options();
    opts.seed = f.seed;
    if (!f.corrupt_op.empty()) opts.corrupt_op = f.corrupt_op;
    for (const auto& o : run_gradient_suite(opts)) {
      ops.push_back({o.op, o.worst_rel_error, o.tolerance, o.coordinates, o.pass});
    }
  }
  if (!f.corrupt_op.empty()) {
    bool known = false;
    for (const auto& o : ops) known = known || o.op == f.corrupt_op;
    if (!known) throw ConfigError("--corrupt-op: no op named '" + f.corrupt_op + "'");
  }

  bool ok = true;
  char line[160];
  out << "finite differences (" << f.precision << "-bit)\n";
  for (const auto& o : ops) {
    std::snprintf(line, sizeof line, "  %-22s worst rel err %.3e  tol %.0e  %zu coords  %s\n", o.op.c_str(),
                  o.worst_rel_error, o.tolerance, o.coordinates, o.pass ? "ok" : "FAIL");
    out << line;
    if (!o.pass) {
      ok = false;
      out << "  gradient check failed for op " << o.op << '\n';
    }
  }
  out << "gradient isolation\n";
  for (const auto& c : run_isolation_suite(f.seed)) {
    if (f.detach && !c.detach) continue;
    std::snprintf(line, sizeof line, "  %-9s detach=%d  |dL1/dbottom| = %.6g  |dL2/dtop| = %.6g  %s\n",
                  c.scheme.c_str(), c.detach ? 1 : 0, c.loss1_bottom_norm, c.loss2_top_norm,
                  c.pass ? "ok" : "FAIL");
    out << line;
    if (!c.pass) {
      ok = false;
      out << "  isolation failed for " << c.scheme << ": expected " << c.expectation << '\n';
    }
  }
  out << (ok ? "all checks passed\n" : "gradcheck FAILED\n");
  return ok ? kOk : kNumericalFailure;
}

}  // namespace

std::uint64_t default_seed(std::uint64_t fallback) {
  const char* env = std::getenv("COOPSEG_SEED");
  if (!env || !*env) return fallback;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(env, &used);
    if (used == std::string(env).size()) return v;
  } catch (const std::logic_error&) {
  }
  throw ConfigError(std::string("COOPSEG_SEED='") + env + "' is not an unsigned integer");
}

std::string file_hash(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path + "'");
  Fnv1a h;
  char buf[1 << 16];
  while (f) {
    f.read(buf, sizeof buf);
    h.update(buf, static_cast<std::size_t>(f.gcount()));
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h.value()));
  return hex;
}

std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config '" + path + "'");
  std::vector<std::pair<std::string, std::string>> out;
  int lineno = 0;
  for (std::string line; std::getline(f, line);) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

std::vector<std::string> merge_config(const std::vector<std::string>& argv) {
  std::string config;
  std::set<std::string> given;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < argv.size(); ++i) {
    const std::string& a = argv[i];
    if (a == "--config" && i + 1 < argv.size()) {
      config = argv[++i];
      continue;
    }
    if (a.rfind("--config=", 0) == 0) {
      config = a.substr(9);
      continue;
    }
    if (a.rfind("--", 0) == 0) given.insert(a.substr(2, a.find('=') - 2));
    rest.push_back(a);
  }
  if (config.empty()) return argv;

  std::vector<std::string> extra;
  for (const auto& [key, value] : read_config_file(config)) {
    if (kRunKeys.count(key) || given.count(key)) continue;
    if (value == "true") {
      extra.push_back("--" + key);
    } else if (value != "false") {
      extra.push_back("--" + key + "=" + value);
    }
  }
  // Config flags go right after the subcommand name.
  std::vector<std::string> merged(rest.begin(), rest.begin() + std::min<std::size_t>(2, rest.size()));
  merged.insert(merged.end(), extra.begin(), extra.end());
  if (rest.size() > 2) merged.insert(merged.end(), rest.begin() + 2, rest.end());
  return merged;
}

int run(const std::vector<std::string>& argv_in, std::ostream& out, std::ostream& err) {
  CLI::App app{"coopseg: cooperative segmentation networks with one-way feature sharing"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  DataFlags data;
  TrainFlags train;
  CompareFlags cmp;
  EvalFlags ev;
  GradcheckFlags gc;
  std::uint64_t env_seed = 1;
  try {
    env_seed = default_seed(1);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  data.seed = train.seed = env_seed;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic shapes dataset");
  gen->set_help_flag("--help", "Print this help message and exit");  // --h is the height
  gen->add_option("--n", data.n, "Number of samples")->capture_default_str();
  gen->add_option("--h", data.h, "Height, divisible by 4")->capture_default_str();
  gen->add_option("--w", data.w, "Width, divisible by 4")->capture_default_str();
  gen->add_option("--k", data.k, "Classes including background")->capture_default_str();
  gen->add_option("--min-shapes", data.min_shapes)->capture_default_str();
  gen->add_option("--max-shapes", data.max_shapes)->capture_default_str();
  gen->add_option("--noise", data.noise, "Gaussian pixel noise stddev")->capture_default_str();
  gen->add_option("--seed", data.seed)->capture_default_str();
  gen->add_option("--split", data.split, "train|val|test; offsets the seed by 0|1|2")
      ->check(CLI::IsMember({"train", "val", "test"}))
      ->capture_default_str();
  gen->add_option("--out", data.out)->capture_default_str();
  gen->add_option("--config", "Flat key = value file; flags on the command line win");

  auto* tr = app.add_subcommand("train", "Train one model and write losses, evals and parameters");
  add_train_options(tr, train, true);

  auto* ev_cmd = app.add_subcommand("eval", "Score a saved model on a dataset");
  ev_cmd->add_option("--model", ev.model)->required();
  ev_cmd->add_option("--data", ev.data)->required();
  ev_cmd->add_option("--head", ev.head, "top|bottom|ensemble (default: the method's scored head)")
      ->check(CLI::IsMember({"top", "bottom", "ensemble"}));
  ev_cmd->add_option("--crop", ev.crop, "Square centre crop, 0 = full image")->capture_default_str();
  ev_cmd->add_option("--batch", ev.batch)->capture_default_str();
  ev_cmd->add_option("--out", ev.out, "CSV path (default: stdout)");
  ev_cmd->add_option("--config", "Flat key = value file; flags on the command line win");

  auto* cmp_cmd = app.add_subcommand("compare", "Train all four methods on every seed and tabulate test mIoU");
  add_train_options(cmp_cmd, cmp.train, false);
  cmp_cmd->add_option("--test", cmp.test, "Test dataset")->required();
  cmp_cmd->add_option("--seeds", cmp.seeds)->capture_default_str();
  cmp_cmd->add_option("--same-taps", cmp.same_taps, "Receiving blocks for the same-layer rows");
  cmp_cmd->add_option("--multi-taps", cmp.multi_taps, "Source blocks for the multi-layer rows");
  cmp_cmd->add_option("--target", cmp.train.target, "Receiving block for the multi-layer rows");
  cmp_cmd->add_option("--jobs", cmp.jobs, "Parallel training runs")->capture_default_str()->check(CLI::Range(1u, 256u));

  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference and gradient-isolation checks");
  gc_cmd->add_flag("--detach", gc.detach, "Report only the detached isolation cases");
  gc_cmd->add_option("--corrupt-op", gc.corrupt_op, "Test fixture: perturb this op's analytic gradient");
  gc_cmd->add_option("--seed", gc.seed)->capture_default_str();
  gc_cmd->add_option("--precision", gc.precision, "32 or 64")->check(CLI::IsMember({32, 64}))->capture_default_str();

  std::vector<std::string> argv;
  try {
    argv = merge_config(argv_in);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  std::vector<const char*> cargv;
  for (const auto& a : argv) cargv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(data, argv_in, out);
    if (tr->parsed()) return cmd_train(train, argv_in, out);
    if (ev_cmd->parsed()) return cmd_eval(ev, argv_in, out);
    if (cmp_cmd->parsed()) return cmd_compare(cmp, argv_in, out);
    if (gc_cmd->parsed()) return cmd_gradcheck(gc, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsage;
}

}  // namespace coopseg::cli
