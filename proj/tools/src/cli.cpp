#include "cli.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "agdc/checkpoint.hpp"
#include "agdc/drc.hpp"
#include "agdc/error.hpp"
#include "agdc/generator.hpp"
#include "agdc/precision.hpp"
#include "agdc/synthgen.hpp"
#include "agdc/trainer.hpp"

namespace agdc::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error("sha256: digest init failed");
  }
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

namespace {

constexpr const char* kManifest = "manifest.json";

/// Per-run state shared by every command.
struct Run {
  std::string command;
  std::uint64_t seed = 0;
  fs::path out_dir;
  std::map<std::string, std::string> kv;
  json config = json::object();
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;

  void input(const std::string& path) {
    if (!fs::is_regular_file(path)) throw FormatError("missing input file " + path);
    inputs.push_back(path);
  }
  std::string output(const std::string& name) {
    outputs.push_back(name);
    return (out_dir / name).string();
  }
  /// Rejects config keys no command consumed.
  void finish_config() const {
    if (!kv.empty()) throw ConfigError("unknown config key '" + kv.begin()->first + "' for " + command);
  }
};

bool given(const CLI::App& sub, const std::string& name) {
  const CLI::Option* o = sub.get_option_no_throw(name);
  return o != nullptr && o->count() > 0;
}

template <typename T>
void take_kv(std::map<std::string, std::string>& kv, const std::string& key, T& dst) {
  auto it = kv.find(key);
  if (it == kv.end()) return;
  std::istringstream in(it->second);
  T v{};
  if (!(in >> v) || !(in >> std::ws).eof()) throw ConfigError("config: bad value for " + key);
  dst = v;
  kv.erase(it);
}

void take_kv(std::map<std::string, std::string>& kv, const std::string& key, std::string& dst) {
  auto it = kv.find(key);
  if (it == kv.end()) return;
  dst = it->second;
  kv.erase(it);
}

// --- synth -----------------------------------------------------------------

struct SynthArgs {
  int count = 100;
  double shrink = 10.0;
  int min_devices = 20;
  int max_units = 0;
  std::string order = "layer-then-raster";
};

void cmd_synth(Run& run, SynthArgs a, const CLI::App& sub, std::ostream& out) {
  SynthArgs cfg;
  take_kv(run.kv, "count", cfg.count);
  take_kv(run.kv, "shrink", cfg.shrink);
  take_kv(run.kv, "min_devices", cfg.min_devices);
  take_kv(run.kv, "max_units", cfg.max_units);
  take_kv(run.kv, "order", cfg.order);
  run.finish_config();
  if (!given(sub, "--count")) a.count = cfg.count;
  if (!given(sub, "--shrink")) a.shrink = cfg.shrink;
  if (!given(sub, "--min-devices")) a.min_devices = cfg.min_devices;
  if (!given(sub, "--max-units")) a.max_units = cfg.max_units;
  if (!given(sub, "--order")) a.order = cfg.order;

  SynthConfig sc;
  sc.count = a.count;
  sc.shrink = a.shrink;
  sc.min_devices = a.min_devices;
  sc.max_units = a.max_units;
  sc.seed = run.seed;
  const UnitOrder order = parse_unit_order(a.order);
  run.config = {{"count", a.count}, {"shrink", a.shrink}, {"min_devices", a.min_devices},
                {"max_units", a.max_units}, {"order", to_string(order)}, {"seed", run.seed}};

  const auto layouts = generate_layouts(sc);
  const SchemaSpec spec = layout_schema();
  save_layouts(run.output("layouts.jsonl"), layouts);
  save_sequences(run.output("sequences.jsonl"), layouts_to_sequences(layouts, spec, order), spec);
  out << "wrote " << layouts.size() << " layouts to " << run.out_dir.string() << '\n';
}

// --- train -----------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::optional<int> epochs;
  std::optional<long> max_steps;
  std::optional<double> lr;
  std::optional<int> batch_size;
  std::optional<int> diffusion_steps;
  std::optional<std::string> schedule;
};

void cmd_train(Run& run, const TrainArgs& a, std::ostream& out) {
  TrainConfig tc;
  ModelConfig mc;
  DiffusionConfig dc;
  tc.seed = run.seed;
  mc.seed = run.seed;
  apply_config(tc, run.kv);
  apply_config(mc, run.kv);
  apply_config(dc, run.kv);
  run.finish_config();
  tc.seed = run.seed;
  if (a.epochs) tc.epochs = *a.epochs;
  if (a.max_steps) tc.max_steps = *a.max_steps;
  if (a.lr) tc.learning_rate = *a.lr;
  if (a.batch_size) tc.batch_size = *a.batch_size;
  if (a.diffusion_steps) dc.steps = *a.diffusion_steps;
  if (a.schedule) dc.kind = parse_schedule_kind(*a.schedule);
  tc.validate();
  mc.validate();
  dc.validate();

  run.input(a.data);
  const SchemaSpec spec = layout_schema();
  const auto data = load_sequences(a.data, spec);
  Model model(spec, mc, dc);
  const std::string text = to_config_text(tc, mc, dc);
  std::istringstream resolved(text);
  for (const auto& [k, v] : parse_key_values(resolved)) run.config[k] = v;

  const TrainResult result = train(model, data, tc, [&](const EpochMetrics& m) {
    out << "epoch " << m.epoch << " step " << m.step << " L_d " << m.ce << " L_c " << m.cont << " L_len "
        << m.length << " |E-L| " << m.length_error << '\n';
  });
  save_checkpoint(run.output("model.ckpt"), model);
  {
    std::ofstream csv(run.output("metrics.csv"));
    write_metrics_csv(csv, result.metrics);
  }
  {
    std::ofstream cfg(run.output("train_config.txt"));
    cfg << text;
  }
  if (result.diverged) throw NumericError("training diverged: " + result.message);
  out << "trained " << result.steps << " steps; checkpoint " << (run.out_dir / "model.ckpt").string() << '\n';
}

// --- generate / complete ---------------------------------------------------

struct GenArgs {
  std::string model;
  std::string data;
  int count = 16;
  int max_len = 0;
  double temperature = 1.0;
  std::string sampler = "ancestral";
  int stride = 1;
  int prefix_len = -1;
  int limit = 0;
};

GenConfig gen_config(Run& run, GenArgs& a, const CLI::App& sub, const Model& model) {
  GenArgs cfg = a;
  take_kv(run.kv, "count", cfg.count);
  take_kv(run.kv, "max_len", cfg.max_len);
  take_kv(run.kv, "temperature", cfg.temperature);
  take_kv(run.kv, "sampler", cfg.sampler);
  take_kv(run.kv, "stride", cfg.stride);
  take_kv(run.kv, "prefix_len", cfg.prefix_len);
  run.finish_config();
  if (!given(sub, "--count")) a.count = cfg.count;
  if (!given(sub, "--max-len")) a.max_len = cfg.max_len;
  if (!given(sub, "--temperature")) a.temperature = cfg.temperature;
  if (!given(sub, "--sampler")) a.sampler = cfg.sampler;
  if (!given(sub, "--stride")) a.stride = cfg.stride;
  if (!given(sub, "--prefix-len")) a.prefix_len = cfg.prefix_len;

  GenConfig g;
  g.max_len = a.max_len > 0 ? a.max_len : std::min(64, model.model_config().max_len);
  g.temperature = a.temperature;
  g.sampler = parse_sampler_mode(a.sampler);
  g.stride = a.stride;
  g.seed = run.seed;
  g.validate(model);
  run.config = {{"max_len", g.max_len},     {"temperature", g.temperature}, {"sampler", to_string(g.sampler)},
                {"stride", g.stride},       {"seed", run.seed},             {"eos_alpha", model.eos_alpha()}};
  return g;
}

bool is_layout_schema(const SchemaSpec& spec) { return spec.cont_dim() == 4 && spec.num_classes() == 3; }

void cmd_generate(Run& run, GenArgs a, const CLI::App& sub, std::ostream& out) {
  run.input(a.model);
  const auto model = load_checkpoint(a.model);
  const GenConfig g = gen_config(run, a, sub, *model);
  if (a.count < 0) throw ConfigError("generate: --count must be >= 0");
  run.config["count"] = a.count;
  const auto samples = generate_many(*model, a.count, g);
  std::vector<UnitSequence> seqs;
  for (const auto& s : samples) seqs.push_back(s.sequence);
  const SchemaSpec& spec = model->schema();
  save_sequences(run.output("samples.jsonl"), seqs, spec);
  {
    std::ofstream csv(run.output("samples.csv"));
    write_generation_csv(csv, samples, spec);
  }
  if (is_layout_schema(spec)) {
    save_layouts(run.output("samples_layouts.jsonl"), sequences_to_layouts(seqs, spec, true));
  }
  out << "generated " << samples.size() << " sequences\n";
}

void cmd_complete(Run& run, GenArgs a, const CLI::App& sub, std::ostream& out) {
  run.input(a.model);
  run.input(a.data);
  const auto model = load_checkpoint(a.model);
  GenConfig g = gen_config(run, a, sub, *model);
  const SchemaSpec& spec = model->schema();
  auto refs = load_sequences(a.data, spec);
  if (a.limit > 0 && static_cast<std::size_t>(a.limit) < refs.size()) refs.resize(static_cast<std::size_t>(a.limit));
  run.config["prefix_len"] = a.prefix_len;
  run.config["limit"] = a.limit;

  std::vector<UnitSequence> prefixes;
  std::vector<std::size_t> prefix_lengths;
  for (const auto& r : refs) {
    const auto content = r.content(spec);
    const std::size_t k = a.prefix_len >= 0 ? static_cast<std::size_t>(a.prefix_len) : content.size() / 2;
    if (k > content.size()) throw ConfigError("complete: --prefix-len exceeds a reference length");
    prefixes.push_back(make_sequence(spec, {content.begin(), content.begin() + static_cast<std::ptrdiff_t>(k)}, false));
    prefix_lengths.push_back(k);
  }
  const auto results = complete_batch(*model, prefixes, g);
  std::vector<UnitSequence> seqs;
  std::ofstream csv(run.output("completions.csv"));
  csv << "index,prefix_length,length,truncated,error\n";
  int failed = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    if (r.result) {
      seqs.push_back(r.result->sequence);
      csv << i << ',' << prefix_lengths[i] << ',' << r.result->sequence.length(spec) << ','
          << (r.result->truncated ? 1 : 0) << ",\n";
    } else {
      ++failed;
      std::string msg = r.error;
      for (char& ch : msg) {
        if (ch == ',' || ch == '\n') ch = ' ';
      }
      csv << i << ',' << prefix_lengths[i] << ",,," << msg << '\n';
    }
  }
  save_sequences(run.output("completions.jsonl"), seqs, spec);
  out << "completed " << seqs.size() << " of " << results.size() << " prefixes";
  if (failed > 0) out << " (" << failed << " failed; see completions.csv)";
  out << '\n';
}

// --- eval-drc / precision / quantize / length-stats ------------------------

struct DrcArgs {
  std::string layouts;
  std::string anchor = "lower-left";
  int device_threshold = 20;
};

void cmd_eval_drc(Run& run, DrcArgs a, const CLI::App& sub, std::ostream& out) {
  DrcArgs cfg = a;
  take_kv(run.kv, "anchor", cfg.anchor);
  take_kv(run.kv, "device_threshold", cfg.device_threshold);
  DrcConfig dc;
  take_kv(run.kv, "eps", dc.eps);
  take_kv(run.kv, "min_h_sep", dc.min_h_sep);
  take_kv(run.kv, "min_v_sep", dc.min_v_sep);
  run.finish_config();
  if (!given(sub, "--anchor")) a.anchor = cfg.anchor;
  if (!given(sub, "--device-threshold")) a.device_threshold = cfg.device_threshold;
  if (a.anchor == "lower-left") {
    dc.anchor = Anchor::lower_left;
  } else if (a.anchor == "center") {
    dc.anchor = Anchor::center;
  } else {
    throw ConfigError("unknown anchor '" + a.anchor + "' (expected lower-left or center)");
  }
  dc.device_threshold = a.device_threshold;
  dc.validate();
  run.config = {{"eps", dc.eps}, {"min_h_sep", dc.min_h_sep}, {"min_v_sep", dc.min_v_sep},
                {"device_threshold", dc.device_threshold}, {"anchor", a.anchor}};

  run.input(a.layouts);
  const auto summary = evaluate(load_layouts(a.layouts), dc);
  {
    std::ofstream j(run.output("drc_report.json"));
    write_report_json(j, summary);
  }
  {
    std::ofstream c(run.output("drc_report.csv"));
    write_report_csv(c, summary);
  }
  out << std::setprecision(6) << "samples " << summary.samples.size() << " CLC " << summary.clc << " PDC "
      << summary.pdc << " HSC " << summary.hsc << " VSC " << summary.vsc << '\n';
}

void cmd_precision(Run& run, double xmax, double dx, std::ostream& out) {
  run.finish_config();
  const double bits = precision_bits(xmax, dx);
  const std::uint64_t vocab = required_vocab(bits);
  run.config = {{"xmax", xmax}, {"dx", dx}};
  {
    std::ofstream j(run.output("precision.json"));
    j << json{{"xmax", xmax}, {"dx", dx}, {"precision_bits", bits}, {"required_vocab", vocab}}.dump(2) << '\n';
  }
  out << std::fixed << std::setprecision(4) << "precision_bits " << bits << '\n'
      << "required_vocab " << vocab << '\n';
}

void cmd_quantize(Run& run, const std::string& layouts, int bits, std::ostream& out) {
  run.finish_config();
  run.input(layouts);
  run.config = {{"bits", bits}};
  const auto q = quantize_dataset(load_layouts(layouts), bits);
  save_layouts(run.output("quantized.jsonl"), q);
  out << "quantized " << q.size() << " layouts to " << bits << " bits\n";
}

void cmd_length_stats(Run& run, const std::string& generated, const std::string& reference, std::ostream& out) {
  run.finish_config();
  run.input(generated);
  run.input(reference);
  const SchemaSpec spec = layout_schema();
  const LengthStats s = length_stats(load_sequences(generated, spec), load_sequences(reference, spec), spec);
  {
    std::ofstream j(run.output("length_stats.json"));
    j << json{{"mu", s.mu}, {"sigma", s.sigma}, {"count", s.count}}.dump(2) << '\n';
  }
  out << "mu " << s.mu << " sigma " << s.sigma << " n " << s.count << '\n';
}

// --- manifest / replay -----------------------------------------------------

/// Arguments as recorded for replay: --out dropped, existing files made absolute.
std::vector<std::string> recorded_args(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a == "--out") {
      ++i;
      continue;
    }
    if (a.rfind("--out=", 0) == 0) continue;
    const auto eq = a.find('=');
    if (a.rfind("--", 0) == 0 && eq != std::string::npos) {
      const std::string value = a.substr(eq + 1);
      out.push_back(fs::is_regular_file(value) ? a.substr(0, eq + 1) + fs::absolute(value).string() : a);
    } else {
      out.push_back(fs::is_regular_file(a) ? fs::absolute(a).string() : a);
    }
  }
  return out;
}

void write_manifest(const Run& run, const std::vector<std::string>& args, double seconds, const std::string& error) {
  json inputs = json::array();
  for (const auto& p : run.inputs) inputs.push_back({{"path", fs::absolute(p).string()}, {"sha256", sha256_file(p)}});
  json outputs = json::array();
  for (const auto& name : run.outputs) {
    const fs::path p = run.out_dir / name;
    if (fs::is_regular_file(p)) outputs.push_back({{"path", name}, {"sha256", sha256_file(p.string())}});
  }
  json m{{"command", run.command},
         {"argv", recorded_args(args)},
         {"seed", run.seed},
         {"out_dir", fs::absolute(run.out_dir).string()},
         {"config", run.config},
         {"inputs", inputs},
         {"outputs", outputs},
         {"duration_seconds", seconds},
         {"status", error.empty() ? "ok" : "error"}};
  if (!error.empty()) m["error"] = error;
  std::ofstream f(run.out_dir / kManifest);
  f << m.dump(2) << '\n';
}

int cmd_replay(Run& run, const std::string& manifest_path, std::ostream& out, std::ostream& err) {
  json m;
  try {
    std::ifstream in(manifest_path);
    if (!in) throw FormatError("cannot open manifest " + manifest_path);
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  for (const auto& input : m.at("inputs")) {
    const std::string path = input.at("path").get<std::string>();
    if (!fs::is_regular_file(path)) throw FormatError("replay: input " + path + " is missing");
    if (sha256_file(path) != input.at("sha256").get<std::string>()) {
      throw FormatError("replay: input " + path + " changed since the recorded run");
    }
  }
  std::vector<std::string> args = m.at("argv").get<std::vector<std::string>>();
  args.push_back("--out");
  args.push_back(run.out_dir.string());
  const int status = agdc::cli::run(args, out, err);
  if (status != 0) return status;

  int mismatches = 0;
  for (const auto& o : m.at("outputs")) {
    const std::string name = o.at("path").get<std::string>();
    const fs::path p = run.out_dir / name;
    const bool same = fs::is_regular_file(p) && sha256_file(p.string()) == o.at("sha256").get<std::string>();
    out << (same ? "identical " : "DIFFERENT ") << name << '\n';
    if (!same) ++mismatches;
  }
  if (mismatches > 0) {
    err << "replay: " << mismatches << " output(s) differ from the manifest\n";
    return 1;
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hybrid discrete-continuous sequence generation toolkit"};
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::uint64_t seed = 0;
  std::string config_path;
  std::string out_dir;
  app.add_option("--seed", seed, "Random seed");
  app.add_option("--config", config_path, "Key-value config file");
  app.add_option("--out", out_dir, "Output directory (default: $AGDC_OUT_DIR or .)");

  SynthArgs synth;
  auto* s_synth = app.add_subcommand("synth", "Generate rule-satisfying synthetic layouts and sequences");
  s_synth->add_option("--count", synth.count, "Number of layouts");
  s_synth->add_option("--shrink", synth.shrink, "Divide per-layer count statistics by this factor");
  s_synth->add_option("--min-devices", synth.min_devices, "Lower clip for device counts");
  s_synth->add_option("--max-units", synth.max_units, "Redraw layouts with more rects (0: no limit)");
  s_synth->add_option("--order", synth.order, "Unit order: layer-then-raster or raster");

  TrainArgs tr;
  auto* s_train = app.add_subcommand("train", "Train a model on sequence JSONL");
  s_train->add_option("--data", tr.data, "Training sequences (JSONL)")->required();
  s_train->add_option("--epochs", tr.epochs, "Epochs");
  s_train->add_option("--max-steps", tr.max_steps, "Stop after this many steps");
  s_train->add_option("--lr", tr.lr, "Learning rate");
  s_train->add_option("--batch-size", tr.batch_size, "Sequences per batch");
  s_train->add_option("--diffusion-steps", tr.diffusion_steps, "Diffusion timesteps T");
  s_train->add_option("--schedule", tr.schedule, "Noise schedule: cosine or linear");

  GenArgs gen;
  auto* s_gen = app.add_subcommand("generate", "Sample sequences from a checkpoint");
  GenArgs comp;
  auto* s_comp = app.add_subcommand("complete", "Complete prefixes of reference sequences");
  for (auto [sub, g] : {std::pair{s_gen, &gen}, std::pair{s_comp, &comp}}) {
    sub->add_option("--model", g->model, "Checkpoint")->required();
    sub->add_option("--max-len", g->max_len, "Maximum content units (0: min(64, model max_len))");
    sub->add_option("--temperature", g->temperature, "Categorical sampling temperature");
    sub->add_option("--sampler", g->sampler, "Diffusion sampler: ancestral or ddim");
    sub->add_option("--stride", g->stride, "Diffusion timestep stride");
  }
  s_gen->add_option("--count", gen.count, "Number of samples");
  s_comp->add_option("--data", comp.data, "Reference sequences (JSONL)")->required();
  s_comp->add_option("--prefix-len", comp.prefix_len, "Prefix units (default: half of each reference)");
  s_comp->add_option("--limit", comp.limit, "Use only the first N references (0: all)");

  DrcArgs drc;
  auto* s_drc = app.add_subcommand("eval-drc", "Design-rule metrics for layout JSONL");
  s_drc->add_option("--layouts", drc.layouts, "Layouts (JSONL)")->required();
  s_drc->add_option("--anchor", drc.anchor, "Spacing anchor: lower-left or center");
  s_drc->add_option("--device-threshold", drc.device_threshold, "Device count below which HSC/VSC are penalized");

  double xmax = 0.0;
  double dx = 0.0;
  auto* s_prec = app.add_subcommand("precision", "Precision bits and per-value vocabulary size");
  s_prec->add_option("--xmax", xmax, "Domain maximum")->required();
  s_prec->add_option("--dx", dx, "Minimum spacing")->required();

  std::string q_layouts;
  int bits = 0;
  auto* s_quant = app.add_subcommand("quantize", "Snap layout coordinates to a b-bit grid");
  s_quant->add_option("--layouts", q_layouts, "Layouts (JSONL)")->required();
  s_quant->add_option("--bits", bits, "Bits b")->required();

  std::string generated;
  std::string reference;
  auto* s_len = app.add_subcommand("length-stats", "Gaussian fit of generated minus reference lengths");
  s_len->add_option("--generated", generated, "Generated sequences (JSONL)")->required();
  s_len->add_option("--reference", reference, "Reference sequences (JSONL)")->required();

  std::string manifest;
  auto* s_replay = app.add_subcommand("replay", "Rerun a command from its manifest and compare outputs");
  s_replay->add_option("--manifest", manifest, "manifest.json of the original run")->required();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  Run run;
  run.command = app.get_subcommands().front()->get_name();
  run.seed = seed;
  if (out_dir.empty()) {
    const char* env = std::getenv("AGDC_OUT_DIR");
    out_dir = env != nullptr && *env != '\0' ? env : ".";
  }
  run.out_dir = out_dir;

  const auto start = std::chrono::steady_clock::now();
  std::string error;
  int status = 0;
  try {
    fs::create_directories(run.out_dir);
    if (!config_path.empty()) {
      run.input(config_path);
      run.kv = load_key_values(config_path);
    }
    if (s_synth->parsed()) cmd_synth(run, synth, *s_synth, out);
    if (s_train->parsed()) cmd_train(run, tr, out);
    if (s_gen->parsed()) cmd_generate(run, gen, *s_gen, out);
    if (s_comp->parsed()) cmd_complete(run, comp, *s_comp, out);
    if (s_drc->parsed()) cmd_eval_drc(run, drc, *s_drc, out);
    if (s_prec->parsed()) cmd_precision(run, xmax, dx, out);
    if (s_quant->parsed()) cmd_quantize(run, q_layouts, bits, out);
    if (s_len->parsed()) cmd_length_stats(run, generated, reference, out);
    if (s_replay->parsed()) return cmd_replay(run, manifest, out, err);
  } catch (const std::exception& e) {
    error = e.what();
    err << "error: " << error << '\n';
    status = 1;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  try {
    if (fs::is_directory(run.out_dir)) write_manifest(run, args, seconds, error);
  } catch (const std::exception& e) {
    err << "error: cannot write manifest: " << e.what() << '\n';
    status = 1;
  }
  return status;
}

}  // namespace agdc::cli
