#include "fairscrub_cli/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

#include "json.hpp"
#include "fairscrub/checkpoint.hpp"
#include "fairscrub/datagen.hpp"
#include "fairscrub/error.hpp"
#include "fairscrub/experiment.hpp"
#include "fairscrub/repdump.hpp"
#include "fairscrub/rng.hpp"

namespace fs = std::filesystem;

namespace fairscrub::cli {
namespace {

const char* kSplitNames[] = {"train", "dev", "test"};

struct AblationArm {
  const char* model;
  const char* label;
  bool entropy;
  bool delta;
};

const AblationArm kAblation[] = {
    {"ablation-entropy", "entropy only", true, false},
    {"ablation-delta", "delta only", false, true},
    {"ablation-both", "entropy + delta", true, true},
};

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  make_dirs(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_metric(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

fs::path data_dir(const Options& o) { return o.out / "data"; }
fs::path model_dir(const Options& o, const std::string& name) { return o.out / "models" / name; }
fs::path checkpoint_path(const Options& o, const std::string& name) {
  return model_dir(o, name) / "checkpoint.json";
}

/// Split files carry labels only, so arities come from the run metadata.
Dataset load_split(const Options& o, const std::string& name) {
  const auto meta_path = data_dir(o) / "meta.json";
  const auto path = data_dir(o) / (name + ".jsonl");
  if (!fs::exists(path) || !fs::exists(meta_path)) {
    throw UsageError("missing dataset " + path.string() + " (run 'generate' first)");
  }
  Dataset d = read_jsonl(path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_text(meta_path));
    d.num_targets = meta.at("num_targets").get<std::size_t>();
    d.protected_arities = meta.at("protected_arities").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed " + meta_path.string() + ": " + e.what());
  }
  if (d.size() == 0) {
    d.x = Matrix(0, meta.value("dim", std::size_t{0}));
    d.z.assign(d.protected_arities.size(), {});
  }
  d.validate();
  return d;
}

std::vector<std::size_t> attribute_list(const Options& o, const Dataset& d) {
  std::vector<std::size_t> out;
  if (o.attrs.empty()) {
    for (std::size_t a = 0; a <= d.num_attrs(); ++a) out.push_back(a);
    return out;
  }
  for (const auto& name : o.attrs) {
    const auto a = parse_attribute(name);
    if (a > d.num_attrs()) throw UsageError("attribute " + name + " not present in the data");
    out.push_back(a);
  }
  return out;
}

std::vector<RepresentationTap> tap_list(const Options& o) {
  if (o.taps.empty()) return {std::begin(kAllTaps), std::end(kAllTaps)};
  std::vector<RepresentationTap> out;
  for (const auto& t : o.taps) out.push_back(parse_tap(t));
  return out;
}

std::string model_for_tap(const Options& o, RepresentationTap t) {
  switch (t) {
    case RepresentationTap::PretrainedEncoder: return "pretrained";
    case RepresentationTap::FinetunedEncoder: return o.finetuned_model;
    case RepresentationTap::AdsEncoder:
    case RepresentationTap::AdsScrubbed: return o.ads_model;
  }
  return "";
}

ModelDims base_dims(const Options& o) {
  ModelDims dims;
  dims.embed = o.embed;
  dims.scrubbed = o.scrubbed;
  dims.hidden = o.hidden;
  return dims;
}

std::string summarize(const SplitResult& parts, std::optional<std::size_t> skipped) {
  std::ostringstream s;
  const Dataset* sets[] = {&parts.train, &parts.dev, &parts.test};
  for (int i = 0; i < 3; ++i) s << kSplitNames[i] << ": " << sets[i]->size() << "\n";
  for (std::size_t a = 0; a <= parts.train.num_attrs(); ++a) {
    s << "marginal " << attribute_name(a) << ":";
    std::vector<std::size_t> counts(parts.train.arity(a), 0);
    for (const Dataset* d : sets) {
      const auto c = label_counts(*d, a);
      for (std::size_t k = 0; k < c.size(); ++k) counts[k] += c[k];
    }
    for (auto c : counts) s << " " << c;
    s << "\n";
  }
  s << "stratified: " << (parts.stratified ? "yes" : "no") << "\n";
  if (skipped) s << "skipped: " << *skipped << "\n";
  return s.str();
}

void shuffle_attribute(Dataset& d, std::size_t attr, std::uint64_t seed) {
  std::vector<Label>& labels = attr == 0 ? d.y : d.z[attr - 1];
  Rng rng(derive_seed(seed, "shuffle-control", attr));
  rng.shuffle(std::span<Label>(labels));
}

struct ProbeEntry {
  std::string model;
  std::string tap;
  std::string attribute;
  ProbeReport report;
};

std::vector<ProbeEntry> collect_probes(const fs::path& dir) {
  std::vector<ProbeEntry> out;
  std::vector<fs::path> models;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory()) models.push_back(e.path());
  }
  std::sort(models.begin(), models.end());
  for (const auto& m : models) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(m)) {
      if (e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      const auto stem = f.stem().string();
      const auto sep = stem.find("__");
      if (sep == std::string::npos) continue;
      out.push_back({m.filename().string(), stem.substr(0, sep), stem.substr(sep + 2),
                     ProbeReport::from_json(read_text(f))});
    }
  }
  return out;
}

const ProbeEntry* find_probe(const std::vector<ProbeEntry>& entries, const std::string& model,
                             const std::string& tap, const std::string& attr) {
  for (const auto& e : entries) {
    if (e.model == model && e.tap == tap && e.attribute == attr) return &e;
  }
  return nullptr;
}

std::string table_for(const std::vector<ProbeEntry>& entries,
                      const std::vector<std::pair<std::string, std::pair<std::string, std::string>>>& rows,
                      std::vector<std::string>& missing) {
  std::set<std::string> attr_set;
  for (const auto& e : entries) {
    if (e.attribute.find("shuffled") == std::string::npos) attr_set.insert(e.attribute);
  }
  std::vector<std::string> attrs(attr_set.begin(), attr_set.end());
  std::sort(attrs.begin(), attrs.end(), [](const std::string& a, const std::string& b) {
    return parse_attribute(a) < parse_attribute(b);
  });
  std::vector<std::string> names;
  std::vector<std::vector<ProbeReport>> reports;
  for (const auto& [label, key] : rows) {
    std::vector<ProbeReport> line;
    for (const auto& a : attrs) {
      const auto* e = find_probe(entries, key.first, key.second, a);
      if (!e) {
        missing.push_back("probes/" + key.first + "/" + key.second + "__" + a + ".json");
        break;
      }
      line.push_back(e->report);
    }
    if (line.size() != attrs.size()) continue;
    names.push_back(label);
    reports.push_back(std::move(line));
  }
  if (names.empty()) return "";
  return render_table(names, reports);
}

}  // namespace

int cmd_generate(const Options& o, std::ostream& out, std::ostream&) {
  Dataset data;
  std::optional<std::size_t> skipped;
  if (!o.tsv.empty()) {
    std::ifstream in(o.tsv);
    if (!in) throw IoError("cannot open " + o.tsv);
    auto r = featurize_text(in, o.hash_dim, derive_seed(o.seed, "featurize"));
    data = std::move(r.data);
    skipped = r.skipped;
  } else {
    SynthSpec spec;
    spec.n = o.examples;
    spec.dim = o.dim;
    spec.y_arity = o.y_arity;
    spec.z_arities = o.z_arities;
    spec.y_strength = o.y_strength;
    spec.z_strengths = o.z_strengths;
    spec.overlap = o.overlap;
    spec.noise_sigma = o.noise_sigma;
    spec.seed = derive_seed(o.seed, "data");
    data = generate(spec);
  }
  if (o.split.size() != 3) throw ConfigError("split needs three ratios (train,dev,test)");
  const auto parts = split(data, {o.split[0], o.split[1], o.split[2]}, derive_seed(o.seed, "split"));
  const Dataset* sets[] = {&parts.train, &parts.dev, &parts.test};
  for (int i = 0; i < 3; ++i) {
    make_dirs(data_dir(o));
    write_jsonl(data_dir(o) / (std::string(kSplitNames[i]) + ".jsonl"), *sets[i]);
  }
  nlohmann::ordered_json meta;
  meta["dim"] = data.dim();
  meta["num_targets"] = data.num_targets;
  meta["protected_arities"] = data.protected_arities;
  meta["seed"] = o.seed;
  write_text(data_dir(o) / "meta.json", meta.dump(2) + "\n");
  const auto summary = summarize(parts, skipped);
  write_text(data_dir(o) / "summary.txt", summary);
  out << summary;
  return 0;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  const Dataset full = load_split(o, "train");
  const Regime regime = parse_regime(o.regime);
  const std::string name = o.name.empty() ? std::string(regime_name(regime)) : o.name;
  if (name == "pretrained") throw UsageError("model name 'pretrained' is reserved");

  Dataset data = full;
  if (!o.protect.empty()) {
    std::vector<std::size_t> keep;
    for (const auto& a : o.protect) {
      const auto idx = parse_attribute(a);
      if (idx == 0) throw UsageError("the target y cannot be a protected attribute");
      keep.push_back(idx);
    }
    data = full.select_attributes(keep);
  }

  TrainConfig cfg;
  cfg.regime = regime;
  cfg.loss.lambda1 = o.lambda1;
  cfg.loss.lambda2 = o.lambda2;
  cfg.loss.tau = o.tau;
  cfg.loss.gumbel_noise = !o.no_gumbel;
  cfg.loss.num_attrs = data.num_attrs();
  cfg.learning_rate = o.lr;
  cfg.epochs = o.epochs;
  cfg.batch_size = o.batch_size;
  cfg.seed = o.seed;
  cfg.adamw.weight_decay = o.weight_decay;
  cfg.disc_steps = o.disc_steps;
  cfg.clip_norm = o.clip_norm;
  try {
    cfg.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  if (regime == Regime::Ads && o.lambda2 > 0) {
    for (std::size_t a = 1; a <= data.num_attrs(); ++a) {
      if (data.arity(a) == 2) {
        err << "warning: lambda2 > 0 with binary protected attribute "
            << (o.protect.empty() ? attribute_name(a) : o.protect[a - 1])
            << "; the delta loss adds little for K=2\n";
      }
    }
  }

  const ModelDims base = base_dims(o);
  make_dirs(model_dir(o, "pretrained"));
  make_dirs(model_dir(o, name));
  save_checkpoint(checkpoint_path(o, "pretrained"), initial_model(dims_for(full, base), o.seed),
                  {{"regime", "pretrained"}, {"seed", std::to_string(o.seed)}});

  auto result = train(initial_model(dims_for(data, base), o.seed), data, cfg);

  std::map<std::string, std::string> meta{
      {"regime", std::string(regime_name(regime))},
      {"seed", std::to_string(o.seed)},
      {"lambda1", fmt_double(o.lambda1)},
      {"lambda2", fmt_double(o.lambda2)},
      {"tau", fmt_double(o.tau)},
      {"learning_rate", fmt_double(o.lr)},
      {"epochs", std::to_string(o.epochs)},
      {"batch_size", std::to_string(o.batch_size)},
      {"disc_steps", std::to_string(o.disc_steps)},
  };
  std::string protect;
  for (std::size_t a = 0; a < o.protect.size(); ++a) protect += (a ? "," : "") + o.protect[a];
  meta["protect"] = o.protect.empty() ? "all" : protect;
  save_checkpoint(checkpoint_path(o, name), result.model, meta);
  result.trace.write_csv(model_dir(o, name) / "trace.csv");

  out << "trained " << name << " (" << regime_name(regime) << "): "
      << result.trace.records.size() << " updates";
  if (!result.trace.records.empty()) {
    const auto& last = result.trace.records.back();
    out << ", final L_c " << fmt_metric(last.task_loss);
    if (last.disc_loss) out << ", L_d " << fmt_metric(*last.disc_loss);
  }
  out << "\n";
  return 0;
}

int cmd_probe(const Options& o, std::ostream& out, std::ostream&) {
  const Dataset data = load_split(o, o.eval_split);
  const auto taps = tap_list(o);
  const auto attrs = attribute_list(o, data);

  ProbeSettings settings;
  settings.seed = derive_seed(o.seed, "probe");
  settings.threads = probe_threads_from_env();
  settings.with_mdl = !o.no_mdl;
  if (!o.schedule.empty()) settings.schedule = FractionSchedule::parse(o.schedule);

  std::map<std::string, AdsModel> models;
  for (auto t : taps) {
    const auto name = model_for_tap(o, t);
    if (models.count(name)) continue;
    const auto path = checkpoint_path(o, name);
    if (!fs::exists(path)) {
      throw UsageError("tap " + std::string(tap_name(t)) + " needs checkpoint " + path.string() +
                       " (run 'train' first)");
    }
    models.emplace(name, load_checkpoint(path).model);
  }

  for (auto t : taps) {
    const auto name = model_for_tap(o, t);
    const AdsModel& model = models.at(name);
    for (auto a : attrs) {
      ProbeReport report;
      std::string attr = attribute_name(a);
      if (o.shuffle_labels) {
        Dataset shuffled = data;
        shuffle_attribute(shuffled, a, o.seed);
        report = probe_tap(model, shuffled, t, a, settings);
        attr += "-shuffled";
        report.attribute = attr;
      } else {
        report = probe_tap(model, data, t, a, settings);
      }
      const auto file = o.out / "probes" / name / (std::string(tap_name(t)) + "__" + attr + ".json");
      write_text(file, report.to_json());
      out << name << " " << tap_name(t) << " " << attr << ": F1 " << fmt_metric(report.f1);
      if (report.delta_z) out << ", delta_z " << fmt_metric(*report.delta_z);
      if (settings.with_mdl) out << ", MDL " << fmt_metric(report.mdl_bits) << " bits";
      out << "\n";
    }
  }
  return 0;
}

int cmd_ablate(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.lambda1 <= 0 || o.lambda2 <= 0) {
    throw ConfigError("ablate needs lambda1 > 0 and lambda2 > 0");
  }
  for (const auto& arm : kAblation) {
    Options a = o;
    a.regime = "ads";
    a.name = arm.model;
    a.lambda1 = arm.entropy ? o.lambda1 : 0.0;
    a.lambda2 = arm.delta ? o.lambda2 : 0.0;
    a.ads_model = arm.model;
    a.taps = {std::string(tap_name(RepresentationTap::AdsScrubbed))};
    a.shuffle_labels = false;
    if (int rc = cmd_train(a, out, err)) return rc;
    if (int rc = cmd_probe(a, out, err)) return rc;
  }
  return 0;
}

int cmd_report(const Options& o, std::ostream& out, std::ostream&) {
  const auto probes = o.out / "probes";
  std::vector<ProbeEntry> entries;
  if (fs::is_directory(probes)) entries = collect_probes(probes);
  if (entries.empty()) {
    throw UsageError("nothing to report: no probe outputs under " + probes.string() +
                     " (run 'probe' first)");
  }
  const auto dir = o.out / "report";

  std::ostringstream csv;
  csv << "model,tap,attribute,metric,value\n";
  for (const auto& e : entries) {
    const auto& r = e.report;
    const std::pair<const char*, std::optional<double>> metrics[] = {
        {"f1", r.f1},
        {"precision", r.precision},
        {"recall", r.recall},
        {"accuracy", r.accuracy},
        {"delta_z", r.delta_z},
        {"mdl_bits", r.mdl_bits},
        {"normalized_mdl", r.normalized_mdl},
    };
    for (const auto& [metric, value] : metrics) {
      csv << e.model << ',' << e.tap << ',' << e.attribute << ',' << metric << ','
          << (value ? fmt_metric(*value) : "NA") << '\n';
    }
  }
  write_text(dir / "results.csv", csv.str());

  std::vector<std::string> missing;
  std::vector<std::pair<std::string, std::pair<std::string, std::string>>> main_rows;
  for (auto t : kAllTaps) {
    main_rows.push_back({std::string(tap_name(t)), {model_for_tap(o, t), std::string(tap_name(t))}});
  }
  const auto table = table_for(entries, main_rows, missing);
  write_text(dir / "table.txt", table);

  bool any_ablation = false;
  std::vector<std::pair<std::string, std::pair<std::string, std::string>>> ablation_rows;
  for (const auto& arm : kAblation) {
    ablation_rows.push_back({arm.label, {arm.model, "ads-scrubbed"}});
    for (const auto& e : entries) any_ablation = any_ablation || e.model == arm.model;
  }
  std::string ablation;
  if (any_ablation) {
    ablation = table_for(entries, ablation_rows, missing);
    write_text(dir / "ablation.txt", ablation);
  }

  // Raw representations on the evaluation split for external plotting.
  const auto data_path = data_dir(o) / (o.eval_split + ".jsonl");
  if (fs::exists(data_path)) {
    const Dataset data = load_split(o, o.eval_split);
    std::set<std::pair<std::string, std::string>> dumped;
    for (const auto& e : entries) {
      if (!dumped.insert({e.model, e.tap}).second) continue;
      const auto ckpt = checkpoint_path(o, e.model);
      if (!fs::exists(ckpt)) {
        missing.push_back(ckpt.lexically_relative(o.out).string());
        continue;
      }
      const auto model = load_checkpoint(ckpt).model;
      make_dirs(dir / "reps");
      write_rep_dump(dir / "reps" / (e.model + "__" + e.tap + ".f64"),
                     tap(model, data.x, parse_tap(e.tap)));
    }
    for (std::size_t a = 0; a <= data.num_attrs(); ++a) {
      const auto labels = data.labels(a);
      write_labels_csv(dir / "reps" / ("labels_" + attribute_name(a) + ".csv"),
                       std::vector<Label>(labels.begin(), labels.end()));
    }
  } else {
    missing.push_back(data_path.lexically_relative(o.out).string());
  }

  out << table;
  if (!ablation.empty()) out << "\n" << ablation;
  std::sort(missing.begin(), missing.end());
  missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
  for (const auto& m : missing) out << "absent: " << m << "\n";
  out << "wrote " << (dir / "results.csv").string() << "\n";
  return 0;
}

int cmd_run(const Options& o, std::ostream& out, std::ostream& err) {
  if (int rc = cmd_generate(o, out, err)) return rc;
  for (const std::string regime : {"no-adversary", "ads"}) {
    Options t = o;
    t.regime = regime;
    t.name = regime == "ads" ? o.ads_model : o.finetuned_model;
    if (int rc = cmd_train(t, out, err)) return rc;
  }
  if (int rc = cmd_probe(o, out, err)) return rc;
  return cmd_report(o, out, err);
}

}  // namespace fairscrub::cli
