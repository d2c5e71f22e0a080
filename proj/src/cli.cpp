#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "corrpair/experiments.hpp"
#include "corrpair/parallel.hpp"

namespace corrpair {

namespace {

enum Exit { kOk = 0, kValidation = 1, kRuntime = 2, kUsage = 64 };

struct Options {
  std::string config_path;
  std::string run_dir;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::string out;
  std::string format = "json";
  bool allow_large = false;
};

// Loads the config and applies command-line overrides. Missing files are runtime failures.
struct Loaded {
  int code = kOk;
  ExperimentConfig config;
};

Loaded load_config(const Options& o) {
  Loaded l;
  if (!std::filesystem::exists(o.config_path)) {
    std::cerr << "error: config not found: " << o.config_path << '\n';
    l.code = kRuntime;
    return l;
  }
  Json doc;
  try {
    doc = read_json_file(o.config_path);
  } catch (const std::exception& e) {
    std::cerr << "error: cannot parse " << o.config_path << ": " << e.what() << '\n';
    l.code = kValidation;
    return l;
  }
  try {
    l.config = ExperimentConfig::from_json(doc);
  } catch (const std::exception& e) {
    std::cerr << "error: invalid config: " << e.what() << '\n';
    l.code = kValidation;
    return l;
  }
  if (o.seed) l.config.master_seed = *o.seed;
  if (!o.out.empty()) l.config.output_dir = o.out;
  return l;
}

bool check(const ExperimentConfig& c, const Options& o, bool quiet) {
  RunLimits limits;
  limits.allow_large = o.allow_large;
  const ValidationReport rep = validate_config(c, limits);
  for (const auto& ch : rep.checks) {
    if (!ch.passed)
      std::cerr << "FAIL " << ch.name << ": " << ch.detail << '\n';
    else if (!quiet)
      std::cout << "ok   " << ch.name << '\n';
  }
  return rep.ok();
}

std::string csv_cell(const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_float()) {
    std::ostringstream os;
    os << std::setprecision(17) << v.get<double>();
    return os.str();
  }
  return v.dump();
}

// Flattens per_n[].points[] (or per_n[] itself) into CSV rows.
std::string summary_csv(const Json& results) {
  std::vector<Json> rows;
  if (results.contains("per_n")) {
    for (const auto& entry : results.at("per_n")) {
      if (entry.contains("points")) {
        for (const auto& p : entry.at("points")) {
          Json r = p;
          r["n"] = entry.at("n");
          rows.push_back(r);
        }
      } else {
        rows.push_back(entry);
      }
    }
  }
  std::vector<std::string> cols;
  std::set<std::string> seen;
  for (const auto& r : rows)
    for (auto it = r.begin(); it != r.end(); ++it)
      if (!it.value().is_structured() && seen.insert(it.key()).second) cols.push_back(it.key());
  std::ostringstream os;
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (i) os << ',';
      if (r.contains(cols[i])) os << csv_cell(r.at(cols[i]));
    }
    os << '\n';
  }
  return os.str();
}

void print_summary(const Json& summary_doc, const std::string& format) {
  if (format == "csv")
    std::cout << summary_csv(summary_doc.at("results"));
  else
    std::cout << summary_doc.dump(2) << '\n';
}

void append_registry(const ExperimentRecord& rec, const std::string& dir) {
  const auto parent = std::filesystem::absolute(dir).parent_path();
  std::ofstream reg(parent / "registry.jsonl", std::ios::app);
  reg << Json{{"dir", std::filesystem::absolute(dir).string()},
              {"experiment", rec.config.at("experiment")},
              {"config_hash", rec.config_hash}}
             .dump()
      << '\n';
}

int cmd_validate(const Options& o) {
  Loaded l = load_config(o);
  if (l.code != kOk) return l.code;
  return check(l.config, o, false) ? kOk : kValidation;
}

int cmd_run(const Options& o) {
  Loaded l = load_config(o);
  if (l.code != kOk) return l.code;
  if (!check(l.config, o, true)) return kValidation;
  try {
    const ExperimentRecord rec = run_experiment(l.config);
    rec.write(l.config.output_dir);
    append_registry(rec, l.config.output_dir);
    print_summary(rec.summary_document(), o.format);
  } catch (const std::exception& e) {
    std::cerr << "error: run failed: " << e.what() << '\n';
    return kRuntime;
  }
  return kOk;
}

int cmd_sweep(const Options& o) {
  Loaded l = load_config(o);
  if (l.code != kOk) return l.code;
  if (!check(l.config, o, true)) return kValidation;
  const ExperimentConfig base = l.config;
  Json index = Json::array();
  try {
    for (int n : base.n_list) {
      ExperimentConfig c = base;
      c.n_list = {n};
      c.output_dir = (std::filesystem::path(base.output_dir) / ("n_" + std::to_string(n))).string();
      const ExperimentRecord rec = run_experiment(c);
      rec.write(c.output_dir);
      index.push_back(Json{{"n", n}, {"dir", "n_" + std::to_string(n)}, {"config_hash", rec.config_hash}});
      std::cerr << "n=" << n << " done in " << rec.wall_clock_seconds << " s\n";
    }
    write_text_file((std::filesystem::path(base.output_dir) / "sweep.json").string(),
                    Json{{"schema", 1}, {"config_hash", base.hash()}, {"runs", index}}.dump(2) + "\n");
  } catch (const std::exception& e) {
    std::cerr << "error: sweep failed: " << e.what() << '\n';
    return kRuntime;
  }
  std::cout << index.dump(2) << '\n';
  return kOk;
}

int cmd_report(const Options& o) {
  const std::filesystem::path dir(o.run_dir);
  if (!std::filesystem::exists(dir / "config.json") || !std::filesystem::exists(dir / "summary.json")) {
    std::cerr << "error: not a run directory: " << o.run_dir << '\n';
    return kRuntime;
  }
  Json config, summary;
  try {
    config = read_json_file((dir / "config.json").string());
    summary = read_json_file((dir / "summary.json").string());
  } catch (const std::exception& e) {
    std::cerr << "error: cannot read run: " << e.what() << '\n';
    return kRuntime;
  }
  const std::string hash = hex64(json_hash(config));
  if (summary.value("config_hash", std::string()) != hash) {
    std::cerr << "error: config hash mismatch (summary " << summary.value("config_hash", std::string("?"))
              << ", config " << hash << ")\n";
    return kValidation;
  }
  print_summary(summary, o.format);
  return kOk;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Correlated random matrix pair experiments"};
  app.set_version_flag("--version", software_version());
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "override master_seed");
    sub->add_option("--threads", o.threads, "OpenMP threads (0 keeps the default)")->check(CLI::NonNegativeNumber);
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--format", o.format, "stdout format")->check(CLI::IsMember({"csv", "json"}));
    sub->add_flag("--allow-large", o.allow_large, "lift the N and sample caps");
  };
  auto* validate = app.add_subcommand("validate", "check a config");
  validate->add_option("config", o.config_path)->required();
  auto* run = app.add_subcommand("run", "run one experiment");
  run->add_option("config", o.config_path)->required();
  auto* sweep = app.add_subcommand("sweep", "run each N into its own directory");
  sweep->add_option("config", o.config_path)->required();
  auto* report = app.add_subcommand("report", "print a stored summary");
  report->add_option("run_dir", o.run_dir)->required();
  for (auto* sub : {validate, run, sweep, report}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }
  for (auto* sub : {validate, run, sweep, report})
    if (sub->count("--seed")) o.seed = seed;
  set_threads(o.threads);

  if (*validate) return cmd_validate(o);
  if (*run) return cmd_run(o);
  if (*sweep) return cmd_sweep(o);
  return cmd_report(o);
}

}  // namespace corrpair
