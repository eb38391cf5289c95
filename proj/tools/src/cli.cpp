#include "padrl/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "padrl/config.hpp"
#include "padrl/metrics.hpp"
#include "padrl/svg.hpp"

namespace padrl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

LogLevel parse_log_level(std::string_view name) {
  if (name == "quiet") return LogLevel::quiet;
  if (name == "error") return LogLevel::error;
  if (name == "info") return LogLevel::info;
  if (name == "debug") return LogLevel::debug;
  throw std::invalid_argument("unknown log level '" + std::string(name) + "' (quiet, error, info, debug)");
}

LogLevel log_level_from_env() {
  const char* v = std::getenv("PADRL_LOG");
  if (v == nullptr || *v == '\0') return LogLevel::info;
  try {
    return parse_log_level(v);
  } catch (const std::invalid_argument&) {
    return LogLevel::info;
  }
}

void Logger::write(LogLevel at, std::string_view tag, std::string_view msg) const {
  if (static_cast<int>(at) > static_cast<int>(level_)) return;
  *sink_ << "[padrl] " << tag << ": " << msg << '\n';
}

std::string error_line(const CommandError& e) {
  json j = {{"error", e.code}, {"message", e.what()}};
  if (!e.problems.empty()) j["problems"] = e.problems;
  return j.dump();
}

namespace {

constexpr const char* kDerivation =
    "derive_seed(root, {stage, step, 0}) prompts; {stage, step, 1, slot, i} rollouts; {stage, step, 2} selection";


std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CommandError("io", "cannot create output directory '" + dir.string() + "': " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw CommandError("io", "cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw CommandError("io", "failed writing '" + path.string() + "'");
}

json read_json_file(const fs::path& path, const std::string& missing_code) {
  std::ifstream f(path);
  if (!f) throw CommandError(missing_code, "cannot open '" + path.string() + "'");
  json doc = json::parse(f, nullptr, false);
  if (doc.is_discarded()) throw CommandError("parse", "'" + path.string() + "' is not valid JSON");
  return doc;
}

bool is_manifest(const json& doc) { return doc.is_object() && doc.contains("run_id") && doc.contains("config"); }

json manifest(const std::string& id, const std::string& command, const ExperimentConfig& cfg,
              const json& seeds, const std::string& started, const std::vector<std::string>& artifacts) {
  return {{"run_id", id},
          {"command", command},
          {"version", std::string(version())},
          {"config", to_json(cfg)},
          {"seeds", seeds},
          {"started_at", started},
          {"finished_at", utc_now()},
          {"artifacts", artifacts}};
}

json train_seeds(const ExperimentConfig& cfg) {
  return {{"root", cfg.seed}, {"derivation", kDerivation}};
}

}  // namespace

ExperimentConfig load_config(const fs::path& path, const std::vector<std::string>& overrides) {
  json doc = read_json_file(path, "config_not_found");
  if (is_manifest(doc)) doc = doc["config"];
  for (const auto& o : overrides) {
    try {
      apply_override(doc, o);
    } catch (const std::exception& e) {
      throw CommandError("override_invalid", e.what());
    }
  }
  try {
    return config_from_json(doc);
  } catch (const ConfigError& e) {
    throw CommandError("config_invalid", "invalid config '" + path.string() + "': " + join(e.problems, "; "),
                       e.problems);
  }
}

std::string run_id(const fs::path& config_path, const ExperimentConfig& cfg) {
  return config_path.stem().string() + "-" + hex16(config_hash(cfg));
}

void cmd_train(const TrainOptions& opts, const Logger& log) {
  const auto cfg = load_config(opts.config, opts.overrides);
  const auto id = run_id(opts.config, cfg);
  const auto started = utc_now();
  make_dir(opts.out);
  log.info("train " + id + ": " + std::to_string(cfg.stages.size()) + " stage(s) -> " + opts.out.string());

  CurriculumResult result;
  try {
    result = run_curriculum(cfg, initial_policy(cfg), opts.out);
  } catch (const TrainingDiverged& e) {
    const auto& c = e.checkpoint;
    throw CommandError("diverged", "training diverged in stage " + std::to_string(c.stage_index) + " (" + c.stage +
                                       ") at step " + std::to_string(c.step) + "; diagnostic checkpoint in '" +
                                       opts.out.string() + "'");
  } catch (const std::exception& e) {
    throw CommandError("io", e.what());
  }

  std::vector<std::string> artifacts;
  for (const auto& p : result.artifacts) artifacts.push_back(p.filename().string());
  for (std::size_t i = 0; i < result.stages.size(); ++i) {
    const auto& m = result.stages[i].metrics;
    log.info("stage " + std::to_string(i) + " " + std::string(to_string(cfg.stages[i].name)) +
             ": terminal accuracy " + format_number(terminal_accuracy(m)) + ", auc " +
             format_number(accuracy_auc(m)));
  }
  artifacts.push_back("manifest.json");
  write_text(opts.out / "manifest.json",
             manifest(id, "train", cfg, train_seeds(cfg), started, artifacts).dump(2) + "\n");
}

void cmd_ablate(const AblateOptions& opts, const Logger& log) {
  if (opts.strategies.size() < 2) throw CommandError("usage", "ablate needs at least 2 strategies");
  if (opts.seeds.empty()) throw CommandError("usage", "ablate needs at least 1 seed");
  std::vector<Strategy> strategies;
  std::set<Strategy> seen;
  for (const auto& name : opts.strategies) {
    Strategy s{};
    try {
      s = parse_strategy(name);
    } catch (const std::invalid_argument& e) {
      throw CommandError("unknown_strategy", e.what());
    }
    if (!seen.insert(s).second) throw CommandError("usage", "strategy '" + name + "' given twice");
    strategies.push_back(s);
  }

  const auto cfg = load_config(opts.config, opts.overrides);
  const auto id = run_id(opts.config, cfg);
  const auto started = utc_now();
  if (cfg.stages.size() > 1) log.info("config has several stages; ablating stage 0 only");
  const StageConfig& base = cfg.stages.front();
  make_dir(opts.out);
  log.info("ablate " + id + ": " + std::to_string(strategies.size()) + " strategies x " +
           std::to_string(opts.seeds.size()) + " seeds");

  AblationResult res;
  try {
    res = run_ablation(base, initial_policy(cfg), strategies, opts.seeds, opts.threads);
  } catch (const TrainingDiverged& e) {
    throw CommandError("diverged", std::string("ablation run diverged: ") + e.what());
  }

  std::vector<std::string> artifacts;
  const auto& cols = metrics_columns();
  svg::Panel panel{"Reward accuracy (mean over seeds)", "step", "reward accuracy", {}};
  for (std::size_t si = 0; si < strategies.size(); ++si) {
    const std::string name(to_string(strategies[si]));
    std::ostringstream csv;
    CsvTable t;
    t.header.push_back("seed");
    t.header.insert(t.header.end(), cols.begin(), cols.end());
    for (std::size_t k = 0; k < opts.seeds.size(); ++k) {
      std::ostringstream one;
      write_metrics_csv(one, res.curves[si][k]);
      std::istringstream back(one.str());
      for (auto& row : read_csv(back).rows) {
        row.insert(row.begin(), std::to_string(opts.seeds[k]));
        t.rows.push_back(std::move(row));
      }
    }
    write_csv(csv, t);
    const std::string file = "curves_" + name + ".csv";
    write_text(opts.out / file, csv.str());
    artifacts.push_back(file);

    svg::Series series{name, {}, {}};
    const std::size_t steps = res.curves[si].front().size();
    for (std::size_t s = 0; s < steps; ++s) {
      double acc = 0.0;
      for (const auto& curve : res.curves[si]) acc += curve[s].reward_accuracy;
      series.x.push_back(static_cast<double>(res.curves[si].front()[s].step));
      series.y.push_back(acc / static_cast<double>(res.curves[si].size()));
    }
    panel.series.push_back(std::move(series));
  }

  CsvTable summary;
  summary.header = {"strategy", "n_seeds", "terminal_accuracy_mean", "terminal_accuracy_std", "auc_mean", "auc_std"};
  for (const auto& row : res.summary) {
    summary.rows.push_back({std::string(to_string(row.strategy)), std::to_string(row.n_seeds),
                            format_number(row.terminal_accuracy_mean), format_number(row.terminal_accuracy_std),
                            format_number(row.auc_mean), format_number(row.auc_std)});
  }
  std::ostringstream summary_csv;
  write_csv(summary_csv, summary);
  write_text(opts.out / "summary.csv", summary_csv.str());
  artifacts.push_back("summary.csv");

  std::ostringstream text;
  text << std::left << std::setw(18) << "strategy" << std::right << std::setw(7) << "seeds" << std::setw(24)
       << "terminal accuracy" << std::setw(24) << "auc" << '\n';
  text << std::fixed << std::setprecision(4);
  for (const auto& row : res.summary) {
    std::ostringstream term, auc;
    term << std::fixed << std::setprecision(4) << row.terminal_accuracy_mean << " +- " << row.terminal_accuracy_std;
    auc << std::fixed << std::setprecision(4) << row.auc_mean << " +- " << row.auc_std;
    text << std::left << std::setw(18) << to_string(row.strategy) << std::right << std::setw(7) << row.n_seeds
         << std::setw(24) << term.str() << std::setw(24) << auc.str() << '\n';
  }
  write_text(opts.out / "summary.txt", text.str());
  artifacts.push_back("summary.txt");
  log.info("\n" + text.str());

  write_text(opts.out / "accuracy.svg", svg::render({panel}, 1, "Strategy ablation: " + id));
  artifacts.push_back("accuracy.svg");

  json seeds = {{"root", opts.seeds}, {"derivation", kDerivation}};
  json m = manifest(id, "ablate", cfg, seeds, started, artifacts);
  m["strategies"] = opts.strategies;
  m["artifacts"].push_back("manifest.json");
  write_text(opts.out / "manifest.json", m.dump(2) + "\n");
}

void cmd_report(const ReportOptions& opts, const Logger& log) {
  if (opts.runs.empty()) throw CommandError("usage", "report needs at least one run directory");

  struct Run {
    std::string label;
    std::vector<TrainMetrics> metrics;
  };
  std::vector<Run> runs;
  std::map<std::string, int> label_count;
  for (const auto& dir : opts.runs) {
    const auto mpath = dir / "manifest.json";
    if (!fs::exists(mpath)) throw CommandError("missing_metrics", "run dir '" + dir.string() + "' has no manifest.json");
    const json m = read_json_file(mpath, "missing_metrics");
    std::vector<fs::path> csvs;
    if (m.contains("artifacts") && m["artifacts"].is_array()) {
      for (const auto& a : m["artifacts"]) {
        if (!a.is_string()) continue;
        const std::string name = a.get<std::string>();
        if (name.size() > 4 && name.ends_with(".csv") && name.starts_with("stage")) csvs.push_back(dir / name);
      }
    }
    if (csvs.empty()) throw CommandError("missing_metrics", "run dir '" + dir.string() + "' lists no metrics CSV");

    Run run;
    run.label = m.value("run_id", dir.filename().string());
    if (label_count[run.label]++ > 0) run.label += " (" + dir.string() + ")";
    for (const auto& csv : csvs) {
      std::ifstream f(csv, std::ios::binary);
      if (!f) throw CommandError("missing_metrics", "run dir '" + dir.string() + "' is missing " + csv.filename().string());
      try {
        auto rows = read_metrics_csv(f);
        run.metrics.insert(run.metrics.end(), rows.begin(), rows.end());
      } catch (const std::exception& e) {
        throw CommandError("schema", csv.string() + ": " + e.what());
      }
    }
    log.debug("report: " + run.label + " with " + std::to_string(run.metrics.size()) + " steps");
    runs.push_back(std::move(run));
  }

  struct Field {
    const char* title;
    const char* y;
    double TrainMetrics::*member;
  };
  const Field fields[] = {{"Reward accuracy", "accuracy", &TrainMetrics::reward_accuracy},
                          {"Entropy", "nats/token", &TrainMetrics::entropy},
                          {"Mean response length", "tokens", &TrainMetrics::mean_response_length},
                          {"Clip ratio", "fraction clipped", &TrainMetrics::clip_fraction}};
  std::vector<svg::Panel> panels;
  for (const auto& f : fields) {
    svg::Panel p{f.title, "step", f.y, {}};
    for (const auto& run : runs) {
      svg::Series s{run.label, {}, {}};
      for (std::size_t i = 0; i < run.metrics.size(); ++i) {
        s.x.push_back(static_cast<double>(i));
        s.y.push_back(run.metrics[i].*f.member);
      }
      p.series.push_back(std::move(s));
    }
    panels.push_back(std::move(p));
  }
  make_dir(opts.out);
  write_text(opts.out / "report.svg", svg::render(panels, 2, "Training dynamics"));
  log.info("report: " + std::to_string(runs.size()) + " run(s) -> " + (opts.out / "report.svg").string());
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Toy-scale GRPO with prioritized advantage distillation", "padrl"};
  app.set_version_flag("--version", std::string(version()));
  app.require_subcommand(1);

  TrainOptions train;
  auto* t = app.add_subcommand("train", "Run a staged curriculum");
  t->add_option("--config", train.config, "Config JSON (or a run manifest)")->required();
  t->add_option("--out", train.out, "Output directory")->required();
  t->add_option("--set", train.overrides, "Override, e.g. pad.rho=0.25 (repeatable)");

  AblateOptions ablate;
  auto* a = app.add_subcommand("ablate", "Compare distillation strategies over seeds");
  a->add_option("--config", ablate.config, "Config JSON; stage 0 is ablated")->required();
  a->add_option("--strategies", ablate.strategies, "Comma-separated strategies")->required()->delimiter(',');
  a->add_option("--seeds", ablate.seeds, "Comma-separated root seeds")->required()->delimiter(',');
  a->add_option("--out", ablate.out, "Output directory")->required();
  a->add_option("--set", ablate.overrides, "Override (repeatable)");
  a->add_option("--threads", ablate.threads, "Worker threads; 0 = all cores");

  ReportOptions report;
  auto* r = app.add_subcommand("report", "Plot training dynamics of finished runs");
  r->add_option("--runs", report.runs, "Comma-separated run directories")->required()->delimiter(',');
  r->add_option("--out", report.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << error_line(CommandError("usage", e.what())) << '\n';
    return 2;
  }

  const Logger log(log_level_from_env(), err);
  try {
    if (t->parsed()) cmd_train(train, log);
    if (a->parsed()) cmd_ablate(ablate, log);
    if (r->parsed()) cmd_report(report, log);
  } catch (const CommandError& e) {
    err << error_line(e) << '\n';
    return e.code == "usage" ? 2 : 1;
  } catch (const std::exception& e) {
    err << error_line(CommandError("internal", e.what())) << '\n';
    return 1;
  }
  return 0;
}

}  // namespace padrl::cli
