#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "padrl/cli.hpp"
#include "padrl/config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "padrl");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = padrl::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("padrl_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_json(const fs::path& path, const json& doc) {
  std::ofstream(path) << doc.dump(2);
  return path;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

const json kTiny = {{"seed", 3},
                    {"policy", {{"max_len", 5}}},
                    {"stages", json::array({json{{"steps", 6}, {"group_size", 4}, {"rollout_batch_prompts", 4}}})}};

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("train writes metrics, checkpoint and manifest") {
    const auto dir = scratch("train");
    const auto cfg = write_json(dir / "tiny.json", kTiny);
    const auto r = invoke({"train", "--config", cfg.string(), "--out", (dir / "run").string()});
    REQUIRE(r.code == 0);
    CHECK(fs::exists(dir / "run" / "stage0_mrl_analog.csv"));
    CHECK(fs::exists(dir / "run" / "stage0_mrl_analog.ckpt"));
    std::ifstream mf(dir / "run" / "manifest.json");
    const auto manifest = json::parse(mf);
    CHECK(manifest["run_id"].get<std::string>().rfind("tiny-", 0) == 0);
    CHECK(manifest["seeds"]["root"] == 3);
    CHECK(manifest["version"] == std::string(padrl::version()));
    CHECK(manifest["artifacts"].size() == 3);
    CHECK(padrl::config_from_json(manifest["config"]).stages[0].steps == 6);

    // The manifest is itself a valid config and reproduces the run.
    const auto again = invoke({"train", "--config", (dir / "run" / "manifest.json").string(), "--out", (dir / "rerun").string()});
    REQUIRE(again.code == 0);
    CHECK(slurp(dir / "run" / "stage0_mrl_analog.csv") == slurp(dir / "rerun" / "stage0_mrl_analog.csv"));
  }

  TEST_CASE("overrides reach every stage") {
    const auto dir = scratch("override");
    const auto cfg = write_json(dir / "tiny.json", kTiny);
    const auto r = invoke({"train", "--config", cfg.string(), "--out", (dir / "run").string(), "--set", "steps=2", "--set",
                           "seed=9"});
    REQUIRE(r.code == 0);
    std::ifstream csv(dir / "run" / "stage0_mrl_analog.csv");
    CHECK(padrl::read_metrics_csv(csv).size() == 2);
    CHECK(invoke({"train", "--config", cfg.string(), "--out", (dir / "x").string(), "--set", "noequals"}).code == 1);
  }

  TEST_CASE("config errors are single JSON lines naming every problem") {
    const auto dir = scratch("errors");
    const auto missing = invoke({"train", "--config", (dir / "nope.json").string(), "--out", (dir / "run").string()});
    CHECK(missing.code == 1);
    const auto line = json::parse(missing.err.substr(missing.err.rfind('{')));
    CHECK(line["error"] == "config_not_found");
    CHECK(line["message"].get<std::string>().find("nope.json") != std::string::npos);

    json bad = kTiny;
    bad["stages"][0]["pad"] = {{"rho", 1.5}};
    bad["stages"][0]["grpo"] = {{"clip_eps", -1}};
    const auto cfg = write_json(dir / "bad.json", bad);
    const auto r = invoke({"train", "--config", cfg.string(), "--out", (dir / "run").string()});
    CHECK(r.code == 1);
    const auto err = json::parse(r.err.substr(r.err.rfind('{')));
    CHECK(err["error"] == "config_invalid");
    REQUIRE(err["problems"].size() == 2);
    CHECK(err["problems"][0] == "stages[0].pad: rho ∈ (0,1]");
    CHECK(err["problems"][1] == "stages[0].grpo: clip_eps ∈ (0,1)");
    CHECK_FALSE(fs::exists(dir / "run"));

    std::ofstream(dir / "broken.json") << "{ not json";
    CHECK(json::parse(invoke({"train", "--config", (dir / "broken.json").string(), "--out", (dir / "run").string()})
                          .err)["error"] == "parse");
  }

  TEST_CASE("usage errors exit 2") {
    CHECK(invoke({}).code == 2);
    CHECK(invoke({"train", "--out", "x"}).code == 2);
    CHECK(invoke({"report", "--out", "x"}).code == 2);
    CHECK(invoke({"frobnicate"}).code == 2);
  }

  TEST_CASE("ablate") {
    const auto dir = scratch("ablate");
    const auto cfg = write_json(dir / "tiny.json", kTiny);
    const auto one = invoke({"ablate", "--config", cfg.string(), "--strategies", "pad", "--seeds", "1,2", "--out",
                             (dir / "one").string()});
    CHECK(one.code == 2);
    const auto unknown = invoke({"ablate", "--config", cfg.string(), "--strategies", "pad,best", "--seeds", "1", "--out",
                                 (dir / "u").string()});
    CHECK(unknown.code == 1);
    CHECK(unknown.err.find("unknown_strategy") != std::string::npos);

    const auto out = dir / "all";
    const auto r = invoke({"ablate", "--config", cfg.string(), "--strategies", "pad,grpo_baseline,grpo_filter,random_sampling",
                           "--seeds", "1,2", "--out", out.string()});
    REQUIRE(r.code == 0);
    for (const char* s : {"pad", "grpo_baseline", "grpo_filter", "random_sampling"}) {
      std::ifstream f(out / ("curves_" + std::string(s) + ".csv"));
      const auto table = padrl::read_csv(f);
      CHECK(table.header.front() == "seed");
      CHECK(table.rows.size() == 12);
    }
    std::ifstream sf(out / "summary.csv");
    const auto summary = padrl::read_csv(sf);
    CHECK(summary.header == std::vector<std::string>{"strategy", "n_seeds", "terminal_accuracy_mean", "terminal_accuracy_std",
                                                     "auc_mean", "auc_std"});
    CHECK(summary.rows.size() == 4);
    CHECK(fs::exists(out / "summary.txt"));
    CHECK(count(slurp(out / "accuracy.svg"), "<polyline") == 4);
  }

  TEST_CASE("report") {
    const auto dir = scratch("report");
    const auto cfg = write_json(dir / "tiny.json", kTiny);
    REQUIRE(invoke({"train", "--config", cfg.string(), "--out", (dir / "a").string()}).code == 0);
    REQUIRE(invoke({"train", "--config", cfg.string(), "--out", (dir / "b").string(), "--set", "seed=5"}).code == 0);
    const auto r = invoke({"report", "--runs", (dir / "a").string() + "," + (dir / "b").string(), "--out", (dir / "rep").string()});
    REQUIRE(r.code == 0);
    const auto svg = slurp(dir / "rep" / "report.svg");
    CHECK(count(svg, "<polyline") == 8);
    CHECK(svg.find("Clip ratio") != std::string::npos);

    fs::create_directories(dir / "empty");
    const auto missing = invoke({"report", "--runs", (dir / "empty").string(), "--out", (dir / "rep2").string()});
    CHECK(missing.code == 1);
    CHECK(missing.err.find("missing_metrics") != std::string::npos);
    CHECK(missing.err.find("empty") != std::string::npos);

    std::ofstream(dir / "a" / "stage0_mrl_analog.csv", std::ios::trunc) << "accuracy\n0.5\n";
    const auto schema = invoke({"report", "--runs", (dir / "a").string(), "--out", (dir / "rep3").string()});
    CHECK(schema.code == 1);
    CHECK(schema.err.find("\"schema\"") != std::string::npos);
    CHECK(schema.err.find("stage0_mrl_analog.csv") != std::string::npos);
  }

  TEST_CASE("log levels") {
    CHECK(padrl::cli::parse_log_level("debug") == padrl::cli::LogLevel::debug);
    CHECK_THROWS(padrl::cli::parse_log_level("loud"));
    std::ostringstream sink;
    const padrl::cli::Logger log(padrl::cli::LogLevel::error, sink);
    log.info("hidden");
    log.error("shown");
    CHECK(sink.str() == "[padrl] error: shown\n");
    const auto line = padrl::cli::error_line(padrl::cli::CommandError("x", "a \"quoted\"\nmessage", {"p"}));
    CHECK(line.find('\n') == std::string::npos);
    CHECK(json::parse(line)["message"] == "a \"quoted\"\nmessage");
  }
}
