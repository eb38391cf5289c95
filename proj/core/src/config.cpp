#include "padrl/config.hpp"

#include <set>
#include <sstream>

namespace padrl {

namespace {

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += "; ";
    out += items[i];
  }
  return out;
}

// Field reader that records problems instead of throwing, so a validation
// report can list all of them.
class Reader {
public:
  Reader(const nlohmann::json& obj, std::string path, std::vector<std::string>& problems)
      : obj_(obj), path_(std::move(path)), problems_(problems) {
    if (!obj_.is_object()) problems_.push_back(path_ + ": expected an object");
  }

  ~Reader() {
    if (!obj_.is_object()) return;
    for (const auto& [key, _] : obj_.items())
      if (!seen_.count(key)) problems_.push_back(path_ + "." + key + ": unknown key");
  }

  Reader(const Reader&) = delete;
  Reader& operator=(const Reader&) = delete;

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!obj_.is_object() || !obj_.contains(key)) return;
    const auto& v = obj_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw std::invalid_argument("expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw std::invalid_argument("expected an integer");
        if constexpr (std::is_unsigned_v<T>)
          if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)
            throw std::invalid_argument("expected a non-negative integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw std::invalid_argument("expected a number");
      }
      out = v.get<T>();
    } catch (const std::exception& e) {
      problems_.push_back(path_ + "." + key + ": " + e.what());
    }
  }

  template <typename Parse, typename T>
  void get_enum(const char* key, T& out, Parse parse) {
    seen_.insert(key);
    if (!obj_.is_object() || !obj_.contains(key)) return;
    const auto& v = obj_.at(key);
    if (!v.is_string()) {
      problems_.push_back(path_ + "." + key + ": expected a string");
      return;
    }
    try {
      out = parse(v.get<std::string>());
    } catch (const std::exception& e) {
      problems_.push_back(path_ + "." + key + ": " + e.what());
    }
  }

  const nlohmann::json* child(const char* key) {
    seen_.insert(key);
    if (!obj_.is_object() || !obj_.contains(key)) return nullptr;
    return &obj_.at(key);
  }

  std::string path(const char* key) const { return path_ + "." + key; }

private:
  const nlohmann::json& obj_;
  std::string path_;
  std::vector<std::string>& problems_;
  std::set<std::string> seen_;
};

const nlohmann::json kEmpty = nlohmann::json::object();

void read_stage(const nlohmann::json& doc, const std::string& path, StageConfig& s, std::vector<std::string>& problems) {
  Reader r(doc, path, problems);
  r.get_enum("name", s.name, parse_stage_name);
  // Stage-dependent defaults: KL is off in the first stage and on in the second.
  s.grpo.kl_enabled = s.name == StageName::trl_analog;
  if (s.name == StageName::trl_analog) s.env.task = TaskKind::parity_echo;

  r.get("steps", s.steps);
  s.pad.tau.horizon = s.steps;
  r.get("group_size", s.group_size);
  r.get("rollout_batch_prompts", s.rollout_batch_prompts);
  r.get_enum("strategy", s.strategy, parse_strategy);
  r.get("eps_stability", s.eps_stability);
  r.get("length_reward_enabled", s.length_reward_enabled);

  if (const auto* env = r.child("env")) {
    Reader e(*env, r.path("env"), problems);
    e.get_enum("task", s.env.task, parse_task_kind);
    e.get("dataset_size", s.env.dataset_size);
    e.get("seed", s.env.seed);
    if (const auto* d = e.child("difficulty")) {
      if (d->is_array() && d->size() == 2 && (*d)[0].is_number() && (*d)[1].is_number()) {
        s.env.difficulty_lo = (*d)[0].get<double>();
        s.env.difficulty_hi = (*d)[1].get<double>();
      } else {
        problems.push_back(e.path("difficulty") + ": expected [lo, hi]");
      }
    }
  }
  if (const auto* pad = r.child("pad")) {
    Reader p(*pad, r.path("pad"), problems);
    p.get("t_low", s.pad.t_low);
    p.get("t_high", s.pad.t_high);
    p.get("rho", s.pad.rho);
    p.get_enum("priority", s.pad.priority, parse_priority_mode);
    if (const auto* tau = p.child("tau")) {
      Reader t(*tau, p.path("tau"), problems);
      t.get("start", s.pad.tau.tau_start);
      t.get("end", s.pad.tau.tau_end);
      t.get("horizon", s.pad.tau.horizon);
    }
  }
  if (const auto* grpo = r.child("grpo")) {
    Reader g(*grpo, r.path("grpo"), problems);
    g.get("clip_eps", s.grpo.clip_eps);
    g.get("kl_coef", s.grpo.kl_coef);
    g.get("kl_enabled", s.grpo.kl_enabled);
    g.get("learning_rate", s.grpo.learning_rate);
    g.get("max_grad_norm", s.grpo.max_grad_norm);
    g.get("minibatches", s.grpo.minibatches);
    g.get_enum("ratio_level", s.grpo.ratio_level, parse_ratio_level);
    if (const auto* ent = g.child("entropy")) {
      Reader e(*ent, g.path("entropy"), problems);
      e.get("beta0", s.grpo.entropy.beta0);
      e.get("beta_min", s.grpo.entropy.beta_min);
      e.get("decay_lambda", s.grpo.entropy.decay_lambda);
      e.get("warmup_steps", s.grpo.entropy.warmup_steps);
    }
  }
  if (const auto* len = r.child("length_reward")) {
    Reader l(*len, r.path("length_reward"), problems);
    l.get("l_budget", s.length.l_budget);
    l.get("alpha", s.length.alpha);
    l.get("delta", s.length.delta);
    l.get("w_len", s.length.w_len);
  }
  if (const auto* gen = r.child("generation")) {
    Reader g(*gen, r.path("generation"), problems);
    g.get("temperature", s.generation.temperature);
    g.get("top_p", s.generation.top_p);
  }
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> p)
    : std::runtime_error("invalid config: " + join(p)), problems(std::move(p)) {}

std::string_view to_string(StageName name) { return name == StageName::mrl_analog ? "mrl_analog" : "trl_analog"; }

StageName parse_stage_name(std::string_view name) {
  if (name == "mrl_analog") return StageName::mrl_analog;
  if (name == "trl_analog") return StageName::trl_analog;
  throw std::invalid_argument("unknown stage name '" + std::string(name) + "' (expected mrl_analog or trl_analog)");
}

std::vector<std::string> violations(const StageConfig& s, std::string_view path_view) {
  const std::string path(path_view);
  std::vector<std::string> out;
  auto add = [&](const std::string& section, const std::vector<std::string>& items) {
    for (const auto& i : items) out.push_back(path + (section.empty() ? "" : "." + section) + ": " + i);
  };
  if (s.steps < 1) out.push_back(path + ".steps: steps must be >= 1");
  if (s.group_size < 2) out.push_back(path + ".group_size: G must be >= 2");
  if (s.rollout_batch_prompts < 1) out.push_back(path + ".rollout_batch_prompts: must be >= 1");
  if (!(s.eps_stability > 0.0)) out.push_back(path + ".eps_stability: must be > 0");
  if (!(s.generation.temperature > 0.0)) out.push_back(path + ".generation.temperature: must be > 0");
  if (!(s.generation.top_p > 0.0 && s.generation.top_p <= 1.0)) out.push_back(path + ".generation.top_p: top_p ∈ (0,1]");
  add("env", violations(s.env));
  add("pad", violations(s.pad));
  add("grpo", violations(s.grpo));
  add("length_reward", violations(s.length));
  return out;
}

std::vector<std::string> violations(const ExperimentConfig& cfg) {
  std::vector<std::string> out;
  if (cfg.stages.empty()) out.emplace_back("stages: at least one stage is required");
  if (cfg.policy.vocab_size < kMinVocab) out.emplace_back("policy.vocab_size: must be >= 11 (10 digits + EOS)");
  if (cfg.policy.max_len < 1) out.emplace_back("policy.max_len: must be >= 1");
  if (cfg.policy.context_order < 0 || cfg.policy.context_order > 3)
    out.emplace_back("policy.context_order: must be in [0, 3]");
  if (!(cfg.policy.init_scale >= 0.0)) out.emplace_back("policy.init_scale: must be >= 0");
  for (std::size_t i = 0; i < cfg.stages.size(); ++i) {
    auto v = violations(cfg.stages[i], "stages[" + std::to_string(i) + "]");
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

StageConfig stage_from_json(const nlohmann::json& doc, std::string_view path) {
  std::vector<std::string> problems;
  StageConfig s;
  read_stage(doc, std::string(path), s, problems);
  auto v = violations(s, path);
  problems.insert(problems.end(), v.begin(), v.end());
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return s;
}

ExperimentConfig config_from_json(const nlohmann::json& doc) {
  std::vector<std::string> problems;
  ExperimentConfig cfg;
  {
    Reader r(doc, "config", problems);
    r.get("seed", cfg.seed);
    if (const auto* pol = r.child("policy")) {
      Reader p(*pol, "policy", problems);
      p.get("vocab_size", cfg.policy.vocab_size);
      p.get("max_len", cfg.policy.max_len);
      p.get("context_order", cfg.policy.context_order);
      p.get("init_scale", cfg.policy.init_scale);
      p.get("init_seed", cfg.policy.init_seed);
    }
    const auto* stages = r.child("stages");
    if (stages == nullptr) {
      cfg.stages.emplace_back();
      read_stage(kEmpty, "stages[0]", cfg.stages.back(), problems);
    } else if (!stages->is_array()) {
      problems.emplace_back("stages: expected an array");
    } else {
      for (std::size_t i = 0; i < stages->size(); ++i) {
        cfg.stages.emplace_back();
        read_stage((*stages)[i], "stages[" + std::to_string(i) + "]", cfg.stages.back(), problems);
      }
    }
  }
  for (auto& s : cfg.stages) {
    s.env.vocab_size = cfg.policy.vocab_size;
    s.env.max_len = cfg.policy.max_len;
  }
  auto v = violations(cfg);
  problems.insert(problems.end(), v.begin(), v.end());
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return cfg;
}

nlohmann::json to_json(const StageConfig& s) {
  nlohmann::json j;
  j["name"] = std::string(to_string(s.name));
  j["steps"] = s.steps;
  j["group_size"] = s.group_size;
  j["rollout_batch_prompts"] = s.rollout_batch_prompts;
  j["strategy"] = std::string(to_string(s.strategy));
  j["eps_stability"] = s.eps_stability;
  j["length_reward_enabled"] = s.length_reward_enabled;
  j["env"] = {{"task", std::string(to_string(s.env.task))},
              {"dataset_size", s.env.dataset_size},
              {"seed", s.env.seed},
              {"difficulty", {s.env.difficulty_lo, s.env.difficulty_hi}}};
  j["pad"] = {{"t_low", s.pad.t_low},
              {"t_high", s.pad.t_high},
              {"rho", s.pad.rho},
              {"priority", std::string(to_string(s.pad.priority))},
              {"tau", {{"start", s.pad.tau.tau_start}, {"end", s.pad.tau.tau_end}, {"horizon", s.pad.tau.horizon}}}};
  j["grpo"] = {{"clip_eps", s.grpo.clip_eps},
               {"kl_coef", s.grpo.kl_coef},
               {"kl_enabled", s.grpo.kl_enabled},
               {"learning_rate", s.grpo.learning_rate},
               {"max_grad_norm", s.grpo.max_grad_norm},
               {"minibatches", s.grpo.minibatches},
               {"ratio_level", std::string(to_string(s.grpo.ratio_level))},
               {"entropy",
                {{"beta0", s.grpo.entropy.beta0},
                 {"beta_min", s.grpo.entropy.beta_min},
                 {"decay_lambda", s.grpo.entropy.decay_lambda},
                 {"warmup_steps", s.grpo.entropy.warmup_steps}}}};
  j["length_reward"] = {{"l_budget", s.length.l_budget},
                        {"alpha", s.length.alpha},
                        {"delta", s.length.delta},
                        {"w_len", s.length.w_len}};
  j["generation"] = {{"temperature", s.generation.temperature}, {"top_p", s.generation.top_p}};
  return j;
}

nlohmann::json to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["seed"] = cfg.seed;
  j["policy"] = {{"vocab_size", cfg.policy.vocab_size},
                 {"max_len", cfg.policy.max_len},
                 {"context_order", cfg.policy.context_order},
                 {"init_scale", cfg.policy.init_scale},
                 {"init_seed", cfg.policy.init_seed}};
  j["stages"] = nlohmann::json::array();
  for (const auto& s : cfg.stages) j["stages"].push_back(to_json(s));
  return j;
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t config_hash(const StageConfig& cfg) {
  nlohmann::json j = to_json(cfg);
  j["env"]["vocab_size"] = cfg.env.vocab_size;
  j["env"]["max_len"] = cfg.env.max_len;
  return fnv1a(j.dump());  // object keys are sorted, so the dump is canonical
}

std::uint64_t config_hash(const ExperimentConfig& cfg) { return fnv1a(to_json(cfg).dump()); }

std::string_view version() noexcept { return PADRL_VERSION; }

void apply_override(nlohmann::json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw std::invalid_argument("override '" + std::string(assignment) + "' must look like key=value");
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  std::vector<std::string> parts;
  std::istringstream ss(key);
  for (std::string part; std::getline(ss, part, '.');) {
    if (part.empty()) throw std::invalid_argument("override key '" + key + "' has an empty segment");
    parts.push_back(part);
  }
  if (!doc.is_object()) doc = nlohmann::json::object();

  auto set_path = [&](nlohmann::json& root, std::size_t from) {
    nlohmann::json* node = &root;
    for (std::size_t i = from; i < parts.size(); ++i) {
      const auto& p = parts[i];
      const bool last = i + 1 == parts.size();
      if (node->is_array()) {
        std::size_t idx = 0;
        try {
          idx = std::stoul(p);
        } catch (const std::exception&) {
          throw std::invalid_argument("override key '" + key + "': '" + p + "' is not an array index");
        }
        while (node->size() <= idx) node->push_back(nlohmann::json::object());
        node = &(*node)[idx];
      } else {
        if (!node->is_object()) *node = nlohmann::json::object();
        node = &(*node)[p];
      }
      if (last) *node = value;
    }
  };

  const std::string& head = parts.front();
  if (head == "seed" || head == "policy" || head == "stages") {
    if (head == "stages" && !doc.contains("stages")) doc["stages"] = nlohmann::json::array();
    set_path(doc, 0);
    return;
  }
  if (!doc.contains("stages")) doc["stages"] = nlohmann::json::array({nlohmann::json::object()});
  for (auto& stage : doc["stages"]) set_path(stage, 0);
}

}  // namespace padrl
