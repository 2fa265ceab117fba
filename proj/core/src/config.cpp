#include "rldyn/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace rldyn::config {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// Strip a '#' comment, respecting double-quoted strings.
std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

bool valid_key(const std::string& key) {
  if (key.empty()) return false;
  for (char c : key) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' ||
          c == '.')) {
      return false;
    }
  }
  return key.front() != '.' && key.back() != '.';
}

Scalar parse_scalar(const std::string& raw, const std::string& context) {
  std::string s = trim(raw);
  if (s.empty()) throw std::invalid_argument("config: empty value for " + context);
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"') {
      throw std::invalid_argument("config: unterminated string for " + context);
    }
    std::string out;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
      if (s[i] == '\\' && i + 2 < s.size() && (s[i + 1] == '"' || s[i + 1] == '\\')) {
        out += s[++i];
      } else {
        out += s[i];
      }
    }
    return out;
  }
  if (s == "true") return true;
  if (s == "false") return false;

  // Integer if the whole token is digits (with optional sign).
  bool integral = true;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (i == 0 && (c == '+' || c == '-')) continue;
    if (!std::isdigit(static_cast<unsigned char>(c))) {
      integral = false;
      break;
    }
  }
  if (integral && s != "+" && s != "-") {
    return static_cast<std::int64_t>(std::stoll(s));
  }

  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(s, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: cannot parse value '" + s + "' for " + context);
  }
  if (used != s.size()) {
    throw std::invalid_argument("config: cannot parse value '" + s + "' for " + context);
  }
  return d;
}

Value parse_value(const std::string& raw, const std::string& context) {
  std::string s = trim(raw);
  Value v;
  if (!s.empty() && s.front() == '[') {
    if (s.back() != ']') {
      throw std::invalid_argument("config: unterminated array for " + context);
    }
    v.is_array = true;
    std::string body = s.substr(1, s.size() - 2);
    std::string item;
    bool in_string = false;
    for (char c : body) {
      if (c == '"') in_string = !in_string;
      if (c == ',' && !in_string) {
        if (!trim(item).empty()) v.array.push_back(parse_scalar(item, context));
        item.clear();
      } else {
        item += c;
      }
    }
    if (!trim(item).empty()) v.array.push_back(parse_scalar(item, context));
    return v;
  }
  v.scalar = parse_scalar(s, context);
  return v;
}

std::string format_scalar(const Scalar& s) {
  if (std::holds_alternative<bool>(s)) return std::get<bool>(s) ? "true" : "false";
  if (std::holds_alternative<std::int64_t>(s)) {
    return std::to_string(std::get<std::int64_t>(s));
  }
  if (std::holds_alternative<double>(s)) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", std::get<double>(s));
    std::string out = buf;
    // Keep the float/integer distinction through a round-trip.
    if (out.find_first_of(".eE") == std::string::npos &&
        out.find_first_of("ni") == std::string::npos) {
      out += ".0";
    }
    return out;
  }
  std::string out = "\"";
  for (char c : std::get<std::string>(s)) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

Tree parse_config_text(const std::string& text) {
  Tree tree;
  std::istringstream in(text);
  std::string line;
  std::string prefix;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string s = trim(strip_comment(line));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') {
        throw std::invalid_argument("config line " + std::to_string(line_no) +
                                    ": unterminated table header");
      }
      std::string name = trim(s.substr(1, s.size() - 2));
      if (!valid_key(name)) {
        throw std::invalid_argument("config line " + std::to_string(line_no) +
                                    ": bad table name '" + name + "'");
      }
      prefix = name + ".";
      continue;
    }
    std::size_t eq = s.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key = value");
    }
    std::string key = trim(s.substr(0, eq));
    if (!valid_key(key)) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": bad key '" + key + "'");
    }
    std::string full = prefix + key;
    if (tree.count(full)) {
      throw std::invalid_argument("config: duplicate key '" + full + "'");
    }
    tree[full] = parse_value(s.substr(eq + 1), "'" + full + "'");
  }
  return tree;
}

Tree load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string to_config_text(const Tree& tree) {
  std::string out;
  auto emit = [&](const std::string& key, const Value& v) {
    out += key + " = ";
    if (v.is_array) {
      out += "[";
      for (std::size_t i = 0; i < v.array.size(); ++i) {
        if (i) out += ", ";
        out += format_scalar(v.array[i]);
      }
      out += "]";
    } else {
      out += format_scalar(v.scalar);
    }
    out += "\n";
  };

  // Bare keys first, then tables grouped by the prefix before the last dot.
  for (const auto& [key, v] : tree) {
    if (key.find('.') == std::string::npos) emit(key, v);
  }
  std::string current_table;
  for (const auto& [key, v] : tree) {
    std::size_t dot = key.rfind('.');
    if (dot == std::string::npos) continue;
    std::string table = key.substr(0, dot);
    if (table != current_table) {
      out += "\n[" + table + "]\n";
      current_table = table;
    }
    emit(key.substr(dot + 1), v);
  }
  return out;
}

void apply_override(Tree& tree, const std::string& assignment) {
  std::size_t eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw std::invalid_argument("override must look like key=value, got '" +
                                assignment + "'");
  }
  std::string key = trim(assignment.substr(0, eq));
  if (!valid_key(key)) {
    throw std::invalid_argument("override: bad key '" + key + "'");
  }
  tree[key] = parse_value(assignment.substr(eq + 1), "override '" + key + "'");
}

// ---------------------------------------------------------------------------
// Resolution
// ---------------------------------------------------------------------------

namespace {

class Reader {
 public:
  explicit Reader(const Tree& tree) : tree_(tree) {}

  bool has(const std::string& key) const { return tree_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& def) {
    const Value* v = fetch(key);
    if (!v) return def;
    if (v->is_array || !std::holds_alternative<std::string>(v->scalar)) {
      fail(key, "a string");
    }
    return std::get<std::string>(v->scalar);
  }

  bool get_bool(const std::string& key, bool def) {
    const Value* v = fetch(key);
    if (!v) return def;
    if (v->is_array || !std::holds_alternative<bool>(v->scalar)) fail(key, "a bool");
    return std::get<bool>(v->scalar);
  }

  std::int64_t get_int(const std::string& key, std::int64_t def) {
    const Value* v = fetch(key);
    if (!v) return def;
    if (v->is_array || !std::holds_alternative<std::int64_t>(v->scalar)) {
      fail(key, "an integer");
    }
    return std::get<std::int64_t>(v->scalar);
  }

  double get_double(const std::string& key, double def) {
    const Value* v = fetch(key);
    if (!v) return def;
    if (v->is_array) fail(key, "a number");
    if (std::holds_alternative<std::int64_t>(v->scalar)) {
      return static_cast<double>(std::get<std::int64_t>(v->scalar));
    }
    if (!std::holds_alternative<double>(v->scalar)) fail(key, "a number");
    return std::get<double>(v->scalar);
  }

  std::optional<double> get_optional_double(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return get_double(key, 0.0);
  }

  std::vector<std::int64_t> get_int_array(const std::string& key,
                                          std::vector<std::int64_t> def) {
    const Value* v = fetch(key);
    if (!v) return def;
    if (!v->is_array) fail(key, "an array of integers");
    std::vector<std::int64_t> out;
    for (const Scalar& s : v->array) {
      if (!std::holds_alternative<std::int64_t>(s)) fail(key, "an array of integers");
      out.push_back(std::get<std::int64_t>(s));
    }
    return out;
  }

  const Value* fetch_array(const std::string& key) {
    const Value* v = fetch(key);
    if (v && !v->is_array) fail(key, "an array");
    return v;
  }

  /// Keys that were never consumed are unknown: fail closed, by name.
  void check_all_consumed() const {
    for (const auto& [key, v] : tree_) {
      if (!consumed_.count(key)) {
        throw std::invalid_argument("unknown config key '" + key + "'");
      }
    }
  }

 private:
  const Value* fetch(const std::string& key) {
    auto it = tree_.find(key);
    if (it == tree_.end()) return nullptr;
    consumed_.insert(key);
    return &it->second;
  }

  [[noreturn]] void fail(const std::string& key, const char* what) const {
    throw std::invalid_argument("config key '" + key + "' must be " + what);
  }

  const Tree& tree_;
  std::set<std::string> consumed_;
};

std::vector<std::size_t> to_sizes(const std::vector<std::int64_t>& in,
                                  const std::string& key) {
  std::vector<std::size_t> out;
  for (std::int64_t v : in) {
    if (v < 0) throw std::invalid_argument("config key '" + key + "' must be >= 0");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

}  // namespace

std::string env_kind_name(envs::EnvKind kind) {
  switch (kind) {
    case envs::EnvKind::chain_dense: return "chain_dense";
    case envs::EnvKind::chain_sparse_masked: return "chain_sparse_masked";
    case envs::EnvKind::point_mass: return "point_mass";
  }
  return "?";
}

envs::EnvKind env_kind_from_name(const std::string& name) {
  if (name == "chain_dense") return envs::EnvKind::chain_dense;
  if (name == "chain_sparse_masked") return envs::EnvKind::chain_sparse_masked;
  if (name == "point_mass") return envs::EnvKind::point_mass;
  throw std::invalid_argument("config key 'env.kind': unknown environment '" + name +
                              "' (chain_dense, chain_sparse_masked, point_mass)");
}

std::string pfo_scope_name(ppo::PfoScope scope) {
  switch (scope) {
    case ppo::PfoScope::off: return "off";
    case ppo::PfoScope::last: return "last";
    case ppo::PfoScope::all: return "all";
  }
  return "?";
}

ppo::PfoScope pfo_scope_from_name(const std::string& name) {
  if (name == "off") return ppo::PfoScope::off;
  if (name == "last") return ppo::PfoScope::last;
  if (name == "all") return ppo::PfoScope::all;
  throw std::invalid_argument("config key 'ppo.pfo_scope': must be off, last, or all");
}

RunConfig resolve_config(const Tree& tree) {
  Reader r(tree);
  RunConfig cfg;

  cfg.experiment = r.get_string("experiment", "run");
  cfg.output_dir = r.get_string("output_dir", "runs");

  const envs::EnvKind kind = env_kind_from_name(r.get_string("env.kind", "chain_dense"));
  const bool continuous = kind == envs::EnvKind::point_mass;
  cfg.env = envs::EnvConfig::defaults_for(kind, 0);
  cfg.env.horizon = static_cast<std::size_t>(
      r.get_int("env.horizon", static_cast<std::int64_t>(cfg.env.horizon)));
  cfg.env.sticky_action_prob =
      r.get_double("env.sticky_action_prob", cfg.env.sticky_action_prob);
  cfg.env.reward_mask_prob =
      r.get_double("env.reward_mask_prob", cfg.env.reward_mask_prob);
  cfg.env.validate();

  cfg.hidden_widths = to_sizes(r.get_int_array("model.hidden", {64, 64}), "model.hidden");
  const std::string act = r.get_string("model.activation", continuous ? "tanh" : "relu");
  if (act == "relu") {
    cfg.activation = ad::Activation::relu;
  } else if (act == "tanh") {
    cfg.activation = ad::Activation::tanh;
  } else {
    throw std::invalid_argument("config key 'model.activation': must be relu or tanh");
  }
  cfg.ppo.shared_trunk = r.get_bool("model.shared_trunk", false);

  cfg.total_env_steps = static_cast<std::size_t>(
      r.get_int("collect.total_env_steps", continuous ? 300'000 : 200'000));
  cfg.num_envs = static_cast<std::size_t>(r.get_int("collect.num_envs", 8));
  cfg.steps_per_env = static_cast<std::size_t>(r.get_int("collect.steps_per_env", 128));
  cfg.normalize_observations =
      r.get_bool("collect.normalize_observations", continuous);
  cfg.normalizer_steps =
      static_cast<std::size_t>(r.get_int("collect.normalizer_steps", 512));
  cfg.normalizer_min_episodes =
      static_cast<std::size_t>(r.get_int("collect.normalizer_min_episodes", 4));

  cfg.ppo.clip_epsilon = r.get_double("ppo.clip_epsilon", continuous ? 0.2 : 0.1);
  cfg.ppo.epochs = static_cast<std::size_t>(r.get_int("ppo.epochs", 4));
  cfg.ppo.minibatch_size =
      static_cast<std::size_t>(r.get_int("ppo.minibatch_size", continuous ? 64 : 256));
  cfg.ppo.entropy_coeff = r.get_double("ppo.entropy_coeff", continuous ? 0.0 : 0.01);
  cfg.ppo.value_coeff = r.get_double("ppo.value_coeff", 0.5);
  cfg.ppo.pfo_coeff = r.get_double("ppo.pfo_coeff", 1.0);
  cfg.ppo.pfo_scope = pfo_scope_from_name(r.get_string("ppo.pfo_scope", "off"));
  cfg.ppo.adam.learning_rate = r.get_double("ppo.learning_rate", 2.5e-4);
  cfg.ppo.adam.beta1 = r.get_double("ppo.beta1", 0.9);
  cfg.ppo.adam.beta2 = r.get_double("ppo.beta2", 0.999);
  cfg.ppo.adam.epsilon = r.get_double("ppo.adam_epsilon", 1e-8);
  cfg.ppo.max_grad_norm = r.get_double("ppo.max_grad_norm", 0.5);
  cfg.ppo.adam_reset_each_batch = r.get_bool("ppo.adam_reset_each_batch", false);
  cfg.ppo.gae.gamma = r.get_double("ppo.gamma", 0.99);
  cfg.ppo.gae.lambda = r.get_double("ppo.lambda", 0.95);

  cfg.diagnostics_cadence = r.get_double("logging.diagnostics_cadence", 0.005);
  cfg.capacity_enabled = r.get_bool("logging.capacity_enabled", true);
  cfg.capacity_cadence = r.get_double("logging.capacity_cadence", 0.025);
  cfg.checkpoints_enabled = r.get_bool("logging.checkpoints_enabled", true);
  cfg.capacity_dataset_steps =
      static_cast<std::size_t>(r.get_int("capacity.dataset_steps", 512));
  cfg.capacity_fit_epochs =
      static_cast<std::size_t>(r.get_int("capacity.fit_epochs", 4));
  cfg.capacity_fit_minibatch =
      static_cast<std::size_t>(r.get_int("capacity.fit_minibatch", 64));

  std::vector<std::int64_t> seeds = r.get_int_array("seeds", {1});
  cfg.seeds.clear();
  for (std::int64_t s : seeds) cfg.seeds.push_back(static_cast<std::uint64_t>(s));
  if (cfg.seeds.empty()) throw std::invalid_argument("config key 'seeds' must be non-empty");

  cfg.toy.phi_x = r.get_optional_double("toy.phi_x");
  cfg.toy.phi_seed = static_cast<std::uint64_t>(r.get_int("toy.phi_seed", 7));
  cfg.toy.alpha = r.get_double("toy.alpha", 3.0);
  cfg.toy.advantage_x = r.get_double("toy.advantage_x", 1.0);
  cfg.toy.advantage_y = r.get_double("toy.advantage_y", 1.0);
  cfg.toy.pi_old_x = r.get_double("toy.pi_old_x", 0.5);
  cfg.toy.pi_old_y = r.get_double("toy.pi_old_y", 0.5);
  cfg.toy.clip_epsilon = r.get_double("toy.clip_epsilon", 0.1);
  cfg.toy.learning_rate = r.get_double("toy.learning_rate", 1.5);
  cfg.toy.epochs_per_state =
      static_cast<std::size_t>(r.get_int("toy.epochs_per_state", 10));
  cfg.toy.alternating_steps =
      static_cast<std::size_t>(r.get_int("toy.alternating_steps", 20));
  cfg.toy.refresh_pi_old_each_block = r.get_bool("toy.refresh_pi_old", false);

  static const std::set<std::string> kSweepable = {
      "epochs",   "minibatch_size", "pfo_scope",     "pfo_coeff",
      "beta2",    "learning_rate",  "entropy_coeff", "adam_reset_each_batch",
      "shared_trunk", "clip_epsilon"};
  for (const auto& [key, value] : tree) {
    if (key.rfind("sweep.", 0) != 0) continue;
    std::string field = key.substr(6);
    if (!kSweepable.count(field)) {
      throw std::invalid_argument("unknown config key '" + key + "' (not sweepable)");
    }
    const Value* v = r.fetch_array(key);
    if (v->array.empty()) {
      throw std::invalid_argument("config key '" + key + "' must be a non-empty array");
    }
    cfg.sweep_lists[field] = v->array;
  }

  r.check_all_consumed();

  // Cross-field checks, naming the offending keys.
  const std::size_t batch = cfg.num_envs * cfg.steps_per_env;
  if (cfg.ppo.minibatch_size > batch) {
    throw std::invalid_argument(
        "config: 'ppo.minibatch_size' (" + std::to_string(cfg.ppo.minibatch_size) +
        ") exceeds the batch size 'collect.num_envs' x 'collect.steps_per_env' (" +
        std::to_string(batch) + ")");
  }
  cfg.ppo.validate(batch);
  cfg.toy.validate();
  if (!(cfg.diagnostics_cadence > 0.0 && cfg.diagnostics_cadence <= 1.0)) {
    throw std::invalid_argument("config key 'logging.diagnostics_cadence' must be in (0,1]");
  }
  if (!(cfg.capacity_cadence > 0.0 && cfg.capacity_cadence <= 1.0)) {
    throw std::invalid_argument("config key 'logging.capacity_cadence' must be in (0,1]");
  }
  return cfg;
}

ppo::TrainSetup RunConfig::train_setup(std::uint64_t seed) const {
  ppo::TrainSetup setup;
  setup.env = env;
  setup.num_envs = num_envs;
  setup.steps_per_env = steps_per_env;
  setup.total_env_steps = total_env_steps;
  setup.hidden_widths = hidden_widths;
  setup.activation = activation;
  setup.ppo = ppo;
  setup.normalize_observations = normalize_observations;
  setup.normalizer_steps = normalizer_steps;
  setup.normalizer_min_episodes = normalizer_min_episodes;
  setup.diagnostics_cadence = diagnostics_cadence;
  setup.capacity_enabled = capacity_enabled;
  setup.capacity_cadence = capacity_cadence;
  setup.capacity_dataset_steps = capacity_dataset_steps;
  setup.capacity_budget.epochs = capacity_fit_epochs;
  setup.capacity_budget.minibatch = capacity_fit_minibatch;
  setup.seed = seed;
  return setup;
}

std::vector<std::vector<SweepAssignment>> RunConfig::sweep_grid() const {
  std::vector<std::vector<SweepAssignment>> grid = {{}};
  for (const auto& [field, values] : sweep_lists) {
    std::vector<std::vector<SweepAssignment>> next;
    for (const auto& combo : grid) {
      for (const Scalar& v : values) {
        SweepAssignment a;
        a.key = field;
        a.value = v;
        a.label = field + "=" + format_scalar(v);
        // Strip string quotes in labels to keep paths tidy.
        if (std::holds_alternative<std::string>(v)) {
          a.label = field + "=" + std::get<std::string>(v);
        }
        auto c = combo;
        c.push_back(a);
        next.push_back(std::move(c));
      }
    }
    grid = std::move(next);
  }
  return grid;
}

void apply_sweep_assignment(RunConfig& cfg, const SweepAssignment& a) {
  auto as_double = [&]() {
    if (std::holds_alternative<std::int64_t>(a.value)) {
      return static_cast<double>(std::get<std::int64_t>(a.value));
    }
    return std::get<double>(a.value);
  };
  auto as_size = [&]() {
    return static_cast<std::size_t>(std::get<std::int64_t>(a.value));
  };

  if (a.key == "epochs") cfg.ppo.epochs = as_size();
  else if (a.key == "minibatch_size") cfg.ppo.minibatch_size = as_size();
  else if (a.key == "pfo_scope") cfg.ppo.pfo_scope = pfo_scope_from_name(std::get<std::string>(a.value));
  else if (a.key == "pfo_coeff") cfg.ppo.pfo_coeff = as_double();
  else if (a.key == "beta2") cfg.ppo.adam.beta2 = as_double();
  else if (a.key == "learning_rate") cfg.ppo.adam.learning_rate = as_double();
  else if (a.key == "entropy_coeff") cfg.ppo.entropy_coeff = as_double();
  else if (a.key == "adam_reset_each_batch") cfg.ppo.adam_reset_each_batch = std::get<bool>(a.value);
  else if (a.key == "shared_trunk") cfg.ppo.shared_trunk = std::get<bool>(a.value);
  else if (a.key == "clip_epsilon") cfg.ppo.clip_epsilon = as_double();
  else throw std::invalid_argument("apply_sweep_assignment: unknown field '" + a.key + "'");
}

Tree to_tree(const RunConfig& cfg) {
  Tree t;
  auto set_str = [&](const std::string& k, const std::string& v) {
    Value val;
    val.scalar = v;
    t[k] = val;
  };
  auto set_int = [&](const std::string& k, std::int64_t v) {
    Value val;
    val.scalar = v;
    t[k] = val;
  };
  auto set_double = [&](const std::string& k, double v) {
    Value val;
    val.scalar = v;
    t[k] = val;
  };
  auto set_bool = [&](const std::string& k, bool v) {
    Value val;
    val.scalar = v;
    t[k] = val;
  };

  set_str("experiment", cfg.experiment);
  set_str("output_dir", cfg.output_dir);

  set_str("env.kind", env_kind_name(cfg.env.kind));
  set_int("env.horizon", static_cast<std::int64_t>(cfg.env.horizon));
  set_double("env.sticky_action_prob", cfg.env.sticky_action_prob);
  set_double("env.reward_mask_prob", cfg.env.reward_mask_prob);

  Value hidden;
  hidden.is_array = true;
  for (std::size_t w : cfg.hidden_widths) hidden.array.push_back(static_cast<std::int64_t>(w));
  t["model.hidden"] = hidden;
  set_str("model.activation", cfg.activation == ad::Activation::relu ? "relu" : "tanh");
  set_bool("model.shared_trunk", cfg.ppo.shared_trunk);

  set_int("collect.total_env_steps", static_cast<std::int64_t>(cfg.total_env_steps));
  set_int("collect.num_envs", static_cast<std::int64_t>(cfg.num_envs));
  set_int("collect.steps_per_env", static_cast<std::int64_t>(cfg.steps_per_env));
  set_bool("collect.normalize_observations", cfg.normalize_observations);
  set_int("collect.normalizer_steps", static_cast<std::int64_t>(cfg.normalizer_steps));
  set_int("collect.normalizer_min_episodes",
          static_cast<std::int64_t>(cfg.normalizer_min_episodes));

  set_double("ppo.clip_epsilon", cfg.ppo.clip_epsilon);
  set_int("ppo.epochs", static_cast<std::int64_t>(cfg.ppo.epochs));
  set_int("ppo.minibatch_size", static_cast<std::int64_t>(cfg.ppo.minibatch_size));
  set_double("ppo.entropy_coeff", cfg.ppo.entropy_coeff);
  set_double("ppo.value_coeff", cfg.ppo.value_coeff);
  set_double("ppo.pfo_coeff", cfg.ppo.pfo_coeff);
  set_str("ppo.pfo_scope", pfo_scope_name(cfg.ppo.pfo_scope));
  set_double("ppo.learning_rate", cfg.ppo.adam.learning_rate);
  set_double("ppo.beta1", cfg.ppo.adam.beta1);
  set_double("ppo.beta2", cfg.ppo.adam.beta2);
  set_double("ppo.adam_epsilon", cfg.ppo.adam.epsilon);
  set_double("ppo.max_grad_norm", cfg.ppo.max_grad_norm);
  set_bool("ppo.adam_reset_each_batch", cfg.ppo.adam_reset_each_batch);
  set_double("ppo.gamma", cfg.ppo.gae.gamma);
  set_double("ppo.lambda", cfg.ppo.gae.lambda);

  set_double("logging.diagnostics_cadence", cfg.diagnostics_cadence);
  set_bool("logging.capacity_enabled", cfg.capacity_enabled);
  set_double("logging.capacity_cadence", cfg.capacity_cadence);
  set_bool("logging.checkpoints_enabled", cfg.checkpoints_enabled);
  set_int("capacity.dataset_steps", static_cast<std::int64_t>(cfg.capacity_dataset_steps));
  set_int("capacity.fit_epochs", static_cast<std::int64_t>(cfg.capacity_fit_epochs));
  set_int("capacity.fit_minibatch",
          static_cast<std::int64_t>(cfg.capacity_fit_minibatch));

  Value seeds;
  seeds.is_array = true;
  for (std::uint64_t s : cfg.seeds) seeds.array.push_back(static_cast<std::int64_t>(s));
  t["seeds"] = seeds;

  if (cfg.toy.phi_x.has_value()) set_double("toy.phi_x", *cfg.toy.phi_x);
  set_int("toy.phi_seed", static_cast<std::int64_t>(cfg.toy.phi_seed));
  set_double("toy.alpha", cfg.toy.alpha);
  set_double("toy.advantage_x", cfg.toy.advantage_x);
  set_double("toy.advantage_y", cfg.toy.advantage_y);
  set_double("toy.pi_old_x", cfg.toy.pi_old_x);
  set_double("toy.pi_old_y", cfg.toy.pi_old_y);
  set_double("toy.clip_epsilon", cfg.toy.clip_epsilon);
  set_double("toy.learning_rate", cfg.toy.learning_rate);
  set_int("toy.epochs_per_state", static_cast<std::int64_t>(cfg.toy.epochs_per_state));
  set_int("toy.alternating_steps",
          static_cast<std::int64_t>(cfg.toy.alternating_steps));
  set_bool("toy.refresh_pi_old", cfg.toy.refresh_pi_old_each_block);

  for (const auto& [field, values] : cfg.sweep_lists) {
    Value v;
    v.is_array = true;
    v.array = values;
    t["sweep." + field] = v;
  }
  return t;
}

}  // namespace rldyn::config
