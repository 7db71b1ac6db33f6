#include "newsrec/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "newsrec/textio.hpp"

namespace newsrec {

namespace {

struct FieldDef {
  const char* name;
  std::function<void(RunConfig&, const nlohmann::json&)> from_json;
  std::function<void(RunConfig&, const std::string&)> from_string;
  std::function<std::string(const RunConfig&)> print;
};

template <typename T>
T parse_number(const std::string& s, const char* key) {
  std::istringstream ss(s);
  T v{};
  if (!(ss >> v) || !ss.eof())
    throw std::invalid_argument(std::string("bad value for ") + key + ": " + s);
  return v;
}

template <typename T>
FieldDef num_field(const char* name, T RunConfig::* member) {
  return FieldDef{
      name,
      [name, member](RunConfig& c, const nlohmann::json& j) {
        if (!j.is_number())
          throw std::invalid_argument(std::string("config key ") + name + " must be a number");
        c.*member = j.get<T>();
      },
      [name, member](RunConfig& c, const std::string& s) {
        c.*member = parse_number<T>(s, name);
      },
      [member](const RunConfig& c) {
        if constexpr (std::is_floating_point_v<T>)
          return fmt_double(c.*member);
        else
          return std::to_string(c.*member);
      }};
}

FieldDef string_field(const char* name, std::string RunConfig::* member) {
  return FieldDef{
      name,
      [name, member](RunConfig& c, const nlohmann::json& j) {
        if (!j.is_string())
          throw std::invalid_argument(std::string("config key ") + name + " must be a string");
        c.*member = j.get<std::string>();
      },
      [member](RunConfig& c, const std::string& s) { c.*member = s; },
      [member](const RunConfig& c) { return c.*member; }};
}

FieldDef bool_field(const char* name, bool RunConfig::* member) {
  return FieldDef{
      name,
      [name, member](RunConfig& c, const nlohmann::json& j) {
        if (!j.is_boolean())
          throw std::invalid_argument(std::string("config key ") + name + " must be a boolean");
        c.*member = j.get<bool>();
      },
      [name, member](RunConfig& c, const std::string& s) {
        if (s == "true" || s == "1")
          c.*member = true;
        else if (s == "false" || s == "0")
          c.*member = false;
        else
          throw std::invalid_argument(std::string("bad value for ") + name + ": " + s);
      },
      [member](const RunConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

const std::vector<FieldDef>& fields() {
  static const std::vector<FieldDef> defs = {
      num_field("d", &RunConfig::d),
      num_field("history_len", &RunConfig::history_len),
      num_field("k", &RunConfig::k),
      num_field("weight_exponent", &RunConfig::weight_exponent),
      num_field("eps", &RunConfig::eps),
      string_field("decay_mode", &RunConfig::decay_mode),
      num_field("t_tdf", &RunConfig::t_tdf),
      num_field("t_utdf", &RunConfig::t_utdf),
      num_field("sigma", &RunConfig::sigma),
      num_field("window_len", &RunConfig::window_len),
      num_field("merge_windows", &RunConfig::merge_windows),
      num_field("candidate_horizon", &RunConfig::candidate_horizon),
      num_field("ctr_refresh_seconds", &RunConfig::ctr_refresh_seconds),
      num_field("model_refresh_seconds", &RunConfig::model_refresh_seconds),
      num_field("smoothing_alpha", &RunConfig::smoothing_alpha),
      num_field("smoothing_beta", &RunConfig::smoothing_beta),
      bool_field("nmf_soft", &RunConfig::nmf_soft),
      num_field("nmf_iters", &RunConfig::nmf_iters),
      num_field("kmeans_max_iters", &RunConfig::kmeans_max_iters),
      num_field("kmeans_tol", &RunConfig::kmeans_tol),
      num_field("minhash_num_hashes", &RunConfig::minhash_num_hashes),
      num_field("minhash_key_len", &RunConfig::minhash_key_len),
      string_field("listen", &RunConfig::listen),
      num_field("seed", &RunConfig::seed),
      num_field("num_topics", &RunConfig::num_topics),
      num_field("vocab_size", &RunConfig::vocab_size),
      num_field("num_users", &RunConfig::num_users),
      num_field("num_articles", &RunConfig::num_articles),
      num_field("days", &RunConfig::days),
      num_field("word_noise", &RunConfig::word_noise),
      num_field("tokens_min", &RunConfig::tokens_min),
      num_field("tokens_max", &RunConfig::tokens_max),
      num_field("visit_mu", &RunConfig::visit_mu),
      num_field("visit_sigma", &RunConfig::visit_sigma),
      num_field("pref_alpha", &RunConfig::pref_alpha),
      num_field("affinity_weight", &RunConfig::affinity_weight),
      num_field("freshness_half_life", &RunConfig::freshness_half_life),
      num_field("base_rate", &RunConfig::base_rate),
      num_field("policy_noise", &RunConfig::policy_noise),
      num_field("slate_size", &RunConfig::slate_size),
      num_field("trend_amp", &RunConfig::trend_amp),
      num_field("trend_period", &RunConfig::trend_period),
      num_field("world_start", &RunConfig::world_start),
      num_field("eval_train_hours", &RunConfig::eval_train_hours),
      num_field("eval_cutoff", &RunConfig::eval_cutoff),
      num_field("eval_window_len", &RunConfig::eval_window_len),
      num_field("eval_merge_windows", &RunConfig::eval_merge_windows),
      num_field("eval_smoothing_alpha", &RunConfig::eval_smoothing_alpha),
      num_field("eval_smoothing_beta", &RunConfig::eval_smoothing_beta),
      num_field("ab_warmup_hours", &RunConfig::ab_warmup_hours),
      num_field("ab_experiment_traffic", &RunConfig::ab_experiment_traffic),
  };
  return defs;
}

const FieldDef* find_field(const std::string& name) {
  for (const auto& f : fields()) {
    if (name == f.name) return &f;
  }
  return nullptr;
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text, const std::string& origin) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw std::invalid_argument(origin + ": not a JSON object");
  RunConfig c;
  for (const auto& [key, value] : j.items()) {
    const FieldDef* f = find_field(key);
    if (!f) throw std::invalid_argument(origin + ": unknown config key: " + key);
    f->from_json(c, value);
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str(), path);
}

void RunConfig::apply_override(const std::string& key, const std::string& value) {
  const FieldDef* f = find_field(key);
  if (!f) throw std::invalid_argument("unknown config key: " + key);
  f->from_string(*this, value);
}

std::string RunConfig::banner() const {
  std::string out;
  for (const auto& f : fields()) {
    out += f.name;
    out += '=';
    out += f.print(*this);
    out += '\n';
  }
  return out;
}

void RunConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("invalid config: ") + what);
  };
  require(d >= 2, "d must be >= 2");
  require(history_len >= 1, "history_len must be positive");
  require(k >= 1, "k must be positive");
  require(weight_exponent > 0, "weight_exponent must be positive");
  require(eps > 0, "eps must be positive");
  require(decay_mode == "none" || decay_mode == "tdf" || decay_mode == "utdf",
          "decay_mode must be none, tdf, or utdf");
  require(sigma > 0, "sigma must be positive");
  require(window_len > 0, "window_len must be positive");
  require(merge_windows > 0, "merge_windows must be positive");
  require(candidate_horizon > 0, "candidate_horizon must be positive");
  require(num_topics > 0 && vocab_size > 0 && num_users > 0 && num_articles > 0 && days > 0,
          "world counts must be positive");
  require(base_rate > 0 && base_rate < 1, "base_rate must lie in (0, 1)");
  require(slate_size > 0, "slate_size must be positive");
  require(tokens_min > 0 && tokens_max >= tokens_min, "token count range invalid");
  require(eval_cutoff > 0, "eval_cutoff must be positive");
  // eval_train_hours vs the log length is checked where the experiment runs;
  // a world can legitimately be shorter than the default training window.
  require(eval_train_hours > 0, "eval_train_hours must be positive");
  require(minhash_num_hashes > 0 && minhash_key_len > 0 &&
              minhash_key_len <= minhash_num_hashes,
          "minhash parameters invalid");
  require(ab_experiment_traffic > 0 && ab_experiment_traffic <= 1,
          "ab_experiment_traffic must lie in (0, 1]");
}

}  // namespace newsrec
