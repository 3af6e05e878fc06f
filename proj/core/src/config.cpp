#include "simcon/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "simcon/errors.hpp"
#include "simcon/schedules.hpp"

namespace simcon {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> parts;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

double parse_real(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key, "expected a number, got '" + value + "'");
  }
}

std::uint64_t parse_count(const std::string& key, const std::string& value) {
  try {
    // stoull accepts a leading '-' and wraps; reject it explicitly.
    if (value.find('-') != std::string::npos) throw std::invalid_argument(value);
    std::size_t used = 0;
    const unsigned long long v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return static_cast<std::uint64_t>(v);
  } catch (const std::exception&) {
    throw ConfigError(key, "expected a non-negative integer, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
  if (value == "0" || value == "false" || value == "no" || value == "off") return false;
  throw ConfigError(key, "expected a boolean, got '" + value + "'");
}

std::vector<std::size_t> parse_count_list(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(value)) {
    out.push_back(static_cast<std::size_t>(parse_count(key, item)));
  }
  return out;
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_count_list(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kInfoNce: return "infonce";
    case LossKind::kSimCon: return "simcon";
    case LossKind::kMvSimCon: return "mv_simcon";
  }
  throw InvalidSpecError("unknown loss kind");
}

LossKind loss_kind_from_string(const std::string& name) {
  if (name == "infonce") return LossKind::kInfoNce;
  if (name == "simcon") return LossKind::kSimCon;
  if (name == "mv_simcon") return LossKind::kMvSimCon;
  throw ConfigError("loss_kind", "must be one of infonce, simcon, mv_simcon; got '" + name + "'");
}

bool ExperimentConfig::multiple_views() const {
  return use_multiple_views.value_or(loss_kind == LossKind::kMvSimCon);
}

bool ExperimentConfig::ncs_enabled() const {
  return use_ncs.value_or(loss_kind == LossKind::kMvSimCon);
}

bool ExperimentConfig::joint_positives() const {
  return use_joint_positives.value_or(loss_kind == LossKind::kMvSimCon);
}

std::vector<std::size_t> ExperimentConfig::lambda_boundaries() const {
  if (!lambda_decay_auto) return lambda_decay_epochs;
  return default_lambda_boundaries(epochs);
}

void apply_config_entry(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "loss_kind") {
    cfg.loss_kind = loss_kind_from_string(value);
    cfg.loss_kind_set = true;
  } else if (key == "use_multiple_views") {
    cfg.use_multiple_views = parse_bool(key, value);
  } else if (key == "use_ncs") {
    cfg.use_ncs = parse_bool(key, value);
  } else if (key == "use_joint_positives") {
    cfg.use_joint_positives = parse_bool(key, value);
  } else if (key == "classes") {
    cfg.classes = parse_count(key, value);
  } else if (key == "train_samples") {
    cfg.train_samples = parse_count(key, value);
  } else if (key == "eval_samples") {
    cfg.eval_samples = parse_count(key, value);
  } else if (key == "image_dim") {
    cfg.image_dim = parse_count(key, value);
  } else if (key == "text_dim") {
    cfg.text_dim = parse_count(key, value);
  } else if (key == "within_class_sigma") {
    cfg.within_class_sigma = parse_real(key, value);
  } else if (key == "caption_swap_prob") {
    cfg.caption_swap_prob = parse_real(key, value);
  } else if (key == "view_noise_sigma") {
    cfg.view_noise_sigma = parse_real(key, value);
  } else if (key == "view_drop_prob") {
    cfg.view_drop_prob = parse_real(key, value);
  } else if (key == "embed_dim") {
    cfg.embed_dim = parse_count(key, value);
  } else if (key == "image_hidden_dims") {
    cfg.image_hidden_dims = parse_count_list(key, value);
  } else if (key == "text_hidden_dims") {
    cfg.text_hidden_dims = parse_count_list(key, value);
  } else if (key == "head_hidden_dim") {
    cfg.head_hidden_dim = parse_count(key, value);
  } else if (key == "batch_size") {
    cfg.batch_size = parse_count(key, value);
  } else if (key == "epochs") {
    cfg.epochs = parse_count(key, value);
  } else if (key == "seeds") {
    cfg.seeds.clear();
    for (const auto& item : split_list(value)) cfg.seeds.push_back(parse_count(key, item));
  } else if (key == "lambda_init") {
    cfg.lambda_init = parse_real(key, value);
  } else if (key == "lambda_step") {
    cfg.lambda_step = parse_real(key, value);
  } else if (key == "lambda_decay_epochs") {
    if (value == "auto") {
      cfg.lambda_decay_auto = true;
      cfg.lambda_decay_epochs.clear();
    } else {
      cfg.lambda_decay_auto = false;
      cfg.lambda_decay_epochs = parse_count_list(key, value);
    }
  } else if (key == "lambda_floor") {
    cfg.lambda_floor = parse_real(key, value);
  } else if (key == "init_lr") {
    cfg.init_lr = parse_real(key, value);
  } else if (key == "max_lr") {
    cfg.max_lr = parse_real(key, value);
  } else if (key == "min_lr") {
    cfg.min_lr = parse_real(key, value);
  } else if (key == "warmup_epochs") {
    cfg.warmup_epochs = parse_count(key, value);
  } else if (key == "tau_init") {
    cfg.tau_init = parse_real(key, value);
  } else if (key == "learn_tau") {
    cfg.learn_tau = parse_bool(key, value);
  } else if (key == "weight_decay") {
    cfg.weight_decay = parse_real(key, value);
  } else if (key == "recall_threshold") {
    cfg.recall_threshold = parse_real(key, value);
  } else if (key == "export_data") {
    cfg.export_data = parse_bool(key, value);
  } else if (key == "export_params") {
    cfg.export_params = parse_bool(key, value);
  } else if (key == "out_dir") {
    cfg.out_dir = value;
  } else {
    throw ConfigError(key, "unknown config key");
  }
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open '" + path + "'");
  ExperimentConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno), "expected key=value, got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      apply_config_entry(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno), e.what());
    }
  }
  return cfg;
}

void validate(ExperimentConfig& cfg) {
  if (!cfg.loss_kind_set) throw ConfigError("loss_kind", "required field is missing");
  const bool mv = cfg.loss_kind == LossKind::kMvSimCon;
  if (mv) {
    if (cfg.use_multiple_views && !*cfg.use_multiple_views) {
      throw ConfigError("use_multiple_views", "mv_simcon always trains on two views");
    }
  } else {
    if (cfg.use_multiple_views && *cfg.use_multiple_views) {
      throw ConfigError("use_multiple_views", "only mv_simcon trains on two views");
    }
    if (cfg.use_ncs && *cfg.use_ncs) {
      throw ConfigError("use_ncs", "the view-consistency term requires loss_kind=mv_simcon");
    }
    if (cfg.use_joint_positives && *cfg.use_joint_positives) {
      throw ConfigError("use_joint_positives", "joint positives require loss_kind=mv_simcon");
    }
  }
  if (cfg.classes < 2) throw ConfigError("classes", "need at least 2");
  if (cfg.train_samples < cfg.classes) throw ConfigError("train_samples", "need at least one per class");
  if (cfg.eval_samples < cfg.classes) throw ConfigError("eval_samples", "need at least one per class");
  if (cfg.image_dim == 0) throw ConfigError("image_dim", "must be >= 1");
  if (cfg.text_dim == 0) throw ConfigError("text_dim", "must be >= 1");
  if (!(cfg.within_class_sigma >= 0.0)) throw ConfigError("within_class_sigma", "must be >= 0");
  if (!(cfg.caption_swap_prob >= 0.0) || cfg.caption_swap_prob >= 1.0) {
    throw ConfigError("caption_swap_prob", "must lie in [0, 1)");
  }
  if (!(cfg.view_noise_sigma >= 0.0)) throw ConfigError("view_noise_sigma", "must be >= 0");
  if (!(cfg.view_drop_prob >= 0.0) || cfg.view_drop_prob > 0.5) {
    throw ConfigError("view_drop_prob", "must lie in [0, 0.5]");
  }
  if (cfg.embed_dim == 0) throw ConfigError("embed_dim", "must be >= 1");
  if (cfg.head_hidden_dim == 0) throw ConfigError("head_hidden_dim", "must be >= 1");
  if (cfg.batch_size == 0 || cfg.batch_size > cfg.train_samples) {
    throw ConfigError("batch_size", "must lie in [1, train_samples]");
  }
  if (cfg.epochs == 0) throw ConfigError("epochs", "must be >= 1");
  if (cfg.seeds.empty()) throw ConfigError("seeds", "need at least one seed");
  if (!(cfg.tau_init > 0.0)) throw ConfigError("tau_init", "must be > 0");
  if (!(cfg.weight_decay >= 0.0)) throw ConfigError("weight_decay", "must be >= 0");
  if (!(cfg.init_lr >= 0.0) || !(cfg.max_lr >= 0.0) || !(cfg.min_lr >= 0.0)) {
    throw ConfigError("learning rate", "rates must be >= 0");
  }
  if (cfg.warmup_epochs >= cfg.epochs && cfg.epochs > 1) {
    throw ConfigError("warmup_epochs", "must be below epochs");
  }
}

std::vector<std::pair<std::string, std::string>> config_fields(const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> fields;
  fields.emplace_back("batch_size", std::to_string(cfg.batch_size));
  fields.emplace_back("caption_swap_prob", format_real(cfg.caption_swap_prob));
  fields.emplace_back("classes", std::to_string(cfg.classes));
  fields.emplace_back("embed_dim", std::to_string(cfg.embed_dim));
  fields.emplace_back("epochs", std::to_string(cfg.epochs));
  fields.emplace_back("eval_samples", std::to_string(cfg.eval_samples));
  fields.emplace_back("head_hidden_dim", std::to_string(cfg.head_hidden_dim));
  fields.emplace_back("image_dim", std::to_string(cfg.image_dim));
  fields.emplace_back("image_hidden_dims", format_count_list(cfg.image_hidden_dims));
  fields.emplace_back("init_lr", format_real(cfg.init_lr));
  fields.emplace_back("lambda_decay_epochs",
                      cfg.lambda_decay_auto ? "auto" : format_count_list(cfg.lambda_decay_epochs));
  fields.emplace_back("lambda_floor", format_real(cfg.lambda_floor));
  fields.emplace_back("lambda_init", format_real(cfg.lambda_init));
  fields.emplace_back("lambda_step", format_real(cfg.lambda_step));
  fields.emplace_back("learn_tau", cfg.learn_tau ? "1" : "0");
  fields.emplace_back("loss_kind", to_string(cfg.loss_kind));
  fields.emplace_back("max_lr", format_real(cfg.max_lr));
  fields.emplace_back("min_lr", format_real(cfg.min_lr));
  fields.emplace_back("recall_threshold", format_real(cfg.recall_threshold));
  fields.emplace_back("tau_init", format_real(cfg.tau_init));
  fields.emplace_back("text_dim", std::to_string(cfg.text_dim));
  fields.emplace_back("text_hidden_dims", format_count_list(cfg.text_hidden_dims));
  fields.emplace_back("train_samples", std::to_string(cfg.train_samples));
  fields.emplace_back("use_joint_positives", cfg.joint_positives() ? "1" : "0");
  fields.emplace_back("use_multiple_views", cfg.multiple_views() ? "1" : "0");
  fields.emplace_back("use_ncs", cfg.ncs_enabled() ? "1" : "0");
  fields.emplace_back("view_drop_prob", format_real(cfg.view_drop_prob));
  fields.emplace_back("view_noise_sigma", format_real(cfg.view_noise_sigma));
  fields.emplace_back("warmup_epochs", std::to_string(cfg.warmup_epochs));
  fields.emplace_back("weight_decay", format_real(cfg.weight_decay));
  fields.emplace_back("within_class_sigma", format_real(cfg.within_class_sigma));
  return fields;
}

std::string canonical_config_string(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& [key, value] : config_fields(cfg)) {
    out += key;
    out += "=";
    out += value;
    out += "\n";
  }
  return out;
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string canon = canonical_config_string(cfg);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace simcon
