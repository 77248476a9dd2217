#include "dedpo/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace dedpo {

AnnotatorKind parse_annotator_kind(const std::string& s) {
  if (s == "oracle") return AnnotatorKind::oracle;
  if (s == "flip") return AnnotatorKind::flip;
  if (s == "biased") return AnnotatorKind::biased;
  if (s == "fixed") return AnnotatorKind::fixed;
  if (s == "self_training") return AnnotatorKind::self_training;
  throw std::invalid_argument("unknown annotator kind: " + s);
}

std::string annotator_kind_name(AnnotatorKind k) {
  switch (k) {
    case AnnotatorKind::oracle: return "oracle";
    case AnnotatorKind::flip: return "flip";
    case AnnotatorKind::biased: return "biased";
    case AnnotatorKind::fixed: return "fixed";
    case AnnotatorKind::self_training: return "self_training";
  }
  throw std::logic_error("unreachable");
}

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

[[noreturn]] void fail(int line, const std::string& msg) {
  throw ConfigError("config line " + std::to_string(line) + ": " + msg);
}

int to_int(const std::string& v, int line) {
  int out = 0;
  const char* b = v.data();
  const char* e = b + v.size();
  const auto [p, ec] = std::from_chars(b, e, out);
  if (ec != std::errc{} || p != e) fail(line, "expected integer, got '" + v + "'");
  return out;
}

double to_double(const std::string& v, int line) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) fail(line, "expected number, got '" + v + "'");
    return out;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    fail(line, "expected number, got '" + v + "'");
  }
}

bool to_bool(const std::string& v, int line) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  fail(line, "expected on/off, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(v);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<int> to_int_list(const std::string& v, int line) {
  std::vector<int> out;
  for (const auto& item : split_list(v)) out.push_back(to_int(item, line));
  if (out.empty()) fail(line, "expected a non-empty list");
  return out;
}

std::vector<double> to_double_list(const std::string& v, int line) {
  std::vector<double> out;
  for (const auto& item : split_list(v)) out.push_back(to_double(item, line));
  if (out.empty()) fail(line, "expected a non-empty list");
  return out;
}

void apply(ExperimentConfig& c, const std::string& section,
           const std::string& key, const std::string& value, int line,
           bool& saw_version) {
  if (section.empty()) {
    if (key == "format_version") {
      c.format_version = to_int(value, line);
      if (c.format_version != 1)
        fail(line, "unsupported format_version " + value);
      saw_version = true;
      return;
    }
    fail(line, "unknown key '" + key + "' outside any section");
  }
  if (section == "schedule") {
    if (key == "T") {
      c.schedule.T = to_int(value, line);
    } else if (key == "kind") {
      try {
        c.schedule.kind = parse_schedule_kind(value);
      } catch (const std::exception&) {
        fail(line, "unknown schedule kind '" + value + "'");
      }
    } else {
      fail(line, "unknown key '" + key + "' in [schedule]");
    }
  } else if (section == "dataset") {
    if (key == "n_pairs") c.dataset.n_pairs = to_int(value, line);
    else if (key == "labeled_fraction") c.dataset.labeled_fraction = to_double(value, line);
    else fail(line, "unknown key '" + key + "' in [dataset]");
  } else if (section == "annotator") {
    if (key == "kind") {
      try {
        c.annotator.kind = parse_annotator_kind(value);
      } catch (const std::exception&) {
        fail(line, "unknown annotator kind '" + value + "'");
      }
    } else if (key == "accuracy") {
      c.annotator.accuracy = to_double(value, line);
    } else if (key == "bias_scale") {
      c.annotator.bias_scale = to_double(value, line);
    } else if (key == "flip_prob") {
      c.annotator.flip_prob = to_double(value, line);
    } else if (key == "table") {
      c.annotator.table = value;
    } else if (key == "tau") {
      c.annotator.tau = to_double(value, line);
    } else if (key == "augment") {
      try {
        c.annotator.augment = parse_self_train_augment(value);
      } catch (const std::exception&) {
        fail(line, "unknown augment '" + value + "'");
      }
    } else if (key == "calib_pairs") {
      c.annotator.calib_pairs = to_int(value, line);
    } else {
      fail(line, "unknown key '" + key + "' in [annotator]");
    }
  } else if (section == "pretrain") {
    if (key == "steps") c.pretrain.steps = to_int(value, line);
    else if (key == "batch_size") c.pretrain.batch_size = to_int(value, line);
    else if (key == "lr") c.pretrain.lr = to_double(value, line);
    else if (key == "null_fraction") c.pretrain.null_fraction = to_double(value, line);
    else fail(line, "unknown key '" + key + "' in [pretrain]");
  } else if (section == "train") {
    if (key == "estimator") {
      try {
        c.train.estimator = parse_estimator(value);
      } catch (const std::exception&) {
        fail(line, "unknown estimator '" + value + "'");
      }
    } else if (key == "beta") {
      c.train.beta = to_double(value, line);
    } else if (key == "steps") {
      c.train.steps = to_int(value, line);
    } else if (key == "batch_size") {
      c.train.batch_size = to_int(value, line);
    } else if (key == "lr") {
      c.train.lr = to_double(value, line);
    } else if (key == "warmup") {
      c.train.warmup = to_int(value, line);
    } else if (key == "snapshot_every") {
      c.train.snapshot_every = to_int(value, line);
    } else if (key == "eval_samples") {
      c.train.eval_samples = to_int(value, line);
    } else if (key == "eval_guidance") {
      c.train.eval_guidance = to_double(value, line);
    } else {
      fail(line, "unknown key '" + key + "' in [train]");
    }
  } else if (section == "sweep") {
    if (key == "estimators") {
      c.sweep.estimators.clear();
      for (const auto& item : split_list(value)) {
        try {
          c.sweep.estimators.push_back(parse_estimator(item));
        } catch (const std::exception&) {
          fail(line, "unknown estimator '" + item + "'");
        }
      }
      if (c.sweep.estimators.empty()) fail(line, "expected a non-empty list");
    } else if (key == "accuracies") {
      c.sweep.accuracies = to_double_list(value, line);
    } else if (key == "n_l") {
      c.sweep.n_l = to_int_list(value, line);
    } else if (key == "n_u_factor") {
      c.sweep.n_u_factor = to_int(value, line);
    } else if (key == "seeds") {
      c.sweep.seeds = to_int(value, line);
    } else if (key == "rate") {
      c.sweep.rate = to_bool(value, line);
    } else {
      fail(line, "unknown key '" + key + "' in [sweep]");
    }
  } else if (section == "rate") {
    if (key == "feature_dim") c.rate.feature_dim = to_int(value, line);
    else if (key == "theta_norm") c.rate.theta_norm = to_double(value, line);
    else if (key == "labeled_fraction") c.rate.labeled_fraction = to_double(value, line);
    else if (key == "inject_gain") c.rate.inject_gain = to_double(value, line);
    else if (key == "grid_n") c.rate.grid_n = to_int_list(value, line);
    else if (key == "rate_seeds") c.rate.rate_seeds = to_int(value, line);
    else if (key == "eps_grid") c.rate.eps_grid = to_double_list(value, line);
    else if (key == "eps_seeds") c.rate.eps_seeds = to_int(value, line);
    else if (key == "eps_n") c.rate.eps_n = to_int(value, line);
    else if (key == "star_multiplier") c.rate.star_multiplier = to_int(value, line);
    else fail(line, "unknown key '" + key + "' in [rate]");
  } else if (section == "verify") {
    if (key == "checks") c.verify.checks = split_list(value);
    else fail(line, "unknown key '" + key + "' in [verify]");
  } else {
    fail(line, "unknown section [" + section + "]");
  }
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig c;
  bool saw_version = false;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::size_t hash = raw.find_first_of("#;");
    std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') fail(line, "unterminated section header");
      section = trim(s.substr(1, s.size() - 2));
      if (section.empty()) fail(line, "empty section name");
      continue;
    }
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos) fail(line, "expected key = value");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty()) fail(line, "empty key");
    apply(c, section, key, value, line, saw_version);
  }
  if (!saw_version) throw ConfigError("config: missing format_version");
  return c;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace dedpo
