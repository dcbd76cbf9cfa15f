#include "xvseg/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace xvseg {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used == v.size()) return out;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": not a number ('" + v + "')");
}

int parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const int out = std::stoi(v, &used);
    if (used == v.size()) return out;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": not an integer ('" + v + "')");
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const std::uint64_t out = std::stoull(v, &used);
    if (used == v.size() && v[0] != '-') return out;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": not a nonnegative integer ('" + v + "')");
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError(key + ": expected true or false ('" + v + "')");
}

std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(parse_double(key, trim(item)));
  }
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

std::string fmt_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += fmt_double(v[i]);
  }
  return out;
}

struct Binding {
  std::string key;
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

std::vector<Binding> bindings(ExperimentConfig& c) {
  std::vector<Binding> out;
  auto dbl = [&out](const char* key, double* p) {
    out.push_back({key, [key, p](const std::string& v) { *p = parse_double(key, v); },
                   [p] { return fmt_double(*p); }});
  };
  auto integer = [&out](const char* key, int* p) {
    out.push_back({key, [key, p](const std::string& v) { *p = parse_int(key, v); },
                   [p] { return std::to_string(*p); }});
  };
  auto u64 = [&out](const char* key, std::uint64_t* p) {
    out.push_back({key, [key, p](const std::string& v) { *p = parse_u64(key, v); },
                   [p] { return std::to_string(*p); }});
  };
  auto boolean = [&out](const char* key, bool* p) {
    out.push_back({key, [key, p](const std::string& v) { *p = parse_bool(key, v); },
                   [p] { return *p ? "true" : "false"; }});
  };

  out.push_back({"data.regime",
                 [&c](const std::string& v) { c.data.regime = parse_regime(v); },
                 [&c] { return regime_name(c.data.regime); }});
  integer("data.train_count", &c.data.train_count);
  integer("data.val_count", &c.data.val_count);
  integer("data.image_size", &c.data.image_size);
  integer("data.min_shapes", &c.data.min_shapes);
  integer("data.max_shapes", &c.data.max_shapes);
  dbl("data.noise", &c.data.noise);
  dbl("data.pixel_fraction", &c.data.pixel_fraction);
  u64("data.seed", &c.data.seed);

  out.push_back({"views.scales",
                 [&c](const std::string& v) {
                   c.settings.views.scales = parse_list("views.scales", v);
                 },
                 [&c] { return fmt_list(c.settings.views.scales); }});
  boolean("views.hflip", &c.settings.views.hflip);
  dbl("views.jitter_brightness", &c.settings.views.color.brightness);
  dbl("views.jitter_contrast", &c.settings.views.color.contrast);
  dbl("views.jitter_saturation", &c.settings.views.color.saturation);
  dbl("views.jitter_hue", &c.settings.views.color.hue);

  integer("net.d_model", &c.settings.d_model);
  integer("net.d", &c.settings.d);

  boolean("cvlr.enabled", &c.settings.use_cvlr);
  dbl("cvlr.tau", &c.settings.cvlr.tau);
  integer("cvlr.iterations", &c.settings.cvlr.T);
  boolean("cvlr.shared_dictionary", &c.settings.cvlr.shared_dictionary);
  boolean("cvlr.latent_reg", &c.settings.latent_reg);

  dbl("mvmc.gamma", &c.settings.mvmc.gamma);
  dbl("mvmc.tie_delta", &c.settings.mvmc.tie_delta);
  integer("mvmc.refine_iterations", &c.settings.mvmc.refine.iterations);
  integer("mvmc.refine_kernel", &c.settings.mvmc.refine.kernel_size);
  dbl("mvmc.refine_sigma", &c.settings.mvmc.refine.sigma_color);

  dbl("loss.lambda_seg", &c.settings.weights.lambda_seg);
  dbl("loss.lambda_cls", &c.settings.weights.lambda_cls);
  dbl("loss.lambda_reg", &c.settings.weights.lambda_reg);
  integer("loss.warmup_epochs", &c.settings.weights.warmup_epochs);

  dbl("optim.lr", &c.settings.optim.lr);
  dbl("optim.momentum", &c.settings.optim.momentum);
  dbl("optim.weight_decay", &c.settings.optim.weight_decay);
  dbl("optim.clip", &c.settings.optim.clip);
  integer("optim.epochs", &c.settings.optim.epochs);
  integer("optim.batch", &c.settings.optim.batch);

  integer("train.pixel_oversample", &c.settings.pixel_oversample);
  dbl("train.pixel_loss_scale", &c.settings.pixel_loss_scale);
  u64("run.seed", &c.settings.seed);
  return out;
}

void assign(ExperimentConfig& c, const std::string& key,
            const std::string& value) {
  for (Binding& b : bindings(c)) {
    if (b.key == key) {
      b.set(value);
      return;
    }
  }
  throw ConfigError("config: unknown key '" + key + "'");
}

}  // namespace

ExperimentConfig ExperimentConfig::from_text(const std::string& text) {
  ExperimentConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: line " + std::to_string(lineno) +
                        ": expected key = value, got '" + stripped + "'");
    }
    assign(cfg, trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

void ExperimentConfig::set_override(const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("config: override '" + assignment +
                      "' is not of the form key=value");
  }
  assign(*this, trim(assignment.substr(0, eq)),
         trim(assignment.substr(eq + 1)));
}

std::string ExperimentConfig::serialize() const {
  // bindings() only writes through the pointers on set; get is const-safe.
  ExperimentConfig& self = const_cast<ExperimentConfig&>(*this);
  std::string out;
  std::string section;
  for (Binding& b : bindings(self)) {
    const std::string sec = b.key.substr(0, b.key.find('.'));
    if (sec != section) {
      if (!out.empty()) out += "\n";
      section = sec;
    }
    out += b.key + " = " + b.get() + "\n";
  }
  return out;
}

}  // namespace xvseg
