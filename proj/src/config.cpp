#include "dudf/config.hpp"

#include "dudf/field_math.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace dudf {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  return out;
}

struct Entry {
  std::string key;  // section.key
  std::string value;
  std::size_t line;
};

[[noreturn]] void fail(const Entry& e, const std::string& what) {
  throw ConfigError("'" + e.key + "': " + what, e.line);
}

double to_double(const Entry& e, const std::string& text) {
  const auto slash = text.find('/');
  try {
    std::size_t used = 0;
    if (slash != std::string::npos) {
      const double num = std::stod(trim(text.substr(0, slash)));
      const double den = std::stod(trim(text.substr(slash + 1)));
      if (den == 0.0) fail(e, "zero denominator");
      return num / den;
    }
    const double v = std::stod(text, &used);
    if (used != text.size() || !std::isfinite(v)) fail(e, "not a number: '" + text + "'");
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    fail(e, "not a number: '" + text + "'");
  }
}

long long to_integer(const Entry& e, const std::string& text) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(text, &used);
    if (used != text.size()) fail(e, "not an integer: '" + text + "'");
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    fail(e, "not an integer: '" + text + "'");
  }
}

std::size_t to_count(const Entry& e, const std::string& text) {
  const long long v = to_integer(e, text);
  if (v < 0) fail(e, "must be nonnegative");
  return static_cast<std::size_t>(v);
}

bool to_bool(const Entry& e, const std::string& text) {
  std::string t = text;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  fail(e, "not a boolean: '" + text + "'");
}

Vec3 to_vec3(const Entry& e, const std::string& text) {
  const auto parts = split(text, ',');
  if (parts.size() != 3) fail(e, "expected three comma-separated numbers");
  return Vec3(to_double(e, parts[0]), to_double(e, parts[1]), to_double(e, parts[2]));
}

std::vector<LrPhase> to_phases(const Entry& e) {
  std::vector<LrPhase> phases;
  for (const auto& item : split(e.value, ',')) {
    const auto parts = split(item, ':');
    if (parts.size() < 2) fail(e, "phase '" + item + "' needs fraction:learning_rate");
    LrPhase ph;
    ph.fraction = to_double(e, parts[0]);
    ph.learning_rate = to_double(e, parts[1]);
    for (std::size_t k = 2; k < parts.size(); ++k) {
      if (parts[k] == "cosine")
        ph.cosine = true;
      else if (parts[k] == "refine")
        ph.refinement = true;
      else
        fail(e, "unknown phase flag '" + parts[k] + "'");
    }
    phases.push_back(ph);
  }
  return phases;
}

std::vector<PointLight> to_lights(const Entry& e) {
  std::vector<PointLight> lights;
  for (const auto& item : split(e.value, ';')) {
    if (item.empty()) continue;
    const auto parts = split(item, ',');
    if (parts.size() != 4) fail(e, "light '" + item + "' needs x,y,z,intensity");
    lights.push_back({Vec3(to_double(e, parts[0]), to_double(e, parts[1]), to_double(e, parts[2])),
                      to_double(e, parts[3])});
  }
  return lights;
}

CloudFormat to_format(const Entry& e) {
  if (e.value == "auto") return CloudFormat::Auto;
  if (e.value == "obj") return CloudFormat::Obj;
  if (e.value == "ply") return CloudFormat::Ply;
  if (e.value == "xyz") return CloudFormat::Xyz;
  fail(e, "format must be auto, obj, ply or xyz");
}

using Setter = std::function<void(RunConfig&, const Entry&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"input.cloud", [](RunConfig& c, const Entry& e) { c.input = e.value; }},
      {"input.format", [](RunConfig& c, const Entry& e) { c.input_format = to_format(e); }},
      {"input.shape",
       [](RunConfig& c, const Entry& e) {
         try {
           validate(parse_shape(e.value));
         } catch (const std::exception& ex) {
           fail(e, ex.what());
         }
         c.shape = e.value;
       }},
      {"input.points", [](RunConfig& c, const Entry& e) { c.cloud_points = to_count(e, e.value); }},
      {"input.reference_points", [](RunConfig& c, const Entry& e) { c.reference_points = to_count(e, e.value); }},
      {"output.dir", [](RunConfig& c, const Entry& e) { c.output_dir = e.value; }},

      {"train.iterations", [](RunConfig& c, const Entry& e) { c.train.iterations = static_cast<int>(to_integer(e, e.value)); }},
      {"train.batch_size", [](RunConfig& c, const Entry& e) { c.train.batch_size = to_count(e, e.value); }},
      {"train.alpha",
       [](RunConfig& c, const Entry& e) {
         try {
           c.train.alpha = ScalingParams(to_double(e, e.value));
         } catch (const ConfigError&) {
           throw;
         } catch (const std::exception& ex) {
           fail(e, ex.what());
         }
       }},
      {"train.hidden_layers", [](RunConfig& c, const Entry& e) { c.train.hidden_layers = static_cast<int>(to_integer(e, e.value)); }},
      {"train.width", [](RunConfig& c, const Entry& e) { c.train.width = static_cast<int>(to_integer(e, e.value)); }},
      {"train.omega0", [](RunConfig& c, const Entry& e) { c.train.omega0 = to_double(e, e.value); }},
      {"train.seed", [](RunConfig& c, const Entry& e) { c.train.seed = to_count(e, e.value); }},
      {"train.deterministic", [](RunConfig& c, const Entry& e) { c.train.deterministic = to_bool(e, e.value); }},
      {"train.near_sigma", [](RunConfig& c, const Entry& e) { c.train.near_sigma = to_double(e, e.value); }},
      {"train.clip_norm", [](RunConfig& c, const Entry& e) { c.train.clip_norm = to_double(e, e.value); }},
      {"train.lambda_e", [](RunConfig& c, const Entry& e) { c.train.weights.eikonal = to_double(e, e.value); }},
      {"train.lambda_d", [](RunConfig& c, const Entry& e) { c.train.weights.dirichlet = to_double(e, e.value); }},
      {"train.lambda_n", [](RunConfig& c, const Entry& e) { c.train.weights.neumann = to_double(e, e.value); }},
      {"train.lambda_g", [](RunConfig& c, const Entry& e) { c.train.weights.mcurv = to_double(e, e.value); }},
      {"train.lambda_mu", [](RunConfig& c, const Entry& e) { c.train.weights.refine_mean = to_double(e, e.value); }},
      {"train.lambda_sigma", [](RunConfig& c, const Entry& e) { c.train.weights.refine_std = to_double(e, e.value); }},
      {"train.phases", [](RunConfig& c, const Entry& e) { c.train.phases = to_phases(e); }},

      {"reconstruct.resolution", [](RunConfig& c, const Entry& e) { c.grid_resolution = static_cast<int>(to_integer(e, e.value)); }},

      {"render.width", [](RunConfig& c, const Entry& e) { c.camera.width = static_cast<int>(to_integer(e, e.value)); }},
      {"render.height", [](RunConfig& c, const Entry& e) { c.camera.height = static_cast<int>(to_integer(e, e.value)); }},
      {"render.fov", [](RunConfig& c, const Entry& e) { c.camera.fov_degrees = to_double(e, e.value); }},
      {"render.position", [](RunConfig& c, const Entry& e) { c.camera.position = to_vec3(e, e.value); }},
      {"render.look_at", [](RunConfig& c, const Entry& e) { c.camera.look_at = to_vec3(e, e.value); }},
      {"render.up", [](RunConfig& c, const Entry& e) { c.camera.up = to_vec3(e, e.value); }},
      {"render.epsilon", [](RunConfig& c, const Entry& e) { c.render.epsilon = to_double(e, e.value); }},
      {"render.max_steps", [](RunConfig& c, const Entry& e) { c.render.max_steps = static_cast<int>(to_integer(e, e.value)); }},
      {"render.safety", [](RunConfig& c, const Entry& e) { c.render.safety = to_double(e, e.value); }},
      {"render.refine_iterations", [](RunConfig& c, const Entry& e) { c.render.refine_iterations = static_cast<int>(to_integer(e, e.value)); }},
      {"render.background", [](RunConfig& c, const Entry& e) { c.render.background = to_vec3(e, e.value); }},
      {"render.lights", [](RunConfig& c, const Entry& e) { c.render.lights = to_lights(e); }},
      {"render.ambient", [](RunConfig& c, const Entry& e) { c.render.material.ambient = to_vec3(e, e.value); }},
      {"render.diffuse", [](RunConfig& c, const Entry& e) { c.render.material.diffuse = to_vec3(e, e.value); }},
      {"render.specular", [](RunConfig& c, const Entry& e) { c.render.material.specular = to_vec3(e, e.value); }},
      {"render.shininess", [](RunConfig& c, const Entry& e) { c.render.material.shininess = to_double(e, e.value); }},

      {"eval.samples", [](RunConfig& c, const Entry& e) { c.eval_samples = to_count(e, e.value); }},
      {"eval.seed", [](RunConfig& c, const Entry& e) { c.eval_seed = to_count(e, e.value); }},
      {"eval.reference", [](RunConfig& c, const Entry& e) { c.eval_reference = e.value; }},

      {"ablate.alpha",
       [](RunConfig& c, const Entry& e) {
         c.ablate_alpha.clear();
         for (const auto& v : split(e.value, ',')) {
           const double a = to_double(e, v);
           if (!(a > 0.0)) fail(e, "alpha values must be positive");
           c.ablate_alpha.push_back(a);
         }
       }},
      {"ablate.toggles",
       [](RunConfig& c, const Entry& e) {
         c.ablate_toggles.clear();
         for (const auto& v : split(e.value, ',')) {
           const auto& names = ablation_toggle_names();
           if (std::find(names.begin(), names.end(), v) == names.end()) fail(e, "unknown loss term '" + v + "'");
           c.ablate_toggles.push_back(v);
         }
       }},
  };
  return table;
}

}  // namespace

const std::vector<std::string>& ablation_toggle_names() {
  static const std::vector<std::string> names{"eikonal", "dirichlet", "neumann", "mcurv", "refinement"};
  return names;
}

void apply_toggle(LossWeights& w, const std::string& toggle) {
  if (toggle == "eikonal")
    w.eikonal = 0.0;
  else if (toggle == "dirichlet")
    w.dirichlet = 0.0;
  else if (toggle == "neumann")
    w.neumann = 0.0;
  else if (toggle == "mcurv")
    w.mcurv = 0.0;
  else if (toggle == "refinement")
    w.refine_mean = w.refine_std = 0.0;
  else
    throw std::invalid_argument("unknown loss term '" + toggle + "'");
}

void RunConfig::check() const {
  if (input && shape) throw ConfigError("[input] cloud and shape are mutually exclusive");
  if (shape && cloud_points == 0) throw ConfigError("[input] points must be positive");
  if (grid_resolution < 8) throw ConfigError("[reconstruct] resolution must be at least 8");
  if (eval_samples == 0) throw ConfigError("[eval] samples must be positive");
  try {
    train.check();
    camera.check();
    render.check();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig config;
  std::istringstream in(text);
  std::string line, section;
  std::size_t line_no = 0;
  std::map<std::string, std::size_t> seen;
  while (std::getline(in, line)) {
    ++line_no;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line.resize(comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("unterminated section header", line_no);
      section = trim(line.substr(1, line.size() - 2));
      static const char* kSections[] = {"input", "output", "train", "reconstruct", "render", "eval", "ablate"};
      if (std::find(std::begin(kSections), std::end(kSections), section) == std::end(kSections))
        throw ConfigError("unknown section [" + section + "]", line_no);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value", line_no);
    if (section.empty()) throw ConfigError("key outside of any section", line_no);
    const Entry e{section + "." + trim(line.substr(0, eq)), trim(line.substr(eq + 1)), line_no};
    const auto it = setters().find(e.key);
    if (it == setters().end()) throw ConfigError("unknown key '" + e.key + "'", line_no);
    if (auto [prev, fresh] = seen.emplace(e.key, line_no); !fresh)
      throw ConfigError("duplicate key '" + e.key + "' (first set on line " + std::to_string(prev->second) + ")",
                        line_no);
    if (e.value.empty()) fail(e, "missing value");
    it->second(config, e);
  }
  config.check();
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_run_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string format_run_config(const RunConfig& c) {
  std::ostringstream out;
  char buf[128];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  auto vec = [&](const Vec3& v) { return num(v.x()) + "," + num(v.y()) + "," + num(v.z()); };

  out << "[input]\n";
  if (c.input) out << "cloud = " << c.input->string() << "\n";
  static const char* kFormats[] = {"auto", "obj", "ply", "xyz"};
  out << "format = " << kFormats[static_cast<int>(c.input_format)] << "\n";
  if (c.shape) out << "shape = " << *c.shape << "\n";
  out << "points = " << c.cloud_points << "\n";
  out << "reference_points = " << c.reference_points << "\n";
  out << "\n[output]\ndir = " << c.output_dir.string() << "\n";

  const TrainConfig& t = c.train;
  out << "\n[train]\n";
  out << "iterations = " << t.iterations << "\n";
  out << "batch_size = " << t.batch_size << "\n";
  out << "alpha = " << num(t.alpha.alpha()) << "\n";
  out << "hidden_layers = " << t.hidden_layers << "\n";
  out << "width = " << t.width << "\n";
  out << "omega0 = " << num(t.omega0) << "\n";
  out << "seed = " << t.seed << "\n";
  out << "deterministic = " << (t.deterministic ? "true" : "false") << "\n";
  out << "near_sigma = " << num(t.near_sigma) << "\n";
  out << "clip_norm = " << num(t.clip_norm) << "\n";
  out << "lambda_e = " << num(t.weights.eikonal) << "\n";
  out << "lambda_d = " << num(t.weights.dirichlet) << "\n";
  out << "lambda_n = " << num(t.weights.neumann) << "\n";
  out << "lambda_g = " << num(t.weights.mcurv) << "\n";
  out << "lambda_mu = " << num(t.weights.refine_mean) << "\n";
  out << "lambda_sigma = " << num(t.weights.refine_std) << "\n";
  out << "phases = ";
  for (std::size_t k = 0; k < t.phases.size(); ++k) {
    const auto& ph = t.phases[k];
    out << (k ? ", " : "") << num(ph.fraction) << ":" << num(ph.learning_rate) << (ph.cosine ? ":cosine" : "")
        << (ph.refinement ? ":refine" : "");
  }
  out << "\n";

  out << "\n[reconstruct]\nresolution = " << c.grid_resolution << "\n";

  out << "\n[render]\n";
  out << "width = " << c.camera.width << "\nheight = " << c.camera.height << "\n";
  out << "fov = " << num(c.camera.fov_degrees) << "\n";
  out << "position = " << vec(c.camera.position) << "\n";
  out << "look_at = " << vec(c.camera.look_at) << "\n";
  out << "up = " << vec(c.camera.up) << "\n";
  out << "epsilon = " << num(c.render.epsilon) << "\n";
  out << "max_steps = " << c.render.max_steps << "\n";
  out << "safety = " << num(c.render.safety) << "\n";
  out << "refine_iterations = " << c.render.refine_iterations << "\n";
  out << "background = " << vec(c.render.background) << "\n";
  if (!c.render.lights.empty()) {
    out << "lights = ";
    for (std::size_t k = 0; k < c.render.lights.size(); ++k)
      out << (k ? "; " : "") << vec(c.render.lights[k].position) << "," << num(c.render.lights[k].intensity);
    out << "\n";
  }
  out << "ambient = " << vec(c.render.material.ambient) << "\n";
  out << "diffuse = " << vec(c.render.material.diffuse) << "\n";
  out << "specular = " << vec(c.render.material.specular) << "\n";
  out << "shininess = " << num(c.render.material.shininess) << "\n";

  out << "\n[eval]\nsamples = " << c.eval_samples << "\nseed = " << c.eval_seed << "\n";
  if (c.eval_reference) out << "reference = " << c.eval_reference->string() << "\n";

  if (!c.ablate_alpha.empty() || !c.ablate_toggles.empty()) {
    out << "\n[ablate]\n";
    if (!c.ablate_alpha.empty()) {
      out << "alpha = ";
      for (std::size_t k = 0; k < c.ablate_alpha.size(); ++k) out << (k ? ", " : "") << num(c.ablate_alpha[k]);
      out << "\n";
    }
    if (!c.ablate_toggles.empty()) {
      out << "toggles = ";
      for (std::size_t k = 0; k < c.ablate_toggles.size(); ++k) out << (k ? ", " : "") << c.ablate_toggles[k];
      out << "\n";
    }
  }
  return out.str();
}

}  // namespace dudf
