#include "config.hpp"

#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "error.hpp"

namespace fiberpinn {

using nlohmann::json;

json default_config_document() {
  return json{
      {"mesh",
       {{"path", ""},
        {"format", ""},
        {"generator", "sheet"},
        {"width_mm", 100.0},
        {"height_mm", 100.0},
        {"nx", 50},
        {"ny", 50},
        {"subdivisions", 3},
        {"radius_mm", 50.0},
        {"length_mm", 100.0}}},
      {"frames", {{"smoothing_iters", 100}, {"seed_vertex", 0}, {"seed_direction", {1.0, 0.0, 0.0}}}},
      {"synthetic",
       {{"enabled", true},
        {"fiber_rule", "constant"},
        {"fiber_angle_deg", 30.0},
        {"fiber_slope_deg_per_mm", 0.0},
        {"fiber_axis", {1.0, 0.0, 0.0}},
        {"speed_long", 0.6},
        {"speed_trans", 0.4},
        {"sources", {{50.0, 50.0, 0.0, 0.0}}},
        {"sample_count", 200},
        {"noise_sigma_ms", 0.0},
        {"rng_seed", 1},
        {"train_fraction", 1.0}}},
      {"data", {{"samples", ""}, {"ground_truth", ""}}},
      {"net",
       {{"phi_layers", 7},
        {"phi_width", 20},
        {"d_layers", 5},
        {"d_width", 5},
        {"d_max", 5.0},
        {"normal_eigenvalue", "zero"}}},
      {"loss",
       {{"alpha_m", 1e4},
        {"alpha_theta", 1e-4},
        {"alpha_d", 1e-3},
        {"epsilon", 1e-8},
        {"delta", 5e-2},
        {"tv_mode", "world"}}},
      {"train",
       {{"adam_lr", 1e-3},
        {"adam_epochs", 10000},
        {"adam_beta1", 0.9},
        {"adam_beta2", 0.999},
        {"adam_eps", 1e-8},
        {"lbfgs_memory", 10},
        {"lbfgs_gtol", 1e-8},
        {"lbfgs_max_iter", 12000},
        {"lbfgs_ftol", 0.0},
        {"restarts", 4},
        {"batch_size", 0}}},
      {"evaluate", {{"checkpoint", ""}}},
      {"run", {{"seed", 0}, {"out", "out"}, {"jobs", 1}, {"log_every", 0}}},
  };
}

namespace {

[[noreturn]] void field_error(const std::string& field, const std::string& msg) {
  fail(ErrorKind::Config, "config field '" + field + "': " + msg);
}

bool same_kind(const json& ref, const json& v) {
  if (ref.is_number()) return v.is_number();
  if (ref.is_string()) return v.is_string();
  if (ref.is_boolean()) return v.is_boolean();
  if (ref.is_array()) return v.is_array();
  return ref.type() == v.type();
}

const char* kind_name(const json& ref) {
  if (ref.is_number_integer()) return "an integer";
  if (ref.is_number()) return "a number";
  if (ref.is_string()) return "a string";
  if (ref.is_boolean()) return "a boolean";
  if (ref.is_array()) return "an array";
  return "an object";
}

void assign_field(json& doc, const std::string& section, const std::string& key, const json& value) {
  const std::string field = section + "." + key;
  if (!doc.contains(section)) fail(ErrorKind::Config, "unknown config section '" + section + "'");
  json& sec = doc[section];
  if (!sec.contains(key)) field_error(field, "unknown key");
  if (!same_kind(sec[key], value)) field_error(field, std::string("expected ") + kind_name(sec[key]));
  if (sec[key].is_number_integer() && !value.is_number_integer()) {
    const double d = value.get<double>();
    if (d != static_cast<double>(static_cast<long long>(d))) field_error(field, "expected an integer");
    sec[key] = static_cast<long long>(d);
    return;
  }
  sec[key] = value;
}

void merge_document(json& doc, const json& user) {
  if (!user.is_object()) fail(ErrorKind::Config, "config root must be an object");
  for (const auto& [section, body] : user.items()) {
    if (!doc.contains(section)) fail(ErrorKind::Config, "unknown config section '" + section + "'");
    if (!body.is_object()) fail(ErrorKind::Config, "config section '" + section + "' must be an object");
    for (const auto& [key, value] : body.items()) assign_field(doc, section, key, value);
  }
}

void apply_set(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) fail(ErrorKind::Config, "override '" + assignment + "' is not of the form section.key=value");
  const std::string lhs = assignment.substr(0, eq);
  const std::string rhs = assignment.substr(eq + 1);
  const auto dot = lhs.find('.');
  if (dot == std::string::npos) fail(ErrorKind::Config, "override key '" + lhs + "' must be section.key");
  json value = json::parse(rhs, nullptr, false);
  if (value.is_discarded()) value = rhs;  // bare strings need no quotes
  const std::string section = lhs.substr(0, dot);
  const std::string key = lhs.substr(dot + 1);
  // A bare string given for a string field stays a string even if it parses as JSON.
  if (doc.contains(section) && doc[section].contains(key) && doc[section][key].is_string() && !value.is_string()) {
    value = rhs;
  }
  assign_field(doc, section, key, value);
}

template <class T>
T get_num(const json& doc, const char* section, const char* key) {
  return doc.at(section).at(key).get<T>();
}

Vec3 get_vec3(const json& doc, const char* section, const char* key) {
  const json& a = doc.at(section).at(key);
  const std::string field = std::string(section) + "." + key;
  if (a.size() != 3) field_error(field, "expected 3 numbers");
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!a[i].is_number()) field_error(field, "expected 3 numbers");
    v[i] = a[i].get<double>();
  }
  if (!v.allFinite()) field_error(field, "must be finite");
  return v;
}

std::filesystem::path resolve_path(const std::string& p, const std::filesystem::path& base) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  if (path.is_relative()) path = base / path;
  return path.lexically_normal();
}

void require_file(const std::filesystem::path& p, const std::string& field) {
  if (p.empty()) return;
  std::error_code ec;
  if (!std::filesystem::is_regular_file(p, ec)) field_error(field, "file '" + p.string() + "' does not exist");
}

bool is_nonneg_int(const json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
}

// Re-raises a validation failure of a sub-object with its config section.
template <class F>
void validate_section(const std::string& section, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    fail(ErrorKind::Config, "config section '" + section + "': " + e.what());
  }
}

}  // namespace

RunConfig config_from_document(const json& input, const std::filesystem::path& base_dir) {
  json doc = default_config_document();
  merge_document(doc, input);

  RunConfig cfg;
  auto& m = cfg.mesh;
  {
    const auto& s = doc["mesh"];
    const std::string path = s["path"];
    const std::string fmt = s["format"];
    m.path = resolve_path(path, base_dir);
    if (!fmt.empty()) {
      try {
        m.format = parse_mesh_format(fmt);
      } catch (const Error& e) {
        field_error("mesh.format", e.what());
      }
    }
    m.generator = s["generator"].get<std::string>();
    m.width_mm = s["width_mm"];
    m.height_mm = s["height_mm"];
    m.nx = s["nx"];
    m.ny = s["ny"];
    m.subdivisions = s["subdivisions"];
    m.radius_mm = s["radius_mm"];
    m.length_mm = s["length_mm"];
    if (m.path.empty()) {
      if (m.generator != "sheet" && m.generator != "icosphere" && m.generator != "cylinder") {
        field_error("mesh.generator", "expected sheet, icosphere or cylinder (or set mesh.path)");
      }
      if (!(m.width_mm > 0.0)) field_error("mesh.width_mm", "must be positive");
      if (!(m.height_mm > 0.0)) field_error("mesh.height_mm", "must be positive");
      if (m.nx < 2) field_error("mesh.nx", "must be >= 2");
      if (m.ny < 2) field_error("mesh.ny", "must be >= 2");
      if (m.subdivisions < 0 || m.subdivisions > 7) field_error("mesh.subdivisions", "must lie in [0, 7]");
      if (!(m.radius_mm > 0.0)) field_error("mesh.radius_mm", "must be positive");
      if (!(m.length_mm > 0.0)) field_error("mesh.length_mm", "must be positive");
    } else {
      require_file(m.path, "mesh.path");
    }
    doc["mesh"]["path"] = m.path.string();
  }

  {
    cfg.frames.smoothing_iters = get_num<int>(doc, "frames", "smoothing_iters");
    cfg.frames.seed_vertex = get_num<int>(doc, "frames", "seed_vertex");
    cfg.frames.seed_direction = get_vec3(doc, "frames", "seed_direction");
    if (cfg.frames.smoothing_iters < 0) field_error("frames.smoothing_iters", "must be nonnegative");
    if (cfg.frames.seed_vertex < 0) field_error("frames.seed_vertex", "must be nonnegative");
    if (cfg.frames.seed_direction.norm() == 0.0) field_error("frames.seed_direction", "must be nonzero");
  }

  {
    const auto& s = doc["synthetic"];
    cfg.synthetic_enabled = s["enabled"];
    auto& sp = cfg.synthetic;
    const std::string rule = s["fiber_rule"];
    if (rule == "constant") {
      sp.fiber.kind = FiberRule::Kind::Constant;
    } else if (rule == "linear") {
      sp.fiber.kind = FiberRule::Kind::Linear;
    } else {
      field_error("synthetic.fiber_rule", "expected constant or linear");
    }
    sp.fiber.angle_deg = s["fiber_angle_deg"];
    sp.fiber.slope_deg_per_mm = s["fiber_slope_deg_per_mm"];
    sp.fiber.axis = get_vec3(doc, "synthetic", "fiber_axis");
    sp.speed_long = s["speed_long"];
    sp.speed_trans = s["speed_trans"];
    sp.sources.clear();
    for (const auto& src : s["sources"]) {
      if (!src.is_array() || src.size() != 4) field_error("synthetic.sources", "each source is [x, y, z, t0]");
      for (const auto& c : src) {
        if (!c.is_number()) field_error("synthetic.sources", "each source is [x, y, z, t0]");
      }
      sp.sources.emplace_back(Vec3(src[0].get<double>(), src[1].get<double>(), src[2].get<double>()),
                              src[3].get<double>());
    }
    sp.sample_count = s["sample_count"];
    sp.noise_sigma_ms = s["noise_sigma_ms"];
    if (!is_nonneg_int(s["rng_seed"])) field_error("synthetic.rng_seed", "must be a nonnegative integer");
    sp.rng_seed = s["rng_seed"].get<std::uint64_t>();
    sp.train_fraction = s["train_fraction"];
    if (!(sp.speed_long > 0.0)) field_error("synthetic.speed_long", "must be positive");
    if (!(sp.speed_trans > 0.0)) field_error("synthetic.speed_trans", "must be positive");
    if (sp.sample_count < 1) field_error("synthetic.sample_count", "must be >= 1");
    if (!(sp.noise_sigma_ms >= 0.0)) field_error("synthetic.noise_sigma_ms", "must be nonnegative");
    if (!(sp.train_fraction > 0.0 && sp.train_fraction <= 1.0)) {
      field_error("synthetic.train_fraction", "must lie in (0, 1]");
    }
    if (sp.sources.empty()) field_error("synthetic.sources", "must not be empty");
    validate_section("synthetic", [&] { sp.validate(); });
  }

  {
    const std::string samples = doc["data"]["samples"];
    const std::string truth = doc["data"]["ground_truth"];
    cfg.samples_path = resolve_path(samples, base_dir);
    cfg.ground_truth_path = resolve_path(truth, base_dir);
    require_file(cfg.samples_path, "data.samples");
    require_file(cfg.ground_truth_path, "data.ground_truth");
    doc["data"]["samples"] = cfg.samples_path.string();
    doc["data"]["ground_truth"] = cfg.ground_truth_path.string();
    if (cfg.samples_path.empty() && !cfg.synthetic_enabled) {
      field_error("data.samples", "required when synthetic.enabled is false");
    }
  }

  {
    const auto& s = doc["net"];
    cfg.phi_layers = s["phi_layers"];
    cfg.phi_width = s["phi_width"];
    cfg.d_layers = s["d_layers"];
    cfg.d_width = s["d_width"];
    cfg.d_max = s["d_max"];
    const std::string normal = s["normal_eigenvalue"];
    if (cfg.phi_layers < 1) field_error("net.phi_layers", "must be >= 1");
    if (cfg.phi_width < 1) field_error("net.phi_width", "must be >= 1");
    if (cfg.d_layers < 1) field_error("net.d_layers", "must be >= 1");
    if (cfg.d_width < 1) field_error("net.d_width", "must be >= 1");
    if (!(cfg.d_max > 0.0)) field_error("net.d_max", "must be positive");
    if (normal == "zero") {
      cfg.normal_eigenvalue = NormalEigenvalue::Zero;
    } else if (normal == "one") {
      cfg.normal_eigenvalue = NormalEigenvalue::One;
    } else {
      field_error("net.normal_eigenvalue", "expected zero or one");
    }
  }

  {
    const auto& s = doc["loss"];
    auto& w = cfg.loss;
    w.alpha_m = s["alpha_m"];
    w.alpha_theta = s["alpha_theta"];
    w.alpha_d = s["alpha_d"];
    w.epsilon = s["epsilon"];
    w.delta = s["delta"];
    const std::string tv = s["tv_mode"];
    for (const char* k : {"alpha_m", "alpha_theta", "alpha_d"}) {
      if (!(s[k].get<double>() >= 0.0)) field_error(std::string("loss.") + k, "must be nonnegative");
    }
    if (!(w.epsilon > 0.0)) field_error("loss.epsilon", "must be positive");
    if (!(w.delta > 0.0)) field_error("loss.delta", "must be positive");
    if (tv == "world") {
      w.tv_mode = TvMode::World;
    } else if (tv == "tangent") {
      w.tv_mode = TvMode::Tangent;
    } else {
      field_error("loss.tv_mode", "expected world or tangent");
    }
  }

  {
    const auto& s = doc["train"];
    auto& t = cfg.train;
    t.adam_lr = s["adam_lr"];
    t.adam_epochs = s["adam_epochs"];
    t.adam_beta1 = s["adam_beta1"];
    t.adam_beta2 = s["adam_beta2"];
    t.adam_eps = s["adam_eps"];
    t.lbfgs_memory = s["lbfgs_memory"];
    t.lbfgs_gtol = s["lbfgs_gtol"];
    t.lbfgs_max_iter = s["lbfgs_max_iter"];
    t.lbfgs_ftol = s["lbfgs_ftol"];
    t.restarts = s["restarts"];
    t.batch_size = s["batch_size"];
    const auto& r = doc["run"];
    if (!is_nonneg_int(r["seed"])) field_error("run.seed", "must be a nonnegative integer");
    t.seed = r["seed"].get<std::uint64_t>();
    t.jobs = r["jobs"];
    t.log_every = r["log_every"];
    if (t.jobs < 1) field_error("run.jobs", "must be >= 1");
    if (t.log_every < 0) field_error("run.log_every", "must be nonnegative");
    validate_section("train", [&] { t.validate(); });
  }

  {
    const std::string out = doc["run"]["out"];
    if (out.empty()) field_error("run.out", "must not be empty");
    cfg.out = resolve_path(out, base_dir);
    doc["run"]["out"] = cfg.out.string();
    const std::string ckpt = doc["evaluate"]["checkpoint"];
    cfg.checkpoint_path = resolve_path(ckpt, base_dir);
    doc["evaluate"]["checkpoint"] = cfg.checkpoint_path.string();
  }

  cfg.document = std::move(doc);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path, const ConfigOverrides& overrides) {
  json user = json::object();
  std::filesystem::path base = std::filesystem::current_path();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open config '" + path.string() + "'");
    try {
      user = json::parse(in);
    } catch (const json::parse_error& e) {
      fail(ErrorKind::Config, "config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    if (user.is_object() && user.contains("manifest_version")) {
      if (!user.contains("config")) fail(ErrorKind::Config, "manifest '" + path.string() + "' has no config");
      user = user["config"];
    }
    base = std::filesystem::absolute(path).parent_path();
  }

  json doc = default_config_document();
  merge_document(doc, user);
  for (const auto& s : overrides.sets) apply_set(doc, s);
  if (overrides.seed) doc["run"]["seed"] = *overrides.seed;
  if (overrides.jobs) doc["run"]["jobs"] = *overrides.jobs;
  if (overrides.out) {
    // Relative --out is taken relative to the working directory, not the config.
    doc["run"]["out"] = std::filesystem::absolute(*overrides.out).lexically_normal().string();
  }
  return config_from_document(doc, base);
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    fail(ErrorKind::Io, "SHA-256 computation failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

std::string config_hash(const json& doc) { return sha256_hex(doc.dump()); }

}  // namespace fiberpinn
