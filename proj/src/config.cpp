// strict JSON configuration: every key checked, every problem reported,
// nothing adjusted behind the user's back

#include "spde/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "spde/coefficients.hpp"
#include "spde/ergodicity.hpp"
#include "spde/noise.hpp"
#include "spde/util.hpp"
#include "json.hpp"

namespace spde {

using nlohmann::json;

namespace {

// pulls typed values out of one JSON object, remembering which keys were
// consumed so leftovers can be reported as unknown
class Reader {
 public:
  Reader(const json& j, std::string prefix, std::vector<std::string>& issues)
      : j_(j), prefix_(std::move(prefix)), issues_(issues) {}

  void get(const char* key, std::string& out) {
    const json* v = take(key);
    if (!v) return;
    if (!v->is_string())
      issue(key, "expected a string");
    else
      out = v->get<std::string>();
  }

  void get(const char* key, double& out) {
    const json* v = take(key);
    if (!v) return;
    if (!v->is_number())
      issue(key, "expected a number");
    else
      out = v->get<double>();
  }

  void get(const char* key, int& out) {
    const json* v = take(key);
    if (!v) return;
    if (!v->is_number_integer())
      issue(key, "expected an integer");
    else
      out = v->get<int>();
  }

  void get(const char* key, std::uint64_t& out) {
    const json* v = take(key);
    if (!v) return;
    if (!v->is_number_integer() || (v->is_number_integer() && !v->is_number_unsigned() &&
                                    v->get<std::int64_t>() < 0))
      issue(key, "expected a nonnegative integer");
    else
      out = v->get<std::uint64_t>();
  }

  void get(const char* key, std::vector<double>& out) {
    const json* v = take(key);
    if (!v) return;
    if (!v->is_array()) {
      issue(key, "expected an array of numbers");
      return;
    }
    out.clear();
    for (const auto& e : *v) {
      if (!e.is_number()) {
        issue(key, "expected an array of numbers");
        return;
      }
      out.push_back(e.get<double>());
    }
  }

  const json* object(const char* key) {
    const json* v = take(key);
    if (!v) return nullptr;
    if (!v->is_object()) {
      issue(key, "expected an object");
      return nullptr;
    }
    return v;
  }

  // every key not consumed by a get() is a typo or a stale field
  void finish() {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) issue(it.key().c_str(), "unknown key");
  }

 private:
  const json* take(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void issue(const char* key, const char* what) {
    issues_.push_back(prefix_ + key + ": " + what);
  }

  const json& j_;
  std::string prefix_;
  std::vector<std::string>& issues_;
  std::set<std::string> seen_;
};

void read_initial(const json& j, const std::string& prefix, InitialData& out,
                  std::vector<std::string>& issues) {
  Reader r(j, prefix, issues);
  r.get("kind", out.kind);
  r.get("mean", out.mean);
  r.get("amplitude", out.amplitude);
  r.get("wave", out.wave);
  r.get("seed", out.seed);
  r.finish();
}

json initial_json(const InitialData& d) {
  return json{{"kind", d.kind},
              {"mean", d.mean},
              {"amplitude", d.amplitude},
              {"wave", d.wave},
              {"seed", d.seed}};
}

bool aligned(double t, double dt) {
  if (!(dt > 0.0)) return false;
  double raw = t / dt;
  double rounded = std::llround(raw);
  return std::abs(raw - rounded) <= 1e-9 * std::max(1.0, std::abs(raw));
}

template <class Fn>
double sup_on(const Fn& f, double lo, double hi, int samples) {
  double worst = 0.0;
  for (int i = 0; i <= samples; ++i) {
    double x = lo + (hi - lo) * i / samples;
    worst = std::max(worst, std::abs(f(x)));
  }
  return worst;
}

bool one_of(const std::string& v, std::initializer_list<const char*> set) {
  for (const char* s : set)
    if (v == s) return true;
  return false;
}

// second validation stage: stability bounds the solver would enforce at
// runtime, probed a priori over the range the initial data can reach.
// only runs once the structural fields are known to be sane.
void check_stability(const ExperimentConfig& cfg, std::vector<std::string>& bad) {
  double reach = 1.0;
  for (const InitialData* d : {&cfg.init, &cfg.init_b})
    reach = std::max(reach, d->mean + std::abs(d->amplitude) * std::max(1.0, d->mean));
  double range = 2.0 * reach;

  NoiseBasis basis;
  CoefficientSet cs;
  try {
    basis = build_basis(cfg.dim, cfg.cutoff, cfg.rule, cfg.amplitude, cfg.gamma);
    PresetParams pp;
    pp.epsilon = cfg.epsilon;
    pp.F1 = eval_constants(basis).F1;
    pp.delta_reg = cfg.delta_reg;
    pp.sigma_cap = cfg.sigma_cap;
    pp.kappa = cfg.kappa;
    pp.sigma_linear = cfg.sigma_linear;
    pp.nu_quadratic = cfg.nu_quadratic;
    pp.b_drift = cfg.b_drift;
    cs = preset(cfg.preset, pp);
  } catch (const error& e) {
    bad.push_back(std::string("preset: rejected by the coefficient builder (") + e.what() + ")");
    return;
  }

  double h = 1.0 / cfg.n;
  if (cs.f_lip * cfg.dt > 1.0)
    bad.push_back("dt: dt * Lip(f) = " + std::to_string(cs.f_lip * cfg.dt) +
                  " > 1 breaks reaction positivity; reduce dt or kappa");
  if (!cs.phi_id_plus_lip) {
    // explicit stepping is the only option, so the parabolic bound applies
    double sup_dphi = sup_on(cs.dphi, 0.0, range, 256);
    if (cfg.dt * 2.0 * cfg.dim * sup_dphi > h * h)
      bad.push_back("dt: explicit diffusion needs dt * " + std::to_string(2 * cfg.dim) +
                    " * sup Phi' <= h^2 = " + std::to_string(h * h) + ", got " +
                    std::to_string(cfg.dt * 2.0 * cfg.dim * sup_dphi));
  }
  if (cs.nu) {
    double sup_dnu = sup_on(cs.dnu, 0.0, range, 256);
    if (cfg.dt * cfg.dim * sup_dnu > h)
      bad.push_back("dt: advection needs dt * dim * sup|nu'| <= h = " + std::to_string(h) +
                    ", got " + std::to_string(cfg.dt * cfg.dim * sup_dnu) +
                    " over densities up to " + std::to_string(range));
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(std::string("config: not valid JSON (") + e.what() + ")");
  }
  if (!j.is_object()) fail("config: top level must be a JSON object");

  ExperimentConfig cfg;
  std::vector<std::string> issues;
  Reader r(j, "", issues);
  r.get("command", cfg.command);
  r.get("preset", cfg.preset);
  r.get("epsilon", cfg.epsilon);
  r.get("delta_reg", cfg.delta_reg);
  r.get("sigma_cap", cfg.sigma_cap);
  r.get("kappa", cfg.kappa);
  r.get("sigma_linear", cfg.sigma_linear);
  r.get("nu_quadratic", cfg.nu_quadratic);
  r.get("b_drift", cfg.b_drift);
  r.get("dim", cfg.dim);
  r.get("n", cfg.n);
  r.get("dt", cfg.dt);
  r.get("T", cfg.T);
  r.get("cutoff", cfg.cutoff);
  r.get("rule", cfg.rule);
  r.get("amplitude", cfg.amplitude);
  r.get("gamma", cfg.gamma);
  if (const json* o = r.object("init")) read_initial(*o, "init.", cfg.init, issues);
  if (const json* o = r.object("init_b")) read_initial(*o, "init_b.", cfg.init_b, issues);
  r.get("seed", cfg.seed);
  r.get("n_paths", cfg.n_paths);
  r.get("workers", cfg.workers);
  r.get("out", cfg.out);
  r.get("shift", cfg.shift);
  r.get("restart", cfg.restart);
  r.get("horizons", cfg.horizons);
  r.get("delta", cfg.delta);
  r.get("feature", cfg.feature);
  if (const json* o = r.object("tol")) {
    Reader rt(*o, "tol.", issues);
    rt.get("mass", cfg.tol.mass);
    rt.get("contraction", cfg.tol.contraction);
    rt.get("residual", cfg.tol.residual);
    rt.finish();
  }
  r.finish();

  if (!issues.empty()) {
    std::string msg = "config: " + std::to_string(issues.size()) + " bad field(s)";
    for (const std::string& s : issues) msg += "\n  " + s;
    fail(msg);
  }
  return cfg;
}

std::string serialize_config(const ExperimentConfig& cfg) {
  json j{{"command", cfg.command},
         {"preset", cfg.preset},
         {"epsilon", cfg.epsilon},
         {"delta_reg", cfg.delta_reg},
         {"sigma_cap", cfg.sigma_cap},
         {"kappa", cfg.kappa},
         {"sigma_linear", cfg.sigma_linear},
         {"nu_quadratic", cfg.nu_quadratic},
         {"b_drift", cfg.b_drift},
         {"dim", cfg.dim},
         {"n", cfg.n},
         {"dt", cfg.dt},
         {"T", cfg.T},
         {"cutoff", cfg.cutoff},
         {"rule", cfg.rule},
         {"amplitude", cfg.amplitude},
         {"gamma", cfg.gamma},
         {"init", initial_json(cfg.init)},
         {"init_b", initial_json(cfg.init_b)},
         {"seed", cfg.seed},
         {"n_paths", cfg.n_paths},
         {"workers", cfg.workers},
         {"out", cfg.out},
         {"shift", cfg.shift},
         {"restart", cfg.restart},
         {"horizons", cfg.horizons},
         {"delta", cfg.delta},
         {"feature", cfg.feature},
         {"tol", json{{"mass", cfg.tol.mass},
                      {"contraction", cfg.tol.contraction},
                      {"residual", cfg.tol.residual}}}};
  return j.dump(2) + "\n";
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("config: cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void save_config(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("config: cannot write '" + path + "'");
  out << serialize_config(cfg);
  if (!out) fail("config: short write to '" + path + "'");
}

std::vector<std::string> validate(const ExperimentConfig& cfg) {
  std::vector<std::string> bad;
  auto flag = [&](const char* field, const std::string& msg) {
    bad.push_back(std::string(field) + ": " + msg);
  };

  if (!one_of(cfg.command,
              {"simulate", "couple", "flowcheck", "ergodicity", "check-assumptions", "selftest"}))
    flag("command", "unknown command '" + cfg.command + "'");
  if (!one_of(cfg.preset, {"heat", "dean_kawasaki", "sine_gordon"}))
    flag("preset", "unknown preset '" + cfg.preset + "'");
  if (cfg.dim != 1 && cfg.dim != 2) flag("dim", "must be 1 or 2");
  if (cfg.n < 4) flag("n", "need at least 4 cells per direction");
  if (!(cfg.dt > 0.0)) flag("dt", "must be positive");
  if (!(cfg.T > 0.0))
    flag("T", "must be positive");
  else if (cfg.dt > 0.0 && !aligned(cfg.T, cfg.dt))
    flag("T", "not an integer multiple of dt; the run must end on the step grid");
  else if (cfg.dt > cfg.T)
    flag("dt", "exceeds the horizon T");

  if (cfg.cutoff < 0) flag("cutoff", "must be nonnegative");
  if (cfg.n >= 4 && 2 * cfg.cutoff >= cfg.n)
    flag("cutoff", "wavenumbers at or above the grid Nyquist limit n/2 alias on the face grid");
  if (!one_of(cfg.rule, {"flat", "power_law"}))
    flag("rule", "unknown spectrum rule '" + cfg.rule + "'");
  if (!(cfg.amplitude >= 0.0)) flag("amplitude", "must be nonnegative");
  if (cfg.rule == "power_law" && !(cfg.gamma >= 0.0))
    flag("gamma", "power_law decay exponent must be nonnegative");

  if (!(cfg.epsilon >= 0.0)) flag("epsilon", "must be nonnegative");
  if (!(cfg.delta_reg > 0.0)) flag("delta_reg", "must be positive");
  if (!(cfg.sigma_cap > 0.0)) flag("sigma_cap", "must be positive");
  if (!(cfg.kappa >= 0.0)) flag("kappa", "must be nonnegative");
  if (!(cfg.sigma_linear >= 0.0)) flag("sigma_linear", "must be nonnegative");

  const char* names[2] = {"init", "init_b"};
  const InitialData* data[2] = {&cfg.init, &cfg.init_b};
  for (int k = 0; k < 2; ++k) {
    const InitialData& d = *data[k];
    std::string p = names[k];
    if (!one_of(d.kind, {"constant", "cosine", "cosine2", "bump", "random_smooth"}))
      bad.push_back(p + ".kind: unknown initial data kind '" + d.kind + "'");
    if (!(d.mean > 0.0)) bad.push_back(p + ".mean: must be positive");
    if (d.kind == "cosine" && std::abs(d.amplitude) > d.mean)
      bad.push_back(p + ".amplitude: exceeds the mean, the data would be negative");
    if (d.kind == "cosine2" && std::abs(d.amplitude) > 0.9 * d.mean)
      bad.push_back(p + ".amplitude: above 0.9 * mean the two-mode profile goes negative");
    if (d.kind == "random_smooth" && std::abs(d.amplitude) >= 1.0)
      bad.push_back(p + ".amplitude: random_smooth needs |amplitude| < 1");
    if (d.wave < 1 && d.kind != "constant" && d.kind != "bump")
      bad.push_back(p + ".wave: need a positive wavenumber");
  }

  if (cfg.n_paths < 1) flag("n_paths", "need at least one path");
  if (cfg.workers < 1) flag("workers", "need at least one worker");
  if (cfg.out.empty()) flag("out", "output directory must be named");

  if (!(cfg.tol.mass > 0.0)) flag("tol.mass", "must be positive");
  if (!(cfg.tol.contraction > 0.0)) flag("tol.contraction", "must be positive");
  if (!(cfg.tol.residual > 0.0)) flag("tol.residual", "must be positive");

  if (cfg.command == "flowcheck" && cfg.dt > 0.0) {
    if (!(cfg.shift >= 0.0))
      flag("shift", "must be nonnegative");
    else if (!aligned(cfg.shift, cfg.dt))
      flag("shift", "shift/dt = " + std::to_string(cfg.shift / cfg.dt) +
                        " is not an integer; the noise shift is only defined on the "
                        "increment grid, so shifts must be whole multiples of dt");
    if (!(cfg.restart > 0.0) || !(cfg.restart < cfg.T))
      flag("restart", "must lie strictly inside (0, T) so both legs of the restart advance");
    else if (!aligned(cfg.restart, cfg.dt))
      flag("restart", "restart time must be a whole multiple of dt");
  }

  if (cfg.command == "ergodicity") {
    if (cfg.horizons.empty()) flag("horizons", "need at least one horizon");
    for (std::size_t i = 0; i < cfg.horizons.size(); ++i) {
      std::string key = "horizons[" + std::to_string(i) + "]";
      if (!(cfg.horizons[i] > 0.0))
        bad.push_back(key + ": must be positive");
      else if (cfg.dt > 0.0 && !aligned(cfg.horizons[i], cfg.dt))
        bad.push_back(key + ": not an integer multiple of dt");
      if (i > 0 && !(cfg.horizons[i] > cfg.horizons[i - 1]))
        bad.push_back(key + ": horizons must be strictly increasing");
    }
    if (!(cfg.delta > 0.0)) flag("delta", "exceedance threshold must be positive");
    bool known = false;
    for (const std::string& f : feature_names()) known = known || f == cfg.feature;
    if (!known) flag("feature", "unknown feature map '" + cfg.feature + "'");
  }

  // stability bounds need a constructible coefficient set; skip them when
  // the structural fields above are already broken
  if (bad.empty() && cfg.command != "selftest") check_stability(cfg, bad);
  return bad;
}

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t h) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string config_hash(const ExperimentConfig& cfg) {
  // hash the experiment, not its surroundings: where artifacts land and how
  // many threads ran change nothing the run produces, so they are pinned to
  // neutral values before hashing
  ExperimentConfig id = cfg;
  id.out = ".";
  id.workers = 1;
  json j = json::parse(serialize_config(id));
  std::string canon = j.dump();  // compact, keys sorted
  std::uint64_t h = fnv1a64(canon.data(), canon.size());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace spde
