#include "cli.hpp"

#include "koopman/dynamics.hpp"
#include "koopman/edmd.hpp"
#include "koopman/io.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>

namespace koopman::cli
{

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------------------
// Configuration

std::vector<Criterion> RunConfig::criteria() const
{
  if (criterion == "both")
    return {Criterion::l2, Criterion::h2};
  if (criterion == "l2")
    return {Criterion::l2};
  if (criterion == "h2")
    return {Criterion::h2};
  throw ConfigError("criterion must be l2, h2 or both, got '" + criterion + "'");
}

const SignalSpec& RunConfig::signal(const std::string& name) const
{
  for (const auto& s : signals)
    if (s.name == name)
      return s;
  throw ConfigError("config has no signal named '" + name + "'");
}

SolverOptions RunConfig::solver_options() const
{
  SolverOptions o;
  o.feas_tol = feas_tol;
  o.obj_tol = obj_tol;
  o.max_iter = max_iter;
  return o;
}

json default_config_json()
{
  return json::parse(R"({
  "system": {"kind": "builtin-example", "a1": 0.7, "a2": 0.7, "a3": 0.5},
  "lifting": {"quad_nodes": 8, "invariance_tol": 1e-8, "force": false},
  "grid": {
    "x": [{"min": -2.5, "max": 2.5, "step": 0.05}, {"min": -10.0, "max": 2.7, "step": 0.25}],
    "u": [{"min": -1.6, "max": 2.1, "step": 0.2}],
    "reduce": true
  },
  "subsample": {"n": 7000, "seed": 1},
  "criterion": "both",
  "solver": {"feas_tol": 1e-8, "obj_tol": 1e-5, "max_iter": 200, "margin": null},
  "x0": [1.0, 1.0],
  "signals": [
    {"name": "excitation", "kind": "white", "variance": 0.5, "length": 600, "seed": 1},
    {"name": "constant", "kind": "constant", "value": 1.0, "length": 100},
    {"name": "sine", "kind": "sine", "amplitude": 0.5, "frequency": 1.0, "sample_time": 0.01,
     "length": 300}
  ],
  "reference_bhat_edmd": [1.0, 0.4902, 0.3093],
  "edmd_bhat": "reference",
  "output_dir": "out"
})");
}

namespace
{

void only_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where)
{
  if (!j.is_object())
    throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : j.items())
  {
    bool ok = false;
    for (const char* a : allowed)
      ok = ok || key == a;
    if (!ok)
      throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback)
{
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

AxisSpec axis_from_json(const json& j, const std::string& where)
{
  only_keys(j, {"min", "max", "step"}, where);
  AxisSpec a{j.at("min").get<double>(), j.at("max").get<double>(), j.at("step").get<double>()};
  try
  {
    (void)a.count();
  }
  catch (const Error& e)
  {
    throw ConfigError(where + ": " + e.what());
  }
  return a;
}

json axis_to_json(const AxisSpec& a)
{
  return {{"min", a.min}, {"max", a.max}, {"step", a.step}};
}

SignalSpec signal_from_json(const json& j, std::size_t index)
{
  const std::string where = "signals[" + std::to_string(index) + "]";
  only_keys(j,
            {"name", "kind", "variance", "std", "value", "amplitude", "frequency", "sample_time",
             "length", "seed"},
            where);
  SignalSpec s;
  s.name = j.at("name").get<std::string>();
  s.kind = j.at("kind").get<std::string>();
  s.length = j.at("length").get<std::size_t>();
  s.seed = get_or<std::uint64_t>(j, "seed", 1);
  if (s.kind == "white")
  {
    if (j.contains("variance") == j.contains("std"))
      throw ConfigError(where + ": a white signal needs exactly one of 'variance' and 'std'");
    s.level = j.contains("variance") ? j.at("variance").get<double>()
                                     : std::pow(j.at("std").get<double>(), 2);
    if (!(s.level > 0.0))
      throw ConfigError(where + ": noise level must be positive");
  }
  else if (s.kind == "constant")
    s.level = j.at("value").get<double>();
  else if (s.kind == "sine")
  {
    s.level = j.at("amplitude").get<double>();
    s.frequency = get_or(j, "frequency", 1.0);
    s.sample_time = get_or(j, "sample_time", 0.01);
    if (!(s.sample_time > 0.0))
      throw ConfigError(where + ": sample_time must be positive");
  }
  else
    throw ConfigError(where + ": unknown signal kind '" + s.kind + "'");
  if (s.length == 0)
    throw ConfigError(where + ": length must be positive");
  return s;
}

json signal_to_json(const SignalSpec& s)
{
  json j{{"name", s.name}, {"kind", s.kind}, {"length", s.length}};
  if (s.kind == "white")
  {
    j["variance"] = s.level;
    j["seed"] = s.seed;
  }
  else if (s.kind == "constant")
    j["value"] = s.level;
  else
  {
    j["amplitude"] = s.level;
    j["frequency"] = s.frequency;
    j["sample_time"] = s.sample_time;
  }
  return j;
}

Vector vector_from_json(const json& j, const std::string& where)
{
  if (!j.is_array() || j.empty())
    throw ConfigError(where + " must be a non-empty array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

RunConfig parse_config(const json& j)
{
  only_keys(j,
            {"system", "lifting", "grid", "subsample", "criterion", "solver", "x0", "signals",
             "reference_bhat_edmd", "edmd_bhat", "output_dir"},
            "config");
  RunConfig c;
  if (j.contains("system"))
  {
    const auto& s = j.at("system");
    only_keys(s, {"kind", "a1", "a2", "a3"}, "system");
    const auto kind = get_or<std::string>(s, "kind", "builtin-example");
    if (kind != "builtin-example")
      throw ConfigError("system.kind '" + kind + "' is not supported");
    c.a1 = get_or(s, "a1", c.a1);
    c.a2 = get_or(s, "a2", c.a2);
    c.a3 = get_or(s, "a3", c.a3);
  }
  if (j.contains("lifting"))
  {
    const auto& l = j.at("lifting");
    only_keys(l, {"quad_nodes", "invariance_tol", "force"}, "lifting");
    c.quad_nodes = get_or(l, "quad_nodes", c.quad_nodes);
    c.invariance_tol = get_or(l, "invariance_tol", c.invariance_tol);
    c.force = get_or(l, "force", c.force);
    if (c.quad_nodes < 1)
      throw ConfigError("lifting.quad_nodes must be at least 1");
    if (!(c.invariance_tol > 0.0))
      throw ConfigError("lifting.invariance_tol must be positive");
  }

  const auto& g = j.at("grid");
  only_keys(g, {"x", "u", "reduce"}, "grid");
  for (std::size_t i = 0; i < g.at("x").size(); ++i)
    c.grid.x_axes.push_back(axis_from_json(g.at("x")[i], "grid.x[" + std::to_string(i) + "]"));
  for (std::size_t i = 0; i < g.at("u").size(); ++i)
    c.grid.u_axes.push_back(axis_from_json(g.at("u")[i], "grid.u[" + std::to_string(i) + "]"));
  if (c.grid.x_axes.size() != 2 || c.grid.u_axes.size() != 1)
    throw ConfigError("grid needs two state axes and one input axis for the example system");
  c.reduce = get_or(g, "reduce", true);

  if (j.contains("subsample") && !j.at("subsample").is_null())
  {
    const auto& s = j.at("subsample");
    only_keys(s, {"n", "seed"}, "subsample");
    c.subsample_n = s.at("n").get<std::size_t>();
    c.subsample_seed = get_or<std::uint64_t>(s, "seed", 1);
    if (*c.subsample_n == 0)
      throw ConfigError("subsample.n must be positive");
  }
  else
    c.subsample_n.reset();

  c.criterion = get_or<std::string>(j, "criterion", "both");
  (void)c.criteria();

  if (j.contains("solver"))
  {
    const auto& s = j.at("solver");
    only_keys(s, {"feas_tol", "obj_tol", "max_iter", "margin"}, "solver");
    c.feas_tol = get_or(s, "feas_tol", c.feas_tol);
    c.obj_tol = get_or(s, "obj_tol", c.obj_tol);
    c.max_iter = get_or(s, "max_iter", c.max_iter);
    if (s.contains("margin") && !s.at("margin").is_null())
      c.margin = s.at("margin").get<double>();
    if (!(c.feas_tol > 0.0) || !(c.obj_tol > 0.0) || c.max_iter < 1)
      throw ConfigError("solver tolerances and max_iter must be positive");
    if (c.margin && !(*c.margin >= 0.0))
      throw ConfigError("solver.margin must be non-negative");
  }

  c.x0 = vector_from_json(j.at("x0"), "x0");
  if (c.x0.size() != 2)
    throw ConfigError("x0 must have two entries");
  const auto& sig = j.at("signals");
  if (!sig.is_array())
    throw ConfigError("signals must be an array");
  for (std::size_t i = 0; i < sig.size(); ++i)
    c.signals.push_back(signal_from_json(sig[i], i));
  c.reference_bhat_edmd = vector_from_json(j.at("reference_bhat_edmd"), "reference_bhat_edmd");
  if (c.reference_bhat_edmd.size() != 3)
    throw ConfigError("reference_bhat_edmd must have three entries");
  c.edmd_bhat = get_or<std::string>(j, "edmd_bhat", "reference");
  if (c.edmd_bhat != "reference" && c.edmd_bhat != "estimated")
    throw ConfigError("edmd_bhat must be 'reference' or 'estimated'");
  c.output_dir = get_or<std::string>(j, "output_dir", "out");
  return c;
}

} // namespace

RunConfig config_from_json(const json& j)
{
  try
  {
    return parse_config(j);
  }
  catch (const json::exception& e)
  {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

json config_to_json(const RunConfig& c)
{
  json x = json::array(), u = json::array(), sig = json::array();
  for (const auto& a : c.grid.x_axes)
    x.push_back(axis_to_json(a));
  for (const auto& a : c.grid.u_axes)
    u.push_back(axis_to_json(a));
  for (const auto& s : c.signals)
    sig.push_back(signal_to_json(s));
  json j{{"system", {{"kind", "builtin-example"}, {"a1", c.a1}, {"a2", c.a2}, {"a3", c.a3}}},
         {"lifting",
          {{"quad_nodes", c.quad_nodes}, {"invariance_tol", c.invariance_tol}, {"force", c.force}}},
         {"grid", {{"x", x}, {"u", u}, {"reduce", c.reduce}}},
         {"criterion", c.criterion},
         {"solver",
          {{"feas_tol", c.feas_tol},
           {"obj_tol", c.obj_tol},
           {"max_iter", c.max_iter},
           {"margin", c.margin ? json(*c.margin) : json(nullptr)}}},
         {"x0", io::vector_to_json(c.x0)},
         {"signals", sig},
         {"reference_bhat_edmd", io::vector_to_json(c.reference_bhat_edmd)},
         {"edmd_bhat", c.edmd_bhat},
         {"output_dir", c.output_dir}};
  j["subsample"] = c.subsample_n ? json{{"n", *c.subsample_n}, {"seed", c.subsample_seed}}
                                 : json(nullptr);
  return j;
}

void apply_override(json& j, const std::string& assignment)
{
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);

  json* node = &j;
  std::stringstream path(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(path, part, '.'))
    parts.push_back(part);
  for (std::size_t i = 0; i < parts.size(); ++i)
  {
    const auto& p = parts[i];
    if (node->is_array())
    {
      std::size_t idx = 0;
      try
      {
        idx = std::stoul(p);
      }
      catch (const std::exception&)
      {
        throw ConfigError("--set " + key + ": '" + p + "' is not an array index");
      }
      if (idx >= node->size())
        throw ConfigError("--set " + key + ": index " + p + " out of range");
      node = &(*node)[idx];
    }
    else if (node->is_object() || node->is_null())
      node = &(*node)[p];
    else
      throw ConfigError("--set " + key + ": '" + p + "' is below a scalar");
  }
  json value = json::parse(text, nullptr, false);
  *node = value.is_discarded() ? json(text) : value;
}

SignalSpec parse_signal(const std::string& text, std::size_t length, std::uint64_t seed,
                        double sample_time)
{
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ':'))
    parts.push_back(part);
  if (parts.size() < 2 || parts.size() > 3)
    throw ConfigError("--signal expects kind:level[:frequency], got '" + text + "'");
  SignalSpec s;
  s.name = parts[0];
  s.kind = parts[0];
  s.length = length;
  s.seed = seed;
  s.sample_time = sample_time;
  try
  {
    s.level = std::stod(parts[1]);
    if (parts.size() == 3)
      s.frequency = std::stod(parts[2]);
  }
  catch (const std::exception&)
  {
    throw ConfigError("--signal: cannot parse a number in '" + text + "'");
  }
  if (s.kind != "white" && s.kind != "constant" && s.kind != "sine")
    throw ConfigError("--signal: unknown kind '" + s.kind + "'");
  if (parts.size() == 3 && s.kind != "sine")
    throw ConfigError("--signal: only sine takes a frequency");
  if (s.kind == "white" && !(s.level > 0.0))
    throw ConfigError("--signal: white noise variance must be positive");
  if (length == 0)
    throw ConfigError("--steps must be positive");
  return s;
}

std::vector<Vector> make_signal(const SignalSpec& s)
{
  if (s.kind == "white")
    return white_noise_input(s.length, s.level, s.seed);
  if (s.kind == "constant")
    return constant_input(s.length, s.level);
  if (s.kind == "sine")
    return sine_input(s.length, s.level, s.frequency, s.sample_time);
  throw ConfigError("unknown signal kind '" + s.kind + "'");
}

// ---------------------------------------------------------------------------------------
// Pipeline

Pipeline build_pipeline(const RunConfig& c)
{
  LpvOptions lo;
  lo.quad_nodes = c.quad_nodes;
  lo.invariance_tol = c.invariance_tol;
  lo.force = c.force;
  auto model = lpv_model(example_dictionary(), builtin_example(c.a1, c.a2, c.a3), lo);

  SchedulingGrid full;
  try
  {
    full = make_grid(model, c.grid);
  }
  catch (const DimensionError& e)
  {
    throw ConfigError(std::string("grid: ") + e.what());
  }
  ReductionReport rep;
  rep.before = rep.after = full.size();
  SchedulingGrid lmi = c.reduce ? reduce_constraints(full, &rep) : full;
  if (!rep.warning.empty())
    std::fprintf(stderr, "koopman: warning: %s\n", rep.warning.c_str());
  if (c.subsample_n && lmi.size() > *c.subsample_n)
    lmi = subsample(lmi, *c.subsample_n, c.subsample_seed);

  const double margin = c.margin.value_or(default_margin(model.A()));
  return Pipeline{std::move(model), std::move(full), std::move(lmi), rep, margin,
                  c.solver_options()};
}

std::vector<std::pair<std::string, Matrix>> read_bhat(const json& j, const std::string& fallback_name)
{
  auto single = [](const json& v) -> std::optional<Matrix> {
    if (v.is_array())
    {
      if (!v.empty() && v[0].is_array())
        return io::matrix_from_json(v);
      Matrix m(static_cast<Eigen::Index>(v.size()), 1);
      for (std::size_t i = 0; i < v.size(); ++i)
        m(static_cast<Eigen::Index>(i), 0) = v[i].get<double>();
      return m;
    }
    if (v.is_object() && v.contains("B_hat"))
      return io::matrix_from_json(v.at("B_hat"));
    return std::nullopt;
  };
  try
  {
    if (auto m = single(j))
      return {{fallback_name, *m}};
    if (!j.is_object() || j.empty())
      throw ConfigError("B_hat json must be an array, an object with 'B_hat' or named entries");
    std::vector<std::pair<std::string, Matrix>> out;
    for (const auto& [name, v] : j.items())
    {
      auto m = single(v);
      if (!m)
        throw ConfigError("B_hat entry '" + name + "' is neither an array nor has 'B_hat'");
      out.emplace_back(name, *m);
    }
    return out;
  }
  catch (const json::exception& e)
  {
    throw ConfigError(std::string("B_hat json: ") + e.what());
  }
}

// ---------------------------------------------------------------------------------------
// Output helpers

namespace
{

fs::path prepare_output(const RunConfig& c)
{
  std::error_code ec;
  fs::create_directories(c.output_dir, ec);
  if (ec)
    throw IoError("cannot create output directory '" + c.output_dir + "': " + ec.message());
  return fs::path(c.output_dir);
}

std::ofstream open_out(const fs::path& p)
{
  std::ofstream os(p);
  if (!os)
    throw IoError("cannot write '" + p.string() + "'");
  return os;
}

void write_json(const fs::path& p, const json& j)
{
  auto os = open_out(p);
  os << j.dump(2) << '\n';
  if (!os)
    throw IoError("write failed for '" + p.string() + "'");
}

json read_json(const fs::path& p)
{
  std::ifstream is(p);
  if (!is)
    throw IoError("cannot read '" + p.string() + "'");
  json j = json::parse(is, nullptr, false);
  if (j.is_discarded())
    throw ConfigError("'" + p.string() + "' is not valid JSON");
  return j;
}

// Wide CSV: k followed by named columns; a missing (NaN) cell is left empty.
class CsvTable
{
public:
  void add(std::string name, std::vector<double> values)
  {
    names_.push_back(std::move(name));
    cols_.push_back(std::move(values));
  }

  void write(const fs::path& p) const
  {
    auto os = open_out(p);
    os << 'k';
    for (const auto& n : names_)
      os << ',' << n;
    os << '\n' << std::setprecision(12);
    std::size_t rows = 0;
    for (const auto& c : cols_)
      rows = std::max(rows, c.size());
    for (std::size_t k = 0; k < rows; ++k)
    {
      os << k;
      for (const auto& c : cols_)
      {
        os << ',';
        if (k < c.size() && !std::isnan(c[k]))
          os << c[k];
      }
      os << '\n';
    }
  }

private:
  std::vector<std::string> names_;
  std::vector<std::vector<double>> cols_;
};

std::vector<double> component(const std::vector<Vector>& seq, Eigen::Index i)
{
  std::vector<double> v(seq.size());
  for (std::size_t k = 0; k < seq.size(); ++k)
    v[k] = seq[k][i];
  return v;
}

std::vector<Vector> outputs(const Matrix& C, const std::vector<Vector>& zs)
{
  std::vector<Vector> xs;
  xs.reserve(zs.size());
  for (const auto& z : zs)
    xs.push_back(C * z);
  return xs;
}

json flat(const Matrix& B)
{
  json a = json::array();
  for (Eigen::Index i = 0; i < B.size(); ++i)
    a.push_back(B.data()[i]);
  return a;
}

SynthesisResult synthesize_for(const Pipeline& pl, Criterion crit)
{
  const auto p = assemble(crit, pl.model.A(), pl.model.C(), pl.lmi_grid, pl.margin);
  return synthesize(p, crit, pl.solver);
}

json grid_info(const Pipeline& pl)
{
  return {{"points", pl.full_grid.size()},
          {"lmi_points", pl.lmi_grid.size()},
          {"affine_dimension", pl.reduction.affine_dimension},
          {"margin", pl.margin}};
}

// nonlinear states plus the recovered state of each approximate model under u
void comparison_csv(const fs::path& path, const Pipeline& pl, const Vector& x0,
                    const std::vector<Vector>& u,
                    const std::vector<std::pair<std::string, Matrix>>& models)
{
  const auto traj = simulate(pl.model.sys(), x0, u);
  CsvTable t;
  auto uu = component(u, 0);
  t.add("u", uu);
  t.add("x1", component(traj.states, 0));
  t.add("x2", component(traj.states, 1));
  const Vector z0 = lift(pl.model.dict(), x0);
  for (const auto& [name, B] : models)
  {
    const LtiKoopmanModel lti(pl.model.A(), B, pl.model.C());
    const auto xs = outputs(pl.model.C(), simulate_lti(lti, z0, u));
    t.add("x1_" + name, component(xs, 0));
    t.add("x2_" + name, component(xs, 1));
  }
  t.write(path);
}

} // namespace

// ---------------------------------------------------------------------------------------
// Subcommands

int cmd_synth(const RunConfig& c)
{
  const auto dir = prepare_output(c);
  const auto pl = build_pipeline(c);
  json out;
  for (auto crit : c.criteria())
  {
    const auto r = synthesize_for(pl, crit);
    json j = io::to_json(r);
    j["grid"] = grid_info(pl);
    out[to_string(crit)] = j;
    std::printf("%s: gamma = %.6f, B_hat = [", to_string(crit), r.gamma);
    for (Eigen::Index i = 0; i < r.B_hat.size(); ++i)
      std::printf("%s%.5f", i ? ", " : "", r.B_hat.data()[i]);
    std::printf("]\n");
  }
  write_json(dir / "synthesis.json", out);
  return exit_ok;
}

int cmd_analyze(const RunConfig& c, const fs::path& bhat_file)
{
  const auto bhats = read_bhat(read_json(bhat_file), "B_hat");
  const auto dir = prepare_output(c);
  const auto pl = build_pipeline(c);
  json out;
  for (const auto& [name, B] : bhats)
    for (auto crit : c.criteria())
    {
      const auto r = analyze(pl.model.A(), pl.model.C(), B, pl.lmi_grid, crit, pl.margin, pl.solver);
      out[name][to_string(crit)] = io::to_json(r);
      std::printf("%s under %s: gamma = %.6f\n", name.c_str(), to_string(crit), r.gamma);
    }
  write_json(dir / "analysis.json", out);
  return exit_ok;
}

int cmd_bound(const RunConfig& c, const fs::path& bhat_file)
{
  const auto bhats = read_bhat(read_json(bhat_file), "B_hat");
  const auto dir = prepare_output(c);
  const auto pl = build_pipeline(c);
  const auto u = make_signal(c.signal("excitation"));
  const double u_inf = input_inf_norm(u);
  const Vector z0 = lift(pl.model.dict(), c.x0);

  json out{{"sigma_bar", max_singular_value(pl.model.A())},
           {"rho", spectral_radius(pl.model.A())},
           {"u_inf", u_inf}};
  for (const auto& [name, B] : bhats)
  {
    const auto b = error_bound(pl.model, pl.full_grid, B, u_inf);
    out["bounds"][name] = io::to_json(b);
    const LtiKoopmanModel lti(pl.model.A(), B, pl.model.C());
    const auto trace = error_trajectory(pl.model, lti, z0, u);
    auto os = open_out(dir / ("err_" + name + ".csv"));
    write_error_csv(os, trace, b.gamma_amp);
  }
  write_json(dir / "bound.json", out);
  return exit_ok;
}

int cmd_simulate(const RunConfig& c, const SignalSpec& signal)
{
  const auto dir = prepare_output(c);
  const auto sys = builtin_example(c.a1, c.a2, c.a3);
  const auto traj = simulate(sys, c.x0, make_signal(signal));
  auto os = open_out(dir / "sim.csv");
  write_trajectory_csv(os, traj);
  return exit_ok;
}

int cmd_edmd(const RunConfig& c, const std::optional<fs::path>& trajectory_csv,
             const std::string& mode)
{
  const auto sys = builtin_example(c.a1, c.a2, c.a3);
  Trajectory traj;
  if (trajectory_csv)
  {
    std::ifstream is(*trajectory_csv);
    if (!is)
      throw IoError("cannot read '" + trajectory_csv->string() + "'");
    traj = read_trajectory_csv(is, sys.n_x(), sys.n_u());
  }
  else
    traj = simulate(sys, c.x0, make_signal(c.signal("excitation")));

  const auto dict = example_dictionary();
  const auto data = build_data_matrices(traj, dict);
  EdmdResult r;
  if (mode == "known-a")
  {
    LpvOptions lo;
    lo.invariance_tol = c.invariance_tol;
    lo.force = c.force;
    r = edmd_input_known_A(data, lpv_model(dict, sys, lo).A());
  }
  else if (mode == "joint")
    r = edmd_with_input(data);
  else if (mode == "autonomous")
    r = edmd_autonomous(data);
  else
    throw ConfigError("--mode must be known-a, joint or autonomous");

  const auto dir = prepare_output(c);
  json j = io::to_json(r);
  j["mode"] = mode;
  j["samples"] = data.samples();
  write_json(dir / "edmd.json", j);
  if (r.rank_deficient)
    std::fprintf(stderr, "koopman: warning: regressor rank %d below %d\n", r.regressor_rank,
                 r.expected_rank);
  return exit_ok;
}

int cmd_reproduce_paper(const RunConfig& c)
{
  const auto dir = prepare_output(c);
  const auto pl = build_pipeline(c);
  const Matrix& A = pl.model.A();
  const Matrix& Cm = pl.model.C();
  const Vector z0 = lift(pl.model.dict(), c.x0);

  // lifted model against the nonlinear system under the excitation signal
  const auto u = make_signal(c.signal("excitation"));
  const auto traj = simulate(pl.model.sys(), c.x0, u);
  const auto x_lpv = outputs(Cm, simulate_lifted(pl.model, z0, u));
  double lift_err = 0.0;
  for (std::size_t k = 0; k < traj.states.size(); ++k)
    lift_err = std::max(lift_err, (x_lpv[k] - traj.states[k]).norm());
  {
    CsvTable t;
    t.add("u", component(u, 0));
    t.add("x1", component(traj.states, 0));
    t.add("x2", component(traj.states, 1));
    t.add("x1_lpv", component(x_lpv, 0));
    t.add("x2_lpv", component(x_lpv, 1));
    t.write(dir / "fig2_sim.csv");
  }

  // input matrices
  std::map<std::string, SynthesisResult> synth;
  for (auto crit : c.criteria())
    synth.emplace(to_string(crit), synthesize_for(pl, crit));
  const auto edmd = edmd_input_known_A(build_data_matrices(traj, pl.model.dict()), A);
  const Matrix B_edmd = c.edmd_bhat == "reference" ? Matrix(c.reference_bhat_edmd) : edmd.B;

  std::vector<std::pair<std::string, Matrix>> models;
  json bhat;
  for (const char* name : {"l2", "h2"})
    if (synth.count(name))
    {
      models.emplace_back(name, synth.at(name).B_hat);
      bhat[name] = flat(synth.at(name).B_hat);
    }
  models.emplace_back("edmd", B_edmd);
  bhat["edmd"] = flat(B_edmd);
  bhat["edmd_estimated"] = flat(edmd.B);
  write_json(dir / "bhat.json", bhat);

  // table
  json table;
  table["edmd_bhat_source"] = c.edmd_bhat;
  table["grid"] = grid_info(pl);
  table["lifting_error_max"] = lift_err;
  for (auto crit : c.criteria())
  {
    const std::string cn = to_string(crit);
    table["gamma_" + cn] = synth.at(cn).gamma;
    for (const auto& [name, B] : models)
      table["analysis"][cn][name] =
          name == cn ? synth.at(cn).gamma
                     : analyze(A, Cm, B, pl.lmi_grid, crit, pl.margin, pl.solver).gamma;
  }
  const double u_inf = input_inf_norm(u);
  table["amplitude"]["sigma_bar"] = max_singular_value(A);
  table["amplitude"]["rho"] = spectral_radius(A);
  table["amplitude"]["u_inf"] = u_inf;

  CsvTable err;
  for (const auto& [name, B] : models)
  {
    const auto b = error_bound(pl.model, pl.full_grid, B, u_inf);
    json e{{"beta", b.beta}};
    if (b.gamma_amp)
    {
      e["gamma_amp"] = *b.gamma_amp;
      e["gamma_amp_per_u_inf"] = *b.gamma_amp / u_inf;
    }
    else
      e["gamma_amp"] = nullptr;
    table["amplitude"][name] = e;

    const LtiKoopmanModel lti(A, B, Cm);
    const auto trace = error_trajectory(pl.model, lti, z0, u);
    err.add("norm_e_" + name, trace.norms);
    err.add("bound_" + name,
            std::vector<double>(trace.norms.size(),
                                b.gamma_amp ? *b.gamma_amp : std::numeric_limits<double>::quiet_NaN()));
  }
  err.write(dir / "fig3_err.csv");
  write_json(dir / "table1.json", table);

  comparison_csv(dir / "fig4_constant.csv", pl, c.x0, make_signal(c.signal("constant")), models);
  comparison_csv(dir / "fig5_sine.csv", pl, c.x0, make_signal(c.signal("sine")), models);

  for (auto crit : c.criteria())
    std::printf("gamma_%s = %.6f\n", to_string(crit), synth.at(to_string(crit)).gamma);
  std::printf("artifacts written to %s\n", dir.string().c_str());
  return exit_ok;
}

// ---------------------------------------------------------------------------------------
// Command line

int exit_code_for(const std::exception& e)
{
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DimensionError*>(&e))
    return exit_config;
  if (dynamic_cast<const InfeasibleError*>(&e))
    return exit_infeasible;
  if (dynamic_cast<const InvarianceError*>(&e))
    return exit_invariance;
  if (dynamic_cast<const CertificateError*>(&e) || dynamic_cast<const NumericError*>(&e) ||
      dynamic_cast<const RankError*>(&e))
    return exit_numerical;
  if (dynamic_cast<const UnstableError*>(&e))
    return exit_unstable;
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e))
    return exit_io;
  return exit_internal;
}

int run(int argc, const char* const* argv)
{
  CLI::App app{"Optimal constant input matrices for lifted Koopman models"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir;
  std::string criterion;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> subsample_n;
  bool full_grid = false;
  bool no_reduce = false;
  bool force = false;
  std::vector<std::string> overrides;

  app.add_option("--config", config_path, "JSON run configuration (default: built in)");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--criterion", criterion, "l2, h2 or both")
      ->check(CLI::IsMember({"l2", "h2", "both"}));
  app.add_option("--seed", seed, "seed for every random signal and the grid subsample");
  app.add_flag("--full-grid", full_grid, "use every grid point (no reduction, no subsample)");
  app.add_flag("--no-reduce", no_reduce, "skip the convex-hull constraint reduction");
  app.add_option("--subsample", subsample_n, "cap on LMI grid points (seeded uniform sample)");
  app.add_option("--set", overrides, "config override key=value (repeatable)");
  app.add_flag("--force", force, "continue past an invariance violation");

  auto* reproduce = app.add_subcommand("reproduce-paper", "run the full example and write all artifacts");
  auto* synth = app.add_subcommand("synth", "synthesize B_hat");
  auto* analyze_cmd = app.add_subcommand("analyze", "minimal gamma for given B_hat");
  auto* bound = app.add_subcommand("bound", "amplitude error bound for given B_hat");
  auto* sim = app.add_subcommand("simulate", "simulate the nonlinear example");
  auto* edmd = app.add_subcommand("edmd", "least-squares input matrix from trajectory data");

  std::string bhat_path;
  analyze_cmd->add_option("--bhat", bhat_path, "B_hat JSON (array, synthesis.json or bhat.json)")
      ->required();
  bound->add_option("--bhat", bhat_path, "B_hat JSON (array, synthesis.json or bhat.json)")
      ->required();
  std::string signal_text = "white:0.5";
  std::size_t steps = 600;
  sim->add_option("--signal", signal_text, "kind:level[:frequency]; kinds white, constant, sine");
  sim->add_option("--steps", steps, "number of steps");
  std::string edmd_input;
  std::string edmd_mode = "known-a";
  edmd->add_option("--input", edmd_input, "trajectory CSV (default: simulate the excitation)");
  edmd->add_option("--mode", edmd_mode, "known-a, joint or autonomous")
      ->check(CLI::IsMember({"known-a", "joint", "autonomous"}));

  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::ParseError& e)
  {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_config;
  }

  try
  {
    json j = config_path.empty() ? default_config_json() : read_json(config_path);
    for (const auto& o : overrides)
      apply_override(j, o);
    RunConfig c = config_from_json(j);
    if (!out_dir.empty())
      c.output_dir = out_dir;
    if (!criterion.empty())
      c.criterion = criterion;
    if (seed)
    {
      for (auto& s : c.signals)
        s.seed = *seed;
      c.subsample_seed = *seed;
    }
    if (subsample_n)
    {
      if (*subsample_n == 0)
        throw ConfigError("--subsample must be positive");
      c.subsample_n = subsample_n;
    }
    if (no_reduce)
      c.reduce = false;
    if (full_grid)
    {
      c.reduce = false;
      c.subsample_n.reset();
    }
    c.force = c.force || force;

    if (*reproduce)
      return cmd_reproduce_paper(c);
    if (*synth)
      return cmd_synth(c);
    if (*analyze_cmd)
      return cmd_analyze(c, bhat_path);
    if (*bound)
      return cmd_bound(c, bhat_path);
    if (*sim)
    {
      const double ts = c.signals.empty() ? 0.01 : c.signal("sine").sample_time;
      return cmd_simulate(c, parse_signal(signal_text, steps, seed.value_or(1), ts));
    }
    return cmd_edmd(c, edmd_input.empty() ? std::nullopt : std::optional<fs::path>(edmd_input),
                    edmd_mode);
  }
  catch (const std::exception& e)
  {
    std::fprintf(stderr, "koopman: error: %s\n", e.what());
    return exit_code_for(e);
  }
}

} // namespace koopman::cli
