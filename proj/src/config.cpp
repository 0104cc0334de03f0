#include "caster/config.hpp"

#include <fmt/format.h>

#include <fstream>
#include <set>
#include <sstream>

namespace caster {

namespace {

using nlohmann::json;

/// Reads the members of one JSON object and rejects whatever was not read.
class Section
{
public:
  Section(const json & j, std::string path) : j_(j), path_(std::move(path))
  {
    if (!j_.is_object()) { throw ConfigError(fmt::format("config: '{}' must be an object", display())); }
  }

  void number(const char * key, double & out)
  {
    if (const json * v = take(key)) {
      if (!v->is_number()) { throw ConfigError(fmt::format("config: '{}' must be a number", qualified(key))); }
      out = v->get<double>();
    }
  }

  template <typename Int>
  void integer(const char * key, Int & out)
  {
    if (const json * v = take(key)) {
      if (!v->is_number_integer()) { throw ConfigError(fmt::format("config: '{}' must be an integer", qualified(key))); }
      if constexpr (std::is_unsigned_v<Int>) {
        if (v->is_number_unsigned()) {
          out = v->get<Int>();
          return;
        }
        if (v->get<std::int64_t>() < 0) {
          throw ConfigError(fmt::format("config: '{}' must be non-negative", qualified(key)));
        }
      }
      out = v->get<Int>();
    }
  }

  void string(const char * key, std::string & out)
  {
    if (const json * v = take(key)) {
      if (!v->is_string()) { throw ConfigError(fmt::format("config: '{}' must be a string", qualified(key))); }
      out = v->get<std::string>();
    }
  }

  template <int N>
  void vector(const char * key, Eigen::Matrix<double, N, 1> & out)
  {
    if (const json * v = take(key)) {
      if (!v->is_array() || v->size() != N) {
        throw ConfigError(fmt::format("config: '{}' must be an array of {} numbers", qualified(key), N));
      }
      for (int i = 0; i < N; ++i) {
        if (!(*v)[i].is_number()) {
          throw ConfigError(fmt::format("config: '{}[{}]' must be a number", qualified(key), i));
        }
        out(i) = (*v)[i].get<double>();
      }
    }
  }

  /// Nested section, empty when absent.
  std::optional<Section> child(const char * key)
  {
    if (const json * v = take(key)) { return Section(*v, qualified(key)); }
    return std::nullopt;
  }

  void finish() const
  {
    for (const auto & [key, value] : j_.items()) {
      if (!seen_.contains(key)) { throw ConfigError(fmt::format("config: unknown key '{}'", qualified(key))); }
    }
  }

  std::string qualified(std::string_view key) const { return path_.empty() ? std::string(key) : path_ + "." + std::string(key); }

private:
  const json * take(const char * key)
  {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string display() const { return path_.empty() ? "<root>" : path_; }

  const json & j_;
  std::string path_;
  std::set<std::string, std::less<>> seen_;
};

void read_robot(Section s, RobotParams & p)
{
  s.number("dx_cw", p.dx_cw);
  s.number("dy_cw", p.dy_cw);
  s.number("dy_dw", p.dy_dw);
  s.number("l_tr", p.l_tr);
  s.number("r_cw", p.r_cw);
  s.number("v_min", p.v_min);
  s.number("v_max", p.v_max);
  s.number("w_min", p.w_min);
  s.number("w_max", p.w_max);
  s.number("a_min", p.a_min);
  s.number("a_max", p.a_max);
  s.number("zeta", p.zeta);
  s.finish();
}

void read_solver(Section s, nlp::SolverOptions & o)
{
  s.integer("max_iterations", o.max_iterations);
  s.number("kkt_tolerance", o.kkt_tolerance);
  s.number("constraint_tolerance", o.constraint_tolerance);
  s.number("regularization_floor", o.regularization_floor);
  if (auto ls = s.child("line_search")) {
    ls->number("contraction", o.line_search.contraction);
    ls->number("sufficient_decrease", o.line_search.sufficient_decrease);
    ls->number("min_step", o.line_search.min_step);
    ls->finish();
  }
  s.finish();
}

/// Validation messages prefixed with the struct name are re-keyed to the config section.
std::string rekey(std::string msg)
{
  for (const auto & [from, to] : {std::pair{"RobotParams.", "robot."}, std::pair{"SolverOptions.", "solver."}}) {
    if (msg.rfind(from, 0) == 0) { msg.replace(0, std::char_traits<char>::length(from), to); }
  }
  return msg;
}

json vec(const auto & v)
{
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) { a.push_back(v(i)); }
  return a;
}

}  // namespace

void RunConfig::validate() const
{
  try {
    robot.validate();
    weights.validate();
    planner.horizon.validate();
    planner.filter.validate();
    planner.solver.validate();
    noise.validate();
  } catch (const std::invalid_argument & e) {
    throw ConfigError("config: " + rekey(e.what()));
  }
  if (seeds.repetitions < 1) { throw ConfigError("config: seeds.repetitions: must be >= 1"); }
  if (output_dir.empty()) { throw ConfigError("config: output_dir: must not be empty"); }
}

RunConfig config_from_json(const json & j)
{
  RunConfig c;
  Section root(j, "");
  if (auto s = root.child("robot")) { read_robot(*s, c.robot); }
  if (auto s = root.child("weights")) {
    s->vector("q_nav", c.weights.q_nav);
    s->vector("q_cw", c.weights.q_cw);
    s->vector("q_u", c.weights.q_u);
    s->finish();
  }
  if (auto s = root.child("horizon")) {
    s->number("horizon_T", c.planner.horizon.horizon_T);
    s->number("control_rate", c.planner.horizon.control_rate);
    s->finish();
  }
  std::string roll = to_string(c.planner.roll_model);
  root.string("roll_model", roll);
  if (roll == to_string(RollModel::Predicted)) {
    c.planner.roll_model = RollModel::Predicted;
  } else if (roll == to_string(RollModel::Measured)) {
    c.planner.roll_model = RollModel::Measured;
  } else {
    throw ConfigError(fmt::format("config: 'roll_model' must be \"predicted\" or \"measured\", got \"{}\"", roll));
  }
  if (auto s = root.child("path_filter")) {
    s->number("gdot_lo", c.planner.filter.gdot_lo);
    s->number("e_hi", c.planner.filter.e_hi);
    s->number("v_creep", c.planner.filter.v_creep);
    std::string mode = to_string(c.planner.filter.mode);
    s->string("mode", mode);
    if (mode == to_string(FilterMode::OneWheel)) {
      c.planner.filter.mode = FilterMode::OneWheel;
    } else if (mode == to_string(FilterMode::TwoWheel)) {
      c.planner.filter.mode = FilterMode::TwoWheel;
    } else {
      throw ConfigError(fmt::format("config: 'path_filter.mode' must be \"one_wheel\" or \"two_wheel\", got \"{}\"", mode));
    }
    s->finish();
  }
  if (auto s = root.child("noise")) {
    s->number("v_amplitude", c.noise.v_amplitude);
    s->number("w_amplitude", c.noise.w_amplitude);
    s->finish();
  }
  if (auto s = root.child("seeds")) {
    s->integer("base", c.seeds.base);
    s->integer("repetitions", c.seeds.repetitions);
    s->finish();
  }
  if (auto s = root.child("solver")) { read_solver(*s, c.planner.solver); }
  root.string("output_dir", c.output_dir);
  root.finish();
  c.validate();
  return c;
}

json to_json(const RunConfig & c)
{
  const RobotParams & p = c.robot;
  const nlp::SolverOptions & o = c.planner.solver;
  return {
    {"robot",
     {{"dx_cw", p.dx_cw}, {"dy_cw", p.dy_cw}, {"dy_dw", p.dy_dw}, {"l_tr", p.l_tr}, {"r_cw", p.r_cw}, {"v_min", p.v_min},
      {"v_max", p.v_max}, {"w_min", p.w_min}, {"w_max", p.w_max}, {"a_min", p.a_min}, {"a_max", p.a_max}, {"zeta", p.zeta}}},
    {"weights", {{"q_nav", vec(c.weights.q_nav)}, {"q_cw", vec(c.weights.q_cw)}, {"q_u", vec(c.weights.q_u)}}},
    {"horizon", {{"horizon_T", c.planner.horizon.horizon_T}, {"control_rate", c.planner.horizon.control_rate}}},
    {"roll_model", to_string(c.planner.roll_model)},
    {"path_filter",
     {{"gdot_lo", c.planner.filter.gdot_lo}, {"e_hi", c.planner.filter.e_hi}, {"v_creep", c.planner.filter.v_creep},
      {"mode", to_string(c.planner.filter.mode)}}},
    {"noise", {{"v_amplitude", c.noise.v_amplitude}, {"w_amplitude", c.noise.w_amplitude}}},
    {"seeds", {{"base", c.seeds.base}, {"repetitions", c.seeds.repetitions}}},
    {"solver",
     {{"max_iterations", o.max_iterations}, {"kkt_tolerance", o.kkt_tolerance},
      {"constraint_tolerance", o.constraint_tolerance}, {"regularization_floor", o.regularization_floor},
      {"line_search",
       {{"contraction", o.line_search.contraction}, {"sufficient_decrease", o.line_search.sufficient_decrease},
        {"min_step", o.line_search.min_step}}}}},
    {"output_dir", c.output_dir},
  };
}

void apply_override(json & j, std::string_view assignment)
{
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError(fmt::format("config: override '{}' must have the form key=value", assignment));
  }
  const std::string_view key = assignment.substr(0, eq);
  const std::string text(assignment.substr(eq + 1));
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) { value = text; }

  json * node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part(key.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start));
    if (part.empty()) { throw ConfigError(fmt::format("config: override key '{}' is malformed", key)); }
    if (!node->is_object()) {
      throw ConfigError(fmt::format("config: override '{}' descends into a non-object", key));
    }
    if (dot == std::string_view::npos) {
      (*node)[part] = std::move(value);
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) { *node = json::object(); }
    start = dot + 1;
  }
}

RunConfig load_config(const std::filesystem::path & path, const std::vector<std::string> & overrides)
{
  json j = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) { throw ConfigError(fmt::format("config: cannot open '{}'", path.string())); }
    try {
      j = json::parse(in);
    } catch (const json::parse_error & e) {
      throw ConfigError(fmt::format("config: '{}' is not valid JSON ({})", path.string(), e.what()));
    }
  }
  for (const auto & o : overrides) { apply_override(j, o); }
  return config_from_json(j);
}

}  // namespace caster
