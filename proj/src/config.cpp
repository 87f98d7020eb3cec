#include "mvri/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mvri/errors.hpp"

namespace mvri {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ConfigError(where + ": " + what);
}

void check_keys(const json& j, const std::string& where, std::set<std::string> allowed) {
  if (!j.is_object()) fail(where, "expected an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) fail(where, "unknown field '" + key + "'");
}

double get_number(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  return j.get<double>();
}

int get_int(const json& j, const std::string& where) {
  if (!j.is_number_integer()) fail(where, "expected an integer");
  return j.get<int>();
}

std::vector<double> get_vector(const json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(get_number(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

std::vector<std::vector<double>> get_matrix(const json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array of rows");
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(get_vector(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

template <typename T, typename Get>
void read_opt(const json& j, const char* key, T& out, const std::string& where, Get get) {
  if (j.contains(key)) out = get(j.at(key), where + "." + key);
}

Interp parse_interp(const json& j, const std::string& where) {
  if (!j.is_string()) fail(where, "expected \"constant\" or \"linear\"");
  const auto s = j.get<std::string>();
  if (s == "constant") return Interp::PiecewiseConstant;
  if (s == "linear") return Interp::PiecewiseLinear;
  fail(where, "unknown interpolation '" + s + "'");
}

const char* interp_name(Interp i) {
  return i == Interp::PiecewiseConstant ? "constant" : "linear";
}

// A bare value means a constant table; otherwise {times, values, interp}.
template <typename Value, typename Get>
TableSpec<Value> parse_table(const json& j, const std::string& where, bool bare, Get get) {
  TableSpec<Value> spec;
  if (bare) {
    spec.values = {get(j, where)};
    return spec;
  }
  check_keys(j, where, {"times", "values", "interp"});
  if (!j.contains("times") || !j.contains("values")) fail(where, "needs 'times' and 'values'");
  spec.times = get_vector(j.at("times"), where + ".times");
  const json& v = j.at("values");
  if (!v.is_array()) fail(where + ".values", "expected an array");
  for (std::size_t i = 0; i < v.size(); ++i)
    spec.values.push_back(get(v[i], where + ".values[" + std::to_string(i) + "]"));
  if (j.contains("interp")) spec.interp = parse_interp(j.at("interp"), where + ".interp");
  return spec;
}

ScalarSpec parse_scalar_table(const json& j, const std::string& where) {
  return parse_table<double>(j, where, j.is_number(), get_number);
}

VectorSpec parse_vector_table(const json& j, const std::string& where) {
  return parse_table<std::vector<double>>(j, where, j.is_array(), get_vector);
}

MatrixSpec parse_matrix_table(const json& j, const std::string& where) {
  return parse_table<std::vector<std::vector<double>>>(j, where, j.is_array(), get_matrix);
}

template <typename Value>
json table_to_json(const TableSpec<Value>& spec) {
  if (spec.times == std::vector<double>{0.0} && spec.values.size() == 1 &&
      spec.interp == Interp::PiecewiseConstant) {
    return json(spec.values.front());
  }
  return json{{"times", spec.times}, {"values", spec.values}, {"interp", interp_name(spec.interp)}};
}

ConeSpec parse_cone(const json& j, const std::string& where) {
  ConeSpec c;
  if (j.is_string()) {
    c.type = j.get<std::string>();
  } else {
    check_keys(j, where, {"type", "signs", "generators"});
    if (!j.contains("type") || !j.at("type").is_string()) fail(where, "needs a string 'type'");
    c.type = j.at("type").get<std::string>();
    if (j.contains("signs")) {
      for (double s : get_vector(j.at("signs"), where + ".signs")) {
        if (s != -1.0 && s != 0.0 && s != 1.0) fail(where + ".signs", "entries must be -1, 0 or 1");
        c.signs.push_back(static_cast<int>(s));
      }
    }
    read_opt(j, "generators", c.generators, where, get_matrix);
  }
  static const std::set<std::string> kinds{"full", "nonnegative", "nonpositive", "half_lines",
                                           "generated"};
  if (!kinds.count(c.type)) fail(where + ".type", "unknown cone '" + c.type + "'");
  if (c.type == "half_lines" && c.signs.empty()) fail(where, "half_lines needs 'signs'");
  if (c.type == "generated" && c.generators.empty()) fail(where, "generated needs 'generators'");
  return c;
}

json cone_to_json(const ConeSpec& c) {
  if (c.signs.empty() && c.generators.empty()) return c.type;
  json j{{"type", c.type}};
  if (!c.signs.empty()) j["signs"] = c.signs;
  if (!c.generators.empty()) j["generators"] = c.generators;
  return j;
}

ClaimSpec parse_claims(const json& j, const std::string& where) {
  check_keys(j, where, {"type", "size", "sizes", "weights", "max", "rate", "nodes"});
  ClaimSpec c;
  if (!j.contains("type") || !j.at("type").is_string()) fail(where, "needs a string 'type'");
  c.type = j.at("type").get<std::string>();
  read_opt(j, "size", c.size, where, get_number);
  read_opt(j, "sizes", c.sizes, where, get_vector);
  read_opt(j, "weights", c.weights, where, get_vector);
  read_opt(j, "max", c.max, where, get_number);
  read_opt(j, "rate", c.rate, where, get_number);
  read_opt(j, "nodes", c.nodes, where, get_int);
  if (c.type == "atoms") {
    if (c.sizes.empty() || c.sizes.size() != c.weights.size())
      fail(where, "atoms need equal-length, nonempty 'sizes' and 'weights'");
  } else if (c.type != "point" && c.type != "uniform" && c.type != "truncated_exponential") {
    fail(where + ".type", "unknown claim law '" + c.type + "'");
  }
  return c;
}

json claims_to_json(const ClaimSpec& c) {
  json j{{"type", c.type}};
  if (c.type == "point") j["size"] = c.size;
  if (c.type == "atoms") {
    j["sizes"] = c.sizes;
    j["weights"] = c.weights;
  }
  if (c.type == "uniform" || c.type == "truncated_exponential") {
    j["max"] = c.max;
    j["nodes"] = c.nodes;
  }
  if (c.type == "truncated_exponential") j["rate"] = c.rate;
  return j;
}

// drift/volatility: a single table, or {"levels": [table, ...]} for count-modulated runs.
template <typename Spec, typename Parse>
std::vector<Spec> parse_levels(const json& j, const std::string& where, Parse parse) {
  if (j.is_object() && j.contains("levels")) {
    check_keys(j, where, {"levels"});
    const json& levels = j.at("levels");
    if (!levels.is_array() || levels.empty()) fail(where + ".levels", "expected a nonempty array");
    std::vector<Spec> out;
    for (std::size_t i = 0; i < levels.size(); ++i)
      out.push_back(parse(levels[i], where + ".levels[" + std::to_string(i) + "]"));
    return out;
  }
  return {parse(j, where)};
}

template <typename Spec>
json levels_to_json(const std::vector<Spec>& levels) {
  if (levels.size() == 1) return table_to_json(levels.front());
  json arr = json::array();
  for (const auto& l : levels) arr.push_back(table_to_json(l));
  return json{{"levels", arr}};
}

ModelSpec parse_model(const json& j) {
  const std::string where = "model";
  check_keys(j, where,
             {"horizon", "coefficient_mode", "interest_rate", "drift", "volatility", "cone",
              "claim_intensity", "safety_loading", "reinsurance_loading", "claims",
              "ellipticity_floor"});
  ModelSpec m;
  read_opt(j, "horizon", m.horizon, where, get_number);
  if (j.contains("coefficient_mode")) {
    const json& mode = j.at("coefficient_mode");
    const std::string s = mode.is_string() ? mode.get<std::string>() : "";
    if (s == "deterministic") m.mode = CoefficientMode::Deterministic;
    else if (s == "count_modulated") m.mode = CoefficientMode::CountModulated;
    else if (s == "brownian_adapted")
      fail(where + ".coefficient_mode",
           "Brownian-adapted coefficients are not supported (use deterministic or count_modulated)");
    else fail(where + ".coefficient_mode", "unknown mode '" + s + "'");
  }
  if (j.contains("interest_rate"))
    m.interest_rate = parse_scalar_table(j.at("interest_rate"), where + ".interest_rate");
  if (j.contains("drift"))
    m.drift = parse_levels<VectorSpec>(j.at("drift"), where + ".drift", parse_vector_table);
  if (j.contains("volatility"))
    m.volatility =
        parse_levels<MatrixSpec>(j.at("volatility"), where + ".volatility", parse_matrix_table);
  if (j.contains("cone")) m.cone = parse_cone(j.at("cone"), where + ".cone");
  read_opt(j, "claim_intensity", m.claim_intensity, where, get_number);
  read_opt(j, "safety_loading", m.safety_loading, where, get_number);
  read_opt(j, "reinsurance_loading", m.reinsurance_loading, where, get_number);
  if (j.contains("claims")) m.claims = parse_claims(j.at("claims"), where + ".claims");
  read_opt(j, "ellipticity_floor", m.ellipticity_floor, where, get_number);
  return m;
}

json model_to_json(const ModelSpec& m) {
  return json{{"horizon", m.horizon},
              {"coefficient_mode",
               m.mode == CoefficientMode::Deterministic ? "deterministic" : "count_modulated"},
              {"interest_rate", table_to_json(m.interest_rate)},
              {"drift", levels_to_json(m.drift)},
              {"volatility", levels_to_json(m.volatility)},
              {"cone", cone_to_json(m.cone)},
              {"claim_intensity", m.claim_intensity},
              {"safety_loading", m.safety_loading},
              {"reinsurance_loading", m.reinsurance_loading},
              {"claims", claims_to_json(m.claims)},
              {"ellipticity_floor", m.ellipticity_floor}};
}

StrategySpec parse_strategy(const json& j, const std::string& where) {
  StrategySpec s;
  if (j.is_string()) {
    s.type = j.get<std::string>();
  } else {
    check_keys(j, where, {"type", "pi", "q", "pi_scale", "q_scale"});
    if (!j.contains("type") || !j.at("type").is_string()) fail(where, "needs a string 'type'");
    s.type = j.at("type").get<std::string>();
    read_opt(j, "pi", s.pi, where, get_vector);
    read_opt(j, "q", s.q, where, get_number);
    read_opt(j, "pi_scale", s.pi_scale, where, get_number);
    read_opt(j, "q_scale", s.q_scale, where, get_number);
  }
  if (s.type != "feedback" && s.type != "zero" && s.type != "fixed")
    fail(where + ".type", "unknown strategy '" + s.type + "'");
  if (s.type == "fixed" && s.pi.empty()) fail(where, "fixed strategy needs 'pi'");
  return s;
}

json strategy_to_json(const StrategySpec& s) {
  if (s.type == "zero") return "zero";
  if (s.type == "fixed") return json{{"type", "fixed"}, {"pi", s.pi}, {"q", s.q}};
  if (s.pi_scale == 1.0 && s.q_scale == 1.0) return "feedback";
  return json{{"type", "feedback"}, {"pi_scale", s.pi_scale}, {"q_scale", s.q_scale}};
}

RunConfig from_json(const json& root) {
  check_keys(root, "config", {"model", "grid", "frontier", "simulation", "validate", "output_dir"});
  RunConfig c;
  if (root.contains("model")) c.model = parse_model(root.at("model"));

  if (root.contains("grid")) {
    const json& g = root.at("grid");
    check_keys(g, "grid", {"steps", "n_max", "tail_probability"});
    read_opt(g, "steps", c.grid.steps, "grid", get_int);
    if (g.contains("n_max") && !g.at("n_max").is_null())
      c.grid.n_max = get_int(g.at("n_max"), "grid.n_max");
    read_opt(g, "tail_probability", c.grid.tail_probability, "grid", get_number);
  }

  if (root.contains("frontier")) {
    const json& f = root.at("frontier");
    check_keys(f, "frontier", {"initial_wealth", "targets"});
    read_opt(f, "initial_wealth", c.frontier.initial_wealth, "frontier", get_number);
    read_opt(f, "targets", c.frontier.targets, "frontier", get_vector);
  }
  c.simulation.config.initial_wealth = c.frontier.initial_wealth;

  if (root.contains("simulation")) {
    const json& s = root.at("simulation");
    const std::string w = "simulation";
    check_keys(s, w, {"paths", "seed", "dt_max", "mode", "threads", "record_paths", "strategy",
                      "target"});
    SimConfig& sc = c.simulation.config;
    read_opt(s, "paths", sc.n_paths, w, get_int);
    if (s.contains("seed")) {
      if (!s.at("seed").is_number_unsigned()) fail(w + ".seed", "expected a nonnegative integer");
      sc.seed = s.at("seed").get<std::uint64_t>();
    }
    read_opt(s, "dt_max", sc.dt_max, w, get_number);
    read_opt(s, "threads", sc.threads, w, get_int);
    if (s.contains("record_paths")) {
      if (!s.at("record_paths").is_boolean()) fail(w + ".record_paths", "expected a boolean");
      sc.record_paths = s.at("record_paths").get<bool>();
    }
    if (s.contains("mode")) {
      const json& mode = s.at("mode");
      const std::string m = mode.is_string() ? mode.get<std::string>() : "";
      if (m == "euler") sc.mode = SimMode::Euler;
      else if (m == "explicit_product") sc.mode = SimMode::ExplicitProduct;
      else fail(w + ".mode", "expected \"euler\" or \"explicit_product\"");
    }
    if (s.contains("strategy")) c.simulation.strategy = parse_strategy(s.at("strategy"), w + ".strategy");
    if (s.contains("target")) c.simulation.target = get_number(s.at("target"), w + ".target");
    if (sc.n_paths < 1) fail(w + ".paths", "must be >= 1");
    if (!(sc.dt_max > 0.0)) fail(w + ".dt_max", "must be > 0");
  }

  if (root.contains("validate")) {
    const json& v = root.at("validate");
    check_keys(v, "validate", {"target", "variance_scale"});
    if (v.contains("target")) c.validate.target = get_number(v.at("target"), "validate.target");
    read_opt(v, "variance_scale", c.validate.variance_scale, "validate", get_number);
  }

  if (root.contains("output_dir")) {
    if (!root.at("output_dir").is_string()) fail("output_dir", "expected a string");
    c.output_dir = root.at("output_dir").get<std::string>();
  }
  if (c.grid.steps < 1) fail("grid.steps", "must be >= 1");
  return c;
}

json to_json(const RunConfig& c) {
  json grid{{"steps", c.grid.steps}, {"tail_probability", c.grid.tail_probability}};
  if (c.grid.n_max) grid["n_max"] = *c.grid.n_max;
  const SimConfig& sc = c.simulation.config;
  json sim{{"paths", sc.n_paths},
           {"seed", sc.seed},
           {"dt_max", sc.dt_max},
           {"mode", sc.mode == SimMode::Euler ? "euler" : "explicit_product"},
           {"threads", sc.threads},
           {"record_paths", sc.record_paths},
           {"strategy", strategy_to_json(c.simulation.strategy)}};
  if (c.simulation.target) sim["target"] = *c.simulation.target;
  json val{{"variance_scale", c.validate.variance_scale}};
  if (c.validate.target) val["target"] = *c.validate.target;
  return json{{"model", model_to_json(c.model)},
              {"grid", grid},
              {"frontier",
               {{"initial_wealth", c.frontier.initial_wealth}, {"targets", c.frontier.targets}}},
              {"simulation", sim},
              {"validate", val},
              {"output_dir", c.output_dir}};
}

ScalarTable build_scalar(const ScalarSpec& s) { return ScalarTable(s.times, s.values, s.interp); }

VectorTable build_vector(const VectorSpec& s) {
  std::vector<Eigen::VectorXd> values;
  for (const auto& v : s.values) values.push_back(Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()));
  return VectorTable(s.times, std::move(values), s.interp);
}

MatrixTable build_matrix(const MatrixSpec& s) {
  std::vector<Eigen::MatrixXd> values;
  for (const auto& rows : s.values) {
    const Eigen::Index r = static_cast<Eigen::Index>(rows.size());
    const Eigen::Index c = r ? static_cast<Eigen::Index>(rows.front().size()) : 0;
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
      if (static_cast<Eigen::Index>(rows[i].size()) != c) throw ModelError("ragged volatility matrix");
      for (Eigen::Index k = 0; k < c; ++k) m(i, k) = rows[i][k];
    }
    values.push_back(std::move(m));
  }
  return MatrixTable(s.times, std::move(values), s.interp);
}

ConvexCone build_cone(const ConeSpec& c, int dim) {
  if (c.type == "full") return ConvexCone::full(dim);
  if (c.type == "nonnegative") return ConvexCone::nonnegative(dim);
  if (c.type == "nonpositive") return ConvexCone::nonpositive(dim);
  if (c.type == "half_lines") return ConvexCone::half_lines(c.signs);
  Eigen::MatrixXd g(dim, static_cast<Eigen::Index>(c.generators.size()));
  for (std::size_t k = 0; k < c.generators.size(); ++k) {
    if (static_cast<int>(c.generators[k].size()) != dim)
      throw ModelError("cone generator dimension must match number of assets");
    for (int i = 0; i < dim; ++i) g(i, static_cast<Eigen::Index>(k)) = c.generators[k][i];
  }
  return ConvexCone::generated(std::move(g));
}

ClaimDistribution build_claims(const ClaimSpec& c) {
  if (c.type == "point") return ClaimDistribution::point_mass(c.size);
  if (c.type == "atoms") {
    std::vector<ClaimAtom> atoms;
    for (std::size_t i = 0; i < c.sizes.size(); ++i) atoms.push_back({c.sizes[i], c.weights[i]});
    return ClaimDistribution::from_atoms(std::move(atoms));
  }
  if (c.type == "uniform") {
    return ClaimDistribution::from_density([](double) { return 1.0; }, c.max, c.nodes);
  }
  const double rate = c.rate;
  if (!(rate > 0.0)) throw ModelError("truncated exponential needs rate > 0");
  return ClaimDistribution::from_density([rate](double y) { return std::exp(-rate * y); }, c.max,
                                         c.nodes);
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return from_json(root);
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const RunConfig& config) { return to_json(config).dump(2) + "\n"; }

MarketModel build_model(const ModelSpec& spec) {
  std::vector<VectorTable> drift;
  for (const auto& d : spec.drift) drift.push_back(build_vector(d));
  std::vector<MatrixTable> vol;
  for (const auto& v : spec.volatility) vol.push_back(build_matrix(v));
  const int dim = drift.empty() ? 0 : static_cast<int>(drift.front().values().front().size());
  InsuranceTerms terms{spec.claim_intensity, spec.safety_loading, spec.reinsurance_loading};
  return MarketModel(spec.horizon, build_scalar(spec.interest_rate), std::move(drift),
                     std::move(vol), build_cone(spec.cone, dim), terms, build_claims(spec.claims),
                     spec.mode, spec.ellipticity_floor);
}

}  // namespace mvri
