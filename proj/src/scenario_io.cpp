#include "egpd/scenario_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "egpd/csv.hpp"

namespace egpd {

namespace {

int line_of(const YAML::Node& n) { return n.Mark().is_null() ? 0 : n.Mark().line + 1; }

template <class T>
T scalar(const YAML::Node& n, const std::string& what) {
  if (!n || !n.IsScalar()) throw SchemaError(what + " must be a scalar", line_of(n));
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw SchemaError(what + " has an invalid value '" + n.Scalar() + "'", line_of(n));
  }
}

Vec vector_of(const YAML::Node& n, const std::string& what) {
  if (!n || !n.IsSequence()) throw SchemaError(what + " must be a list of numbers", line_of(n));
  Vec out;
  for (const auto& e : n) out.push_back(scalar<double>(e, what + " entry"));
  return out;
}

const YAML::Node require(const YAML::Node& map, const std::string& key, const std::string& where) {
  const YAML::Node n = map[key];
  if (!n) throw SchemaError(where + " is missing required key '" + key + "'", line_of(map));
  return n;
}

void reject_unknown(const YAML::Node& map, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& kv : map) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) throw SchemaError("unknown key '" + key + "' in " + where, line_of(kv.first));
  }
}

ArrivalModel parse_arrivals(const YAML::Node& n, const std::string& where) {
  if (!n.IsMap()) throw SchemaError(where + " must be a mapping", line_of(n));
  const auto kind = scalar<std::string>(require(n, "kind", where), where + ".kind");
  if (kind == "independent-poisson") {
    reject_unknown(n, {"kind", "rates"}, where);
    return ArrivalModel::independent_poisson(vector_of(require(n, "rates", where), where + ".rates"));
  }
  if (kind == "deterministic") {
    reject_unknown(n, {"kind", "items"}, where);
    return ArrivalModel::deterministic(vector_of(require(n, "items", where), where + ".items"));
  }
  if (kind == "batch-table") {
    reject_unknown(n, {"kind", "batches"}, where);
    const YAML::Node list = require(n, "batches", where);
    if (!list.IsSequence() || list.size() == 0) {
      throw SchemaError(where + ".batches must be a nonempty list", line_of(list));
    }
    std::vector<ArrivalModel::Batch> batches;
    std::size_t dim = 0;
    for (const auto& b : list) {
      if (!b.IsMap()) throw SchemaError("each batch must be a mapping", line_of(b));
      reject_unknown(b, {"items", "probability"}, "batch");
      Vec items = vector_of(require(b, "items", "batch"), "batch items");
      if (!batches.empty() && items.size() != dim) {
        throw SchemaError("batch has " + std::to_string(items.size()) + " entries, expected " +
                              std::to_string(dim),
                          line_of(b));
      }
      dim = items.size();
      batches.push_back({std::move(items), scalar<double>(require(b, "probability", "batch"), "probability")});
    }
    return ArrivalModel::batch_table(std::move(batches));
  }
  throw SchemaError("unknown arrival kind '" + kind + "'", line_of(n["kind"]));
}

UtilitySpec parse_utility(const YAML::Node& n) {
  if (n.IsScalar()) {
    const auto kind = n.as<std::string>();
    if (kind == "linear-sum") return UtilitySpec::linear_sum();
    throw SchemaError("utility '" + kind + "' needs parameters", line_of(n));
  }
  if (!n.IsMap()) throw SchemaError("utility must be a mapping", line_of(n));
  const auto kind = scalar<std::string>(require(n, "kind", "utility"), "utility.kind");
  if (kind == "linear-sum") {
    reject_unknown(n, {"kind"}, "utility");
    return UtilitySpec::linear_sum();
  }
  if (kind == "weighted-linear") {
    reject_unknown(n, {"kind", "coefficients", "constant"}, "utility");
    const double constant = n["constant"] ? scalar<double>(n["constant"], "utility.constant") : 0.0;
    return UtilitySpec::weighted_linear(vector_of(require(n, "coefficients", "utility"), "utility.coefficients"),
                                        constant);
  }
  try {
    if (kind == "quadratic") {
      reject_unknown(n, {"kind", "linear", "curvature", "center"}, "utility");
      return UtilitySpec::quadratic(vector_of(require(n, "linear", "utility"), "utility.linear"),
                                    vector_of(require(n, "curvature", "utility"), "utility.curvature"),
                                    vector_of(require(n, "center", "utility"), "utility.center"));
    }
    if (kind == "log-sum") {
      reject_unknown(n, {"kind", "weights", "shift"}, "utility");
      return UtilitySpec::log_sum(vector_of(require(n, "weights", "utility"), "utility.weights"),
                                  vector_of(require(n, "shift", "utility"), "utility.shift"));
    }
  } catch (const std::invalid_argument& e) {
    throw SchemaError(e.what(), line_of(n));
  }
  throw SchemaError("unknown utility kind '" + kind + "'", line_of(n["kind"]));
}

std::string default_label(const Vec& mu, const std::vector<std::string>& items) {
  std::string label = "<";
  bool first = true;
  for (std::size_t i = 0; i < mu.size() && i < items.size(); ++i) {
    if (mu[i] == 0.0) continue;
    if (!first) label += ",";
    label += items[i];
    first = false;
  }
  return label + ">";
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw SchemaError(e.msg, e.mark.line + 1);
  }
  if (!root.IsMap()) throw SchemaError("scenario must be a mapping of top-level keys", line_of(root));
  reject_unknown(root,
                 {"name", "items", "matchings", "arrivals", "m", "beta", "gamma", "utility", "holding_costs",
                  "completion_policy", "completion_scan", "horizon", "seed", "rate_changes"},
                 "scenario");

  Scenario s;
  if (root["name"]) s.name = scalar<std::string>(root["name"], "name");

  const YAML::Node items = require(root, "items", "scenario");
  if (items.IsScalar()) {
    const int count = scalar<int>(items, "items");
    if (count < 1) throw SchemaError("items must be positive", line_of(items));
    for (int i = 1; i <= count; ++i) s.items.push_back(std::to_string(i));
  } else if (items.IsSequence()) {
    for (const auto& it : items) s.items.push_back(scalar<std::string>(it, "item label"));
  } else {
    throw SchemaError("items must be a count or a list of labels", line_of(items));
  }

  const YAML::Node matchings = require(root, "matchings", "scenario");
  if (!matchings.IsSequence()) throw SchemaError("matchings must be a list", line_of(matchings));
  for (const auto& mnode : matchings) {
    if (!mnode.IsMap()) throw SchemaError("each matching must be a mapping", line_of(mnode));
    reject_unknown(mnode, {"label", "mu", "reward"}, "matching");
    MatchingSpec spec;
    spec.mu = vector_of(require(mnode, "mu", "matching"), "mu");
    if (spec.mu.size() != s.items.size()) {
      throw SchemaError("mu has " + std::to_string(spec.mu.size()) + " entries, expected " +
                            std::to_string(s.items.size()),
                        line_of(mnode["mu"]));
    }
    spec.reward = scalar<double>(require(mnode, "reward", "matching"), "reward");
    spec.label = mnode["label"] ? scalar<std::string>(mnode["label"], "label") : default_label(spec.mu, s.items);
    s.matchings.push_back(std::move(spec));
  }

  s.arrivals = parse_arrivals(require(root, "arrivals", "scenario"), "arrivals");
  if (root["m"]) s.m = scalar<int>(root["m"], "m");
  if (root["beta"]) s.beta = scalar<double>(root["beta"], "beta");
  s.gamma = root["gamma"] ? vector_of(root["gamma"], "gamma") : Vec(s.items.size(), 1.0);
  if (root["utility"]) s.utility = parse_utility(root["utility"]);
  s.holding_costs =
      root["holding_costs"] ? vector_of(root["holding_costs"], "holding_costs") : Vec(s.items.size(), 0.0);
  if (root["completion_policy"]) {
    const auto p = scalar<std::string>(root["completion_policy"], "completion_policy");
    if (p == "fcfs") s.completion_policy = CompletionPolicy::Fcfs;
    else if (p == "cost-priority") s.completion_policy = CompletionPolicy::CostPriority;
    else throw SchemaError("completion_policy must be fcfs or cost-priority", line_of(root["completion_policy"]));
  }
  if (root["completion_scan"]) {
    const auto p = scalar<std::string>(root["completion_scan"], "completion_scan");
    if (p == "restart") s.completion_scan = CompletionScan::Restart;
    else if (p == "single") s.completion_scan = CompletionScan::Single;
    else throw SchemaError("completion_scan must be restart or single", line_of(root["completion_scan"]));
  }
  if (root["horizon"]) s.horizon = scalar<std::int64_t>(root["horizon"], "horizon");
  if (root["seed"]) s.seed = scalar<std::uint64_t>(root["seed"], "seed");
  if (root["rate_changes"]) {
    const YAML::Node list = root["rate_changes"];
    if (!list.IsSequence()) throw SchemaError("rate_changes must be a list", line_of(list));
    for (const auto& c : list) {
      if (!c.IsMap()) throw SchemaError("each rate change must be a mapping", line_of(c));
      reject_unknown(c, {"slot", "arrivals"}, "rate change");
      s.rate_changes.push_back({scalar<std::int64_t>(require(c, "slot", "rate change"), "slot"),
                                parse_arrivals(require(c, "arrivals", "rate change"), "rate change arrivals")});
    }
  }
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

namespace {

// Shortest text that reads back to the same double.
std::string num(double x) { return format_double(x); }

void emit_vec(YAML::Emitter& e, const Vec& v) {
  e << YAML::Flow << YAML::BeginSeq;
  for (double x : v) e << num(x);
  e << YAML::EndSeq;
}

void emit_arrivals(YAML::Emitter& e, const ArrivalModel& a) {
  e << YAML::BeginMap << YAML::Key << "kind" << YAML::Value << a.kind_name();
  switch (a.kind()) {
    case ArrivalModel::Kind::IndependentPoisson:
      e << YAML::Key << "rates" << YAML::Value;
      emit_vec(e, a.parameters());
      break;
    case ArrivalModel::Kind::Deterministic:
      e << YAML::Key << "items" << YAML::Value;
      emit_vec(e, a.parameters());
      break;
    case ArrivalModel::Kind::BatchTable:
      e << YAML::Key << "batches" << YAML::Value << YAML::BeginSeq;
      for (const auto& b : a.batches()) {
        e << YAML::Flow << YAML::BeginMap << YAML::Key << "items" << YAML::Value;
        emit_vec(e, b.items);
        e << YAML::Key << "probability" << YAML::Value << num(b.probability) << YAML::EndMap;
      }
      e << YAML::EndSeq;
      break;
    case ArrivalModel::Kind::Linear:
      throw std::invalid_argument("linear arrival maps cannot be saved");
  }
  e << YAML::EndMap;
}

}  // namespace

std::string dump_scenario(const Scenario& s) {
  YAML::Emitter e;
  e << YAML::BeginMap;
  e << YAML::Key << "name" << YAML::Value << s.name;
  e << YAML::Key << "items" << YAML::Value << YAML::Flow << s.items;
  e << YAML::Key << "matchings" << YAML::Value << YAML::BeginSeq;
  for (const auto& m : s.matchings) {
    e << YAML::Flow << YAML::BeginMap << YAML::Key << "label" << YAML::Value << m.label << YAML::Key << "mu"
      << YAML::Value;
    emit_vec(e, m.mu);
    e << YAML::Key << "reward" << YAML::Value << num(m.reward) << YAML::EndMap;
  }
  e << YAML::EndSeq;
  e << YAML::Key << "arrivals" << YAML::Value;
  emit_arrivals(e, s.arrivals);
  e << YAML::Key << "m" << YAML::Value << s.m;
  e << YAML::Key << "beta" << YAML::Value << num(s.beta);
  e << YAML::Key << "gamma" << YAML::Value;
  emit_vec(e, s.gamma);

  e << YAML::Key << "utility" << YAML::Value << YAML::BeginMap;
  const auto& p = s.utility.parameters();
  switch (s.utility.kind()) {
    case UtilitySpec::Kind::LinearSum:
      e << YAML::Key << "kind" << YAML::Value << "linear-sum";
      break;
    case UtilitySpec::Kind::WeightedLinear:
      e << YAML::Key << "kind" << YAML::Value << "weighted-linear" << YAML::Key << "coefficients" << YAML::Value;
      emit_vec(e, p.at("coefficients"));
      e << YAML::Key << "constant" << YAML::Value << num(s.utility.constant());
      break;
    case UtilitySpec::Kind::Concave:
      if (s.utility.name() != "quadratic" && s.utility.name() != "log-sum") {
        throw std::invalid_argument("utility '" + s.utility.name() + "' cannot be saved");
      }
      e << YAML::Key << "kind" << YAML::Value << s.utility.name();
      for (const auto& [key, value] : p) {
        e << YAML::Key << key << YAML::Value;
        emit_vec(e, value);
      }
      break;
  }
  e << YAML::EndMap;

  e << YAML::Key << "holding_costs" << YAML::Value;
  emit_vec(e, s.holding_costs);
  e << YAML::Key << "completion_policy" << YAML::Value << to_string(s.completion_policy);
  e << YAML::Key << "completion_scan" << YAML::Value << to_string(s.completion_scan);
  e << YAML::Key << "horizon" << YAML::Value << s.horizon;
  e << YAML::Key << "seed" << YAML::Value << s.seed;
  if (!s.rate_changes.empty()) {
    e << YAML::Key << "rate_changes" << YAML::Value << YAML::BeginSeq;
    for (const auto& c : s.rate_changes) {
      e << YAML::BeginMap << YAML::Key << "slot" << YAML::Value << c.slot << YAML::Key << "arrivals" << YAML::Value;
      emit_arrivals(e, c.arrivals);
      e << YAML::EndMap;
    }
    e << YAML::EndSeq;
  }
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

}  // namespace egpd
