#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "egpd/model.hpp"

namespace egpd {

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// ---------------------------------------------------------------- arrivals

ArrivalModel ArrivalModel::independent_poisson(Vec rates) {
  ArrivalModel a;
  a.kind_ = Kind::IndependentPoisson;
  a.mean_ = rates;
  a.params_ = std::move(rates);
  return a;
}

ArrivalModel ArrivalModel::batch_table(std::vector<Batch> batches) {
  ArrivalModel a;
  a.kind_ = Kind::BatchTable;
  const std::size_t dim = batches.empty() ? 0 : batches.front().items.size();
  a.mean_.assign(dim, 0.0);
  double total = 0.0;
  for (const auto& b : batches) {
    if (b.items.size() != dim) throw std::invalid_argument("batch-table rows differ in dimension");
    total += b.probability;
    a.cdf_.push_back(total);
    for (std::size_t i = 0; i < dim; ++i) a.mean_[i] += b.probability * b.items[i];
  }
  a.batches_ = std::move(batches);
  return a;
}

ArrivalModel ArrivalModel::deterministic(Vec items) {
  ArrivalModel a;
  a.kind_ = Kind::Deterministic;
  a.mean_ = items;
  a.params_ = std::move(items);
  return a;
}

ArrivalModel ArrivalModel::linear(ArrivalModel base, Matrix rows) {
  ArrivalModel a;
  a.kind_ = Kind::Linear;
  for (const auto& r : rows) {
    if (r.size() != base.dimension()) throw std::invalid_argument("linear arrival map: bad row width");
    a.mean_.push_back(dot(r, base.mean()));
  }
  a.base_ = std::make_shared<const ArrivalModel>(std::move(base));
  a.map_ = std::move(rows);
  return a;
}

std::string ArrivalModel::kind_name() const {
  switch (kind_) {
    case Kind::IndependentPoisson: return "independent-poisson";
    case Kind::BatchTable: return "batch-table";
    case Kind::Deterministic: return "deterministic";
    case Kind::Linear: return "linear";
  }
  return "unknown";
}

void ArrivalModel::sample(Rng& rng, std::span<double> out) const {
  if (out.size() != dimension()) throw std::invalid_argument("arrival sample buffer has wrong size");
  switch (kind_) {
    case Kind::IndependentPoisson:
      for (std::size_t i = 0; i < params_.size(); ++i) {
        out[i] = static_cast<double>(rng.poisson(params_[i]));
      }
      return;
    case Kind::BatchTable: {
      const double u = rng.uniform() * cdf_.back();
      std::size_t pick = batches_.size() - 1;
      for (std::size_t b = 0; b < cdf_.size(); ++b) {
        if (u < cdf_[b]) {
          pick = b;
          break;
        }
      }
      std::copy(batches_[pick].items.begin(), batches_[pick].items.end(), out.begin());
      return;
    }
    case Kind::Deterministic:
      std::copy(params_.begin(), params_.end(), out.begin());
      return;
    case Kind::Linear: {
      const Vec inner = base_->sample(rng);
      for (std::size_t r = 0; r < map_.size(); ++r) out[r] = dot(map_[r], inner);
      return;
    }
  }
}

Vec ArrivalModel::sample(Rng& rng) const {
  Vec out(dimension());
  sample(rng, out);
  return out;
}

std::vector<Vec> ArrivalModel::variation_directions() const {
  std::vector<Vec> dirs;
  switch (kind_) {
    case Kind::IndependentPoisson:
      for (std::size_t i = 0; i < params_.size(); ++i) {
        if (params_[i] > 0.0) {
          Vec e(params_.size(), 0.0);
          e[i] = 1.0;
          dirs.push_back(std::move(e));
        }
      }
      break;
    case Kind::BatchTable:
      for (const auto& b : batches_) {
        if (b.probability <= 0.0) continue;
        Vec d(b.items);
        for (std::size_t i = 0; i < d.size(); ++i) d[i] -= mean_[i];
        dirs.push_back(std::move(d));
      }
      break;
    case Kind::Deterministic:
      break;
    case Kind::Linear:
      for (const auto& inner : base_->variation_directions()) {
        Vec d(map_.size());
        for (std::size_t r = 0; r < map_.size(); ++r) d[r] = dot(map_[r], inner);
        dirs.push_back(std::move(d));
      }
      break;
  }
  return dirs;
}

std::optional<double> ArrivalModel::bound() const {
  switch (kind_) {
    case Kind::IndependentPoisson:
      return std::nullopt;
    case Kind::BatchTable: {
      double b = 0.0;
      for (const auto& batch : batches_)
        for (double v : batch.items) b = std::max(b, std::fabs(v));
      return b;
    }
    case Kind::Deterministic: {
      double b = 0.0;
      for (double v : params_) b = std::max(b, std::fabs(v));
      return b;
    }
    case Kind::Linear: {
      const auto inner = base_->bound();
      if (!inner) return std::nullopt;
      double b = 0.0;
      for (const auto& r : map_) {
        double row = 0.0;
        for (double v : r) row += std::fabs(v);
        b = std::max(b, row * *inner);
      }
      return b;
    }
  }
  return std::nullopt;
}

std::vector<std::string> ArrivalModel::problems() const {
  std::vector<std::string> out;
  switch (kind_) {
    case Kind::IndependentPoisson:
      for (double r : params_) {
        if (!std::isfinite(r) || r < 0.0) {
          out.push_back("poisson rates must be finite and nonnegative");
          break;
        }
      }
      break;
    case Kind::BatchTable: {
      if (batches_.empty()) {
        out.push_back("batch-table must list at least one batch");
        break;
      }
      double total = 0.0;
      bool negative = false;
      for (const auto& b : batches_) {
        total += b.probability;
        if (!(b.probability >= 0.0)) negative = true;
        for (double v : b.items)
          if (!std::isfinite(v) || v < 0.0) negative = true;
      }
      if (negative) out.push_back("batch-table entries and probabilities must be nonnegative");
      if (std::fabs(total - 1.0) > 1e-12) {
        std::ostringstream os;
        os << "probabilities must sum to 1 (sum is " << total << ")";
        out.push_back(os.str());
      }
      break;
    }
    case Kind::Deterministic:
      for (double v : params_) {
        if (!std::isfinite(v) || v < 0.0) {
          out.push_back("deterministic arrivals must be finite and nonnegative");
          break;
        }
      }
      break;
    case Kind::Linear:
      out = base_->problems();
      break;
  }
  return out;
}

// ---------------------------------------------------------------- utility

UtilitySpec UtilitySpec::linear_sum() { return UtilitySpec{}; }

UtilitySpec UtilitySpec::weighted_linear(Vec coefficients, double constant) {
  UtilitySpec u;
  u.kind_ = Kind::WeightedLinear;
  u.name_ = "weighted-linear";
  u.params_["coefficients"] = coefficients;
  u.coefficients_ = std::move(coefficients);
  u.constant_ = constant;
  return u;
}

UtilitySpec UtilitySpec::concave(std::string name, ValueFn value, GradientFn gradient,
                                 DomainFn domain) {
  UtilitySpec u;
  u.kind_ = Kind::Concave;
  u.name_ = std::move(name);
  u.value_ = std::move(value);
  u.gradient_ = std::move(gradient);
  u.domain_ = std::move(domain);
  return u;
}

UtilitySpec UtilitySpec::quadratic(Vec linear, Vec curvature, Vec center) {
  if (linear.size() != curvature.size() || linear.size() != center.size()) {
    throw std::invalid_argument("quadratic utility: parameter vectors differ in length");
  }
  auto value = [=](std::span<const double> x) {
    if (x.size() != linear.size()) throw DomainError("quadratic utility: dimension mismatch");
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double d = x[j] - center[j];
      s += linear[j] * x[j] - 0.5 * curvature[j] * d * d;
    }
    return s;
  };
  auto gradient = [=](std::span<const double> x) {
    if (x.size() != linear.size()) throw DomainError("quadratic utility: dimension mismatch");
    Vec g(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) g[j] = linear[j] - curvature[j] * (x[j] - center[j]);
    return g;
  };
  UtilitySpec u = concave("quadratic", value, gradient);
  u.params_ = {{"linear", linear}, {"curvature", curvature}, {"center", center}};
  return u;
}

UtilitySpec UtilitySpec::log_sum(Vec weights, Vec shift) {
  if (weights.size() != shift.size()) {
    throw std::invalid_argument("log-sum utility: weights and shift differ in length");
  }
  auto domain = [=](std::span<const double> x) {
    if (x.size() != shift.size()) return false;
    for (std::size_t j = 0; j < x.size(); ++j)
      if (!(x[j] + shift[j] > 0.0)) return false;
    return true;
  };
  auto value = [=](std::span<const double> x) {
    if (!domain(x)) throw DomainError("log-sum utility evaluated outside its domain");
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) s += weights[j] * std::log(x[j] + shift[j]);
    return s;
  };
  auto gradient = [=](std::span<const double> x) {
    Vec g(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) g[j] = weights[j] / (x[j] + shift[j]);
    return g;
  };
  UtilitySpec u = concave("log-sum", value, gradient, domain);
  u.params_ = {{"weights", weights}, {"shift", shift}};
  return u;
}

double UtilitySpec::value(std::span<const double> x) const {
  switch (kind_) {
    case Kind::LinearSum:
      return std::accumulate(x.begin(), x.end(), 0.0) + constant_;
    case Kind::WeightedLinear:
      return dot(coefficients_, x) + constant_;
    case Kind::Concave:
      return value_(x);
  }
  return 0.0;
}

Vec UtilitySpec::gradient(std::span<const double> x) const {
  switch (kind_) {
    case Kind::LinearSum:
      return Vec(x.size(), 1.0);
    case Kind::WeightedLinear:
      if (coefficients_.size() != x.size()) {
        throw DomainError("weighted-linear utility: dimension mismatch");
      }
      return coefficients_;
    case Kind::Concave:
      return gradient_(x);
  }
  return {};
}

bool UtilitySpec::in_domain(std::span<const double> x) const {
  if (kind_ != Kind::Concave || !domain_) return true;
  return domain_(x);
}

Vec UtilitySpec::linear_coefficients(std::size_t dimension) const {
  if (kind_ == Kind::LinearSum) return Vec(dimension, 1.0);
  if (kind_ == Kind::WeightedLinear) {
    if (coefficients_.size() != dimension) {
      throw std::invalid_argument("weighted-linear utility has " +
                                  std::to_string(coefficients_.size()) + " coefficients, expected " +
                                  std::to_string(dimension));
    }
    return coefficients_;
  }
  throw std::invalid_argument("utility '" + name_ + "' is not linear");
}

UtilitySpec UtilitySpec::embedded(std::size_t total, std::size_t offset, std::size_t width,
                                  double shift) const {
  if (offset + width > total) throw std::invalid_argument("embedded utility: window out of range");
  if (is_linear()) {
    const Vec inner = linear_coefficients(width);
    Vec coeffs(total, 0.0);
    double constant = constant_;
    for (std::size_t j = 0; j < width; ++j) {
      coeffs[offset + j] = inner[j];
      constant += inner[j] * shift;
    }
    UtilitySpec u = weighted_linear(std::move(coeffs), constant);
    u.name_ = name_;
    return u;
  }
  auto inner = std::make_shared<const UtilitySpec>(*this);
  auto window = [=](std::span<const double> v) {
    if (v.size() != total) throw DomainError("embedded utility: dimension mismatch");
    Vec x(width);
    for (std::size_t j = 0; j < width; ++j) x[j] = v[offset + j] + shift;
    return x;
  };
  UtilitySpec u = concave(
      name_, [=](std::span<const double> v) { return inner->value(window(v)); },
      [=](std::span<const double> v) {
        const Vec g = inner->gradient(window(v));
        Vec full(total, 0.0);
        std::copy(g.begin(), g.end(), full.begin() + static_cast<std::ptrdiff_t>(offset));
        return full;
      },
      [=](std::span<const double> v) { return v.size() == total && inner->in_domain(window(v)); });
  u.params_ = params_;
  return u;
}

std::optional<std::string> audit_gradient(const UtilitySpec& utility, std::span<const double> lo,
                                          std::span<const double> hi, std::uint64_t seed,
                                          int points, double rel_tol) {
  if (lo.size() != hi.size()) throw std::invalid_argument("audit_gradient: box bounds differ in size");
  Rng rng(seed, 0x6a7d);
  const std::size_t dim = lo.size();
  int checked = 0;
  for (int attempt = 0; attempt < 100 * points && checked < points; ++attempt) {
    Vec x(dim);
    for (std::size_t i = 0; i < dim; ++i) x[i] = lo[i] + (hi[i] - lo[i]) * rng.uniform();
    if (!utility.in_domain(x)) continue;
    const Vec g = utility.gradient(x);
    if (g.size() != dim) return "gradient has wrong dimension";
    for (std::size_t i = 0; i < dim; ++i) {
      const double h = 1e-6 * (1.0 + std::fabs(x[i]));
      Vec up(x), down(x);
      up[i] += h;
      down[i] -= h;
      if (!utility.in_domain(up) || !utility.in_domain(down)) continue;
      const double fd = (utility.value(up) - utility.value(down)) / (2.0 * h);
      if (!std::isfinite(g[i]) || std::fabs(fd - g[i]) > rel_tol * std::max(1.0, std::fabs(g[i]))) {
        std::ostringstream os;
        os << "gradient coordinate " << i << " is " << g[i] << " but finite difference gives " << fd;
        return os.str();
      }
    }
    ++checked;
  }
  if (checked == 0) return "no audit point of the reward box lies in the utility domain";
  return std::nullopt;
}

// ---------------------------------------------------------------- scenario

std::string to_string(CompletionPolicy policy) {
  return policy == CompletionPolicy::Fcfs ? "fcfs" : "cost-priority";
}

std::string to_string(CompletionScan scan) { return scan == CompletionScan::Restart ? "restart" : "single"; }

double Scenario::mu_star() const {
  double best = 0.0;
  for (const auto& mspec : matchings) {
    best = std::max(best, std::accumulate(mspec.mu.begin(), mspec.mu.end(), 0.0));
  }
  return best;
}

Vec Scenario::rewards() const {
  Vec w;
  w.reserve(matchings.size());
  for (const auto& mspec : matchings) w.push_back(mspec.reward);
  return w;
}

namespace {

void check_arrivals(const ArrivalModel& a, std::size_t items, const std::string& field,
                    std::vector<Diagnostic>& out) {
  if (a.dimension() != items) {
    out.push_back({field, "arrival vector has " + std::to_string(a.dimension()) +
                              " coordinates, expected " + std::to_string(items)});
    return;
  }
  for (const auto& p : a.problems()) out.push_back({field, p});
  for (std::size_t i = 0; i < items; ++i) {
    if (!(a.mean()[i] > 0.0)) {
      out.push_back({field, "all mean arrival rates must be positive (item " + std::to_string(i) + ")"});
      break;
    }
  }
}

}  // namespace

std::vector<Diagnostic> validate_scenario(const Scenario& s) {
  std::vector<Diagnostic> out;
  const std::size_t items = s.num_items();
  if (items == 0) out.push_back({"items", "at least one item type is required"});
  if (s.matchings.empty()) {
    out.push_back({"matchings", "at least the empty matching is required"});
  } else {
    for (std::size_t j = 0; j < s.matchings.size(); ++j) {
      const auto& mj = s.matchings[j];
      const std::string field = "matchings[" + std::to_string(j) + "]";
      if (mj.mu.size() != items) {
        out.push_back({field, "mu has " + std::to_string(mj.mu.size()) + " entries, expected " +
                                  std::to_string(items)});
        continue;
      }
      if (!std::all_of(mj.mu.begin(), mj.mu.end(), [](double v) { return std::isfinite(v); })) {
        out.push_back({field, "mu entries must be finite"});
      }
      if (!std::isfinite(mj.reward)) out.push_back({field, "reward must be finite"});
    }
    const auto& empty = s.matchings.front();
    const bool zero_mu =
        std::all_of(empty.mu.begin(), empty.mu.end(), [](double v) { return v == 0.0; });
    if (!zero_mu || empty.reward != 0.0) {
      out.push_back({"matchings[0]", "matching 0 must be the empty matching (zero mu, zero reward)"});
    }
  }
  check_arrivals(s.arrivals, items, "arrivals", out);
  if (s.m < 1) out.push_back({"m", "m must be at least 1"});
  if (!(s.beta > 0.0) || !std::isfinite(s.beta)) out.push_back({"beta", "beta must be positive"});
  if (s.gamma.size() != items) {
    out.push_back({"gamma", "gamma must have one weight per item type"});
  } else if (!std::all_of(s.gamma.begin(), s.gamma.end(), [](double g) { return g > 0.0; })) {
    out.push_back({"gamma", "gamma weights must be positive"});
  }
  if (s.holding_costs.size() != items) {
    out.push_back({"holding_costs", "holding_costs must have one entry per item type"});
  } else if (!std::all_of(s.holding_costs.begin(), s.holding_costs.end(),
                          [](double c) { return c >= 0.0 && std::isfinite(c); })) {
    out.push_back({"holding_costs", "holding costs must be nonnegative"});
  }
  if (s.horizon < 1) out.push_back({"horizon", "horizon must be at least 1"});
  for (std::size_t r = 0; r < s.rate_changes.size(); ++r) {
    const auto& change = s.rate_changes[r];
    const std::string field = "rate_changes[" + std::to_string(r) + "]";
    if (change.slot < 0 || change.slot > s.horizon) {
      out.push_back({field, "change slot must lie within [0, horizon]"});
    }
    check_arrivals(change.arrivals, items, field, out);
  }

  const std::size_t J = s.num_matchings();
  if (s.utility.kind() == UtilitySpec::Kind::WeightedLinear &&
      s.utility.parameters().at("coefficients").size() != J) {
    out.push_back({"utility", "weighted-linear needs one coefficient per matching"});
  }
  if (s.utility.kind() == UtilitySpec::Kind::Concave && out.empty()) {
    // Running averages stay in the box spanned by 0 and each reward.
    Vec lo(J), hi(J);
    for (std::size_t j = 0; j < J; ++j) {
      lo[j] = std::min(0.0, s.matchings[j].reward);
      hi[j] = std::max(0.0, s.matchings[j].reward);
    }
    if (!s.utility.in_domain(Vec(J, 0.0))) {
      out.push_back({"utility", "X(0) = 0 lies outside the utility domain"});
    } else if (auto problem = audit_gradient(s.utility, lo, hi, s.seed)) {
      out.push_back({"utility", "gradient check failed: " + *problem});
    }
  }
  return out;
}

// ---------------------------------------------------------------- network

NetworkModel::NetworkModel(std::size_t n_constrained, std::size_t n_free,
                           std::vector<Control> controls, int rounds_per_slot)
    : n_constrained_(n_constrained),
      n_free_(n_free),
      controls_(std::move(controls)),
      rounds_per_slot_(rounds_per_slot) {
  if (rounds_per_slot_ < 1) throw std::invalid_argument("rounds_per_slot must be at least 1");
  if (controls_.empty()) throw std::invalid_argument("a network needs at least one control");
  const std::size_t n = dimension();
  for (std::size_t k = 0; k < controls_.size(); ++k) {
    const auto& c = controls_[k];
    if (c.mu.size() != n || c.arrivals.dimension() != n) {
      throw std::invalid_argument("control " + std::to_string(k) + " has dimension mismatch");
    }
    Vec b(n);
    for (std::size_t i = 0; i < n; ++i) {
      b[i] = c.arrivals.mean()[i] / rounds_per_slot_ - c.mu[i];
    }
    mean_increments_.push_back(std::move(b));
  }
}

double NetworkModel::arrival_bound() const {
  double b = 0.0;
  for (const auto& c : controls_) {
    const auto cb = c.arrivals.bound();
    if (!cb) return std::numeric_limits<double>::infinity();
    b = std::max(b, *cb);
  }
  return b;
}

double NetworkModel::max_removal() const {
  double b = 0.0;
  for (const auto& c : controls_)
    for (double v : c.mu) b = std::max(b, std::fabs(v));
  return b;
}

std::vector<std::string> NetworkModel::problems() const {
  std::vector<std::string> out;
  for (std::size_t k = 0; k < controls_.size(); ++k) {
    const auto& c = controls_[k];
    for (std::size_t n = 0; n < n_constrained_; ++n) {
      if (c.mu[n] < 0.0) {
        out.push_back("control " + std::to_string(k) + " removes a negative amount at constrained node " +
                      std::to_string(n));
        break;
      }
    }
    for (const auto& p : c.arrivals.problems()) out.push_back("control " + std::to_string(k) + ": " + p);
    for (double v : mean_increments_[k]) {
      if (!std::isfinite(v)) {
        out.push_back("control " + std::to_string(k) + " has a non-finite mean increment");
        break;
      }
    }
  }
  return out;
}

}  // namespace egpd
