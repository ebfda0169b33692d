#include "sfperc/branching.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <fmt/ranges.h>

namespace sfperc {

// ---------------------------------------------------------------------------
// Reproduction

Reproduction::Reproduction(std::variant<Constant, Discrete, Uniform> law) : law_(std::move(law)) {
  if (auto* d = std::get_if<Discrete>(&law_)) {
    if (d->values.empty() || d->values.size() != d->weights.size())
      throw std::domain_error("discrete law needs matching, non-empty values and weights");
    double sum = 0.0;
    for (double w : d->weights) {
      if (!(w >= 0.0)) throw std::domain_error("discrete weights must be nonnegative");
      sum += w;
    }
    if (!(sum > 0.0)) throw std::domain_error("discrete weights sum to zero");
    double acc = 0.0;
    for (double& w : d->weights) {
      w /= sum;
      acc += w;
      cumulative_.push_back(acc);
    }
    cumulative_.back() = 1.0;
  }
}

Reproduction Reproduction::constant(double xi) { return Reproduction(Constant{xi}); }

Reproduction Reproduction::discrete(std::vector<double> values, std::vector<double> weights) {
  return Reproduction(Discrete{std::move(values), std::move(weights)});
}

Reproduction Reproduction::uniform(double lo, double hi) {
  if (!(hi > lo)) throw std::domain_error("uniform law needs lo < hi");
  return Reproduction(Uniform{lo, hi});
}

double Reproduction::sample(Rng& rng) const {
  struct Visitor {
    const Reproduction& self;
    Rng& rng;
    double operator()(const Constant& c) const { return c.value; }
    double operator()(const Discrete& d) const {
      const double u = rng.uniform();
      auto it = std::lower_bound(self.cumulative_.begin(), self.cumulative_.end(), u);
      return d.values[static_cast<std::size_t>(it - self.cumulative_.begin())];
    }
    double operator()(const Uniform& un) const { return un.lo + (un.hi - un.lo) * rng.uniform(); }
  };
  return std::visit(Visitor{*this, rng}, law_);
}

double Reproduction::mean() const {
  struct Visitor {
    double operator()(const Constant& c) const { return c.value; }
    double operator()(const Discrete& d) const {
      return std::inner_product(d.values.begin(), d.values.end(), d.weights.begin(), 0.0);
    }
    double operator()(const Uniform& u) const { return 0.5 * (u.lo + u.hi); }
  };
  return std::visit(Visitor{}, law_);
}

double Reproduction::second_moment() const {
  struct Visitor {
    double operator()(const Constant& c) const { return c.value * c.value; }
    double operator()(const Discrete& d) const {
      double s = 0.0;
      for (std::size_t i = 0; i < d.values.size(); ++i) s += d.weights[i] * d.values[i] * d.values[i];
      return s;
    }
    double operator()(const Uniform& u) const { return (u.lo * u.lo + u.lo * u.hi + u.hi * u.hi) / 3.0; }
  };
  return std::visit(Visitor{}, law_);
}

double Reproduction::support_min() const {
  struct Visitor {
    double operator()(const Constant& c) const { return c.value; }
    double operator()(const Discrete& d) const {
      double lo = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < d.values.size(); ++i)
        if (d.weights[i] > 0.0) lo = std::min(lo, d.values[i]);
      return lo;
    }
    double operator()(const Uniform& u) const { return u.lo; }
  };
  return std::visit(Visitor{}, law_);
}

std::optional<double> Reproduction::constant_value() const {
  if (auto* c = std::get_if<Constant>(&law_)) return c->value;
  return std::nullopt;
}

std::string Reproduction::describe() const {
  struct Visitor {
    std::string operator()(const Constant& c) const { return fmt::format("constant({})", c.value); }
    std::string operator()(const Discrete& d) const {
      return fmt::format("discrete({} atoms)", d.values.size());
    }
    std::string operator()(const Uniform& u) const { return fmt::format("uniform({}, {})", u.lo, u.hi); }
  };
  return std::visit(Visitor{}, law_);
}

// ---------------------------------------------------------------------------
// BPConfig

namespace {

bool is_multiple(double value, double unit) {
  const double k = std::round(value / unit);
  return k >= 1.0 && std::abs(value - k * unit) <= 1e-12 * std::max(1.0, std::abs(value));
}

std::int64_t units_of(double value, double unit) { return std::llround(value / unit); }

}  // namespace

double BPConfig::m2() const {
  const double a = 1.0 + beta;
  return reproduction.second_moment() + 2.0 * a * reproduction.mean() + a * a;
}

void BPConfig::validate() const {
  if (!(beta > -1.0 + 1e-9)) throw std::domain_error("beta must exceed -1");
  if (!(retention_p >= 0.0 && retention_p <= 1.0)) throw std::domain_error("retention_p must lie in [0, 1]");
  if (!(z0 > 0.0)) throw std::domain_error("initial mass must be positive");
  // nu((0, 1 + beta]) = 0 means xi > 0 almost surely.
  if (!(reproduction.support_min() > 0.0)) throw std::domain_error("xi must be strictly positive");
  if (mass_unit) {
    auto xi = reproduction.constant_value();
    if (!xi) throw std::domain_error("exact mass mode needs a constant xi");
    if (!(*mass_unit > 0.0) || !is_multiple(*xi, *mass_unit) || !is_multiple(mutant_mass(), *mass_unit) ||
        !is_multiple(z0, *mass_unit))
      throw std::domain_error("xi, 1 + beta and z0 must be integer multiples of the mass unit");
  }
}

// ---------------------------------------------------------------------------
// Labels

std::string UlamLabel::str() const {
  return fmt::format("{}", fmt::join(path, "."));
}

UlamLabel UlamLabel::parse(const std::string& text) {
  UlamLabel out;
  if (text.empty()) return out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t dot = std::min(text.find('.', pos), text.size());
    const std::string part = text.substr(pos, dot - pos);
    if (part.empty() || part.find_first_not_of("0123456789") != std::string::npos)
      throw std::domain_error(fmt::format("malformed label '{}'", text));
    const unsigned long j = std::stoul(part);
    if (j == 0) throw std::domain_error(fmt::format("label '{}' has a zero component", text));
    out.path.push_back(static_cast<std::uint32_t>(j));
    pos = dot + 1;
  }
  return out;
}

UlamLabel BPTrajectory::label(TypeId id) const {
  UlamLabel out;
  out.path.resize(types.at(id).depth);
  for (TypeId cur = id; cur != kAncestor; cur = types[cur].parent) out.path[types[cur].depth - 1] = types[cur].ordinal;
  return out;
}

std::optional<TypeId> BPTrajectory::find(const UlamLabel& label) const {
  // Children of a type are created in ordinal order, so walking the path
  // needs a scan of the type list per step; trajectories are small enough.
  TypeId cur = kAncestor;
  for (std::uint32_t j : label.path) {
    if (j > types[cur].mutations) return std::nullopt;
    std::optional<TypeId> next;
    for (TypeId id = cur + 1; id < types.size(); ++id) {
      if (types[id].parent == cur && types[id].depth == types[cur].depth + 1 && types[id].ordinal == j) {
        next = id;
        break;
      }
    }
    if (!next) return std::nullopt;
    cur = *next;
  }
  return cur;
}

std::vector<TypeId> BPTrajectory::generation1() const {
  std::vector<TypeId> out;
  for (TypeId id = 1; id < types.size(); ++id)
    if (types[id].depth == 1) out.push_back(id);
  return out;
}

// ---------------------------------------------------------------------------
// Simulation

BranchingSystem::BranchingSystem(BPConfig config, Rng& rng, bool record_events)
    : rng_(rng), record_(record_events) {
  config.validate();
  traj_.config = std::move(config);
  const BPConfig& cfg = traj_.config;
  traj_.types.push_back(TypeRecord{});
  fenwick_.push_back(0.0);  // index 0 unused
  fenwick_.push_back(0.0);
  add_mass(kAncestor, cfg.z0);
  traj_.total = cfg.z0;
  total_before_last_ = cfg.z0;
  if (cfg.mass_unit) {
    const double unit = *cfg.mass_unit;
    clone_units_ = units_of(*cfg.reproduction.constant_value(), unit);
    mutant_units_ = units_of(cfg.mutant_mass(), unit);
    traj_.total_units = units_of(cfg.z0, unit);
    traj_.type_units.push_back(*traj_.total_units);
  }
}

void BranchingSystem::add_mass(TypeId id, double amount) {
  traj_.types[id].mass += amount;
  for (std::size_t i = id + 1; i < fenwick_.size(); i += i & (~i + 1)) fenwick_[i] += amount;
}

TypeId BranchingSystem::pick_host() {
  const std::size_t n = fenwick_.size() - 1;
  if (n == 1) return kAncestor;
  double target = rng_.uniform() * traj_.total;
  std::size_t pos = 0;
  std::size_t step = std::size_t{1} << (63 - __builtin_clzll(n));
  for (; step > 0; step >>= 1) {
    const std::size_t next = pos + step;
    if (next <= n && fenwick_[next] < target) {
      pos = next;
      target -= fenwick_[next];
    }
  }
  // Rounding in the partial sums can push the target past the last type.
  return static_cast<TypeId>(std::min(pos, n - 1));
}

bool BranchingSystem::step(double horizon) {
  const double next_time = traj_.time + rng_.exponential(traj_.total);
  if (next_time > horizon) {
    traj_.time = horizon;
    return false;
  }
  const BPConfig& cfg = traj_.config;
  traj_.time = next_time;
  const TypeId host = pick_host();
  const double xi = cfg.reproduction.sample(rng_);
  const bool clone = rng_.bernoulli(cfg.retention_p);
  total_before_last_ = traj_.total;

  std::optional<TypeId> mutant;
  const double clone_delta = clone ? xi + cfg.mutant_mass() : xi;
  add_mass(host, clone_delta);
  if (!clone) {
    TypeRecord& parent = traj_.types[host];
    const TypeRecord child{.parent = host,
                           .ordinal = ++parent.mutations,
                           .depth = parent.depth + 1,
                           .birth_time = next_time,
                           .mass = 0.0,
                           .mutations = 0};
    mutant = static_cast<TypeId>(traj_.types.size());
    traj_.types.push_back(child);
    // Append a Fenwick node covering (i - lowbit(i), i].
    const std::size_t i = fenwick_.size();
    const std::size_t low = i & (~i + 1);
    double covered = 0.0;
    for (std::size_t k = i - 1; k > i - low; k -= k & (~k + 1)) covered += fenwick_[k];
    fenwick_.push_back(covered);
    add_mass(*mutant, cfg.mutant_mass());
  }
  // Either way the system gains xi + 1 + beta.
  traj_.total += xi + cfg.mutant_mass();

  if (cfg.mass_unit) {
    *traj_.total_units += clone_units_ + mutant_units_;
    traj_.type_units[host] += clone ? clone_units_ + mutant_units_ : clone_units_;
    if (mutant) traj_.type_units.push_back(mutant_units_);
  }
  ++traj_.event_count;
  if (record_) traj_.events.push_back(BPEvent{next_time, host, clone_delta, mutant});
  return true;
}

BPTrajectory simulate_bp(const BPConfig& config, const StopRule& stop, Rng& rng, bool record_events) {
  if (!stop.time && !stop.total && !stop.events) throw std::domain_error("stop rule has no condition");
  BranchingSystem system(config, rng, record_events);
  const double horizon = stop.time.value_or(std::numeric_limits<double>::infinity());
  for (;;) {
    const auto& s = system.state();
    if (stop.total && s.total >= *stop.total) break;
    if (stop.events && s.event_count >= *stop.events) break;
    if (s.event_count >= stop.event_budget)
      throw BudgetExhausted(fmt::format("stop rule not met after {} events", s.event_count));
    if (!system.step(horizon)) break;
  }
  return std::move(system).release();
}

// ---------------------------------------------------------------------------
// Martingales

double MartingalePath::at(double t) const {
  if (times.empty() || t < times.front()) return 0.0;
  auto it = std::upper_bound(times.begin(), times.end(), t);
  const double z = masses[static_cast<std::size_t>(it - times.begin()) - 1];
  return std::exp(-rate * t) * z;
}

MartingalePath martingale_path(const BPTrajectory& traj, const PathSelector& which) {
  if (traj.event_count > 0 && traj.events.size() != traj.event_count)
    throw std::domain_error("martingale_path needs a trajectory recorded with events");
  const BPConfig& cfg = traj.config;
  MartingalePath path;
  path.end_time = traj.time;

  if (which.kind == PathSelector::Kind::kTotal) {
    path.rate = cfg.m1();
    double z = cfg.z0;
    path.times.push_back(0.0);
    path.masses.push_back(z);
    for (const auto& ev : traj.events) {
      z += ev.clone_delta + (ev.mutant ? cfg.mutant_mass() : 0.0);
      path.times.push_back(ev.time);
      path.masses.push_back(z);
    }
    return path;
  }

  TypeId id = kAncestor;
  if (which.kind == PathSelector::Kind::kLabel) {
    auto found = traj.find(which.label);
    if (!found) throw std::domain_error(fmt::format("label '{}' never populated", which.label.str()));
    id = *found;
  }
  path.rate = cfg.m1p();
  double z = id == kAncestor ? cfg.z0 : cfg.mutant_mass();
  path.times.push_back(traj.types[id].birth_time);
  path.masses.push_back(z);
  for (const auto& ev : traj.events) {
    if (ev.host != id) continue;
    z += ev.clone_delta;
    path.times.push_back(ev.time);
    path.masses.push_back(z);
  }
  return path;
}

std::vector<double> gen1_birth_times(const BPTrajectory& traj) {
  std::vector<double> out;
  for (TypeId id : traj.generation1()) out.push_back(traj.types[id].birth_time);
  return out;
}

void write_events_jsonl(std::ostream& out, const BPTrajectory& traj) {
  for (const auto& ev : traj.events) {
    nlohmann::ordered_json j;
    j["t"] = ev.time;
    j["label"] = traj.label(ev.host).str();
    j["clone_delta"] = ev.clone_delta;
    j["mutant"] = ev.mutant ? nlohmann::ordered_json(traj.label(*ev.mutant).str()) : nlohmann::ordered_json();
    out << j.dump() << '\n';
  }
}

double simulate_yule_mass(double start, double jump, double horizon, Rng& rng, double leap_above) {
  if (!(start > 0.0) || !(jump > 0.0)) throw std::domain_error("start mass and jump must be positive");
  double mass = start;
  double now = 0.0;
  while (mass < leap_above) {
    now += rng.exponential(mass);
    if (now > horizon) return mass;
    mass += jump;
  }
  // mass / jump behaves as a linear birth process with per-capita rate jump;
  // its increment over a window s is NegBin(mass / jump, exp(-jump s)),
  // sampled as a gamma-mixed Poisson.
  const double remaining = horizon - now;
  std::gamma_distribution<double> gamma(mass / jump, std::expm1(jump * remaining));
  const double intensity = gamma(rng.engine());
  std::poisson_distribution<std::int64_t> poisson(intensity);
  return mass + jump * static_cast<double>(poisson(rng.engine()));
}

// ---------------------------------------------------------------------------
// Deviation bound check

StatReport deviation_bound_check(const BPConfig& config, double t, std::uint64_t trials, Rng& rng,
                                 const DeviationOptions& options) {
  if (trials == 0) throw std::domain_error("deviation_bound_check needs at least one trial");
  if (config.retention_p != 1.0) throw std::domain_error("the deviation bound is stated for p = 1");
  if (!(t >= 0.0)) throw std::domain_error("t must be nonnegative");
  const double late = 0.9 * options.t_max;
  if (!(t < late)) throw std::domain_error("t_max must be well beyond t");
  config.validate();

  const double m1 = config.m1();
  const double bound = 10.0 * config.z0 * config.m2() / m1 * std::exp(-m1 * t);

  double sum = 0.0;
  double sum_sq = 0.0;
  double drift_sum = 0.0;
  for (std::uint64_t trial = 0; trial < trials; ++trial) {
    Rng trial_rng = rng.derive(trial + 1);
    BranchingSystem system(config, trial_rng);
    auto w_now = [&] { return std::exp(-m1 * system.state().time) * system.state().total; };
    while (system.step(t)) {
    }
    // W decreases between jumps, so its extremes on [t, t_max] sit at the
    // right and left limits of the jump times and at the end points.
    double highest = w_now();
    double lowest = highest;
    auto track = [&](double until) {
      while (system.step(until)) {
        const double decay = std::exp(-m1 * system.state().time);
        lowest = std::min(lowest, decay * system.total_before_last());
        highest = std::max(highest, decay * system.state().total);
      }
    };
    track(late);
    const double w_late = w_now();
    track(options.t_max);
    const double w_end = w_now();
    lowest = std::min(lowest, w_end);
    const double dev = std::max(highest - w_end, w_end - lowest);
    sum += dev * dev;
    sum_sq += dev * dev * dev * dev;
    drift_sum += std::abs(w_end - w_late) / w_end;
  }

  const double n = static_cast<double>(trials);
  const double mean = sum / n;
  const double var = trials > 1 ? std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0)) : 0.0;
  const double se = std::sqrt(var / n);
  const double drift = drift_sum / n;

  StatReport report;
  report.test = "deviation_bound";
  report.n_samples = trials;
  report.statistic = mean / bound;
  const double z = se > 0.0 ? (mean - bound) / se : (mean > bound ? INFINITY : -INFINITY);
  report.p_value = 0.5 * std::erfc(z / std::sqrt(2.0));
  report.params = {{"t", t}, {"t_max", options.t_max}, {"z0", config.z0}, {"m1", m1}, {"m2", config.m2()}};
  report.details = {{"estimate", mean}, {"stderr", se}, {"bound", bound}, {"mean_relative_drift", drift}};
  if (drift > options.drift_tolerance) {
    report.verdict = Verdict::kInconclusive;
    report.details["reason"] = "terminal value not stabilized; increase t_max";
  } else {
    report.verdict = z <= 3.0 ? Verdict::kPass : Verdict::kFail;
  }
  return report;
}

}  // namespace sfperc
