#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "sfperc/report.hpp"
#include "sfperc/rng.hpp"

namespace sfperc {

// Law of the clone excess xi > 0, where xi + 1 + beta has the reproduction
// law nu.
class Reproduction {
 public:
  struct Constant {
    double value;
  };
  struct Discrete {
    std::vector<double> values;
    std::vector<double> weights;
  };
  struct Uniform {
    double lo;
    double hi;
  };

  static Reproduction constant(double xi);
  static Reproduction discrete(std::vector<double> values, std::vector<double> weights);
  static Reproduction uniform(double lo, double hi);

  double sample(Rng& rng) const;
  double mean() const;
  double second_moment() const;
  double support_min() const;
  std::optional<double> constant_value() const;
  std::string describe() const;

 private:
  explicit Reproduction(std::variant<Constant, Discrete, Uniform> law);

  std::variant<Constant, Discrete, Uniform> law_;
  std::vector<double> cumulative_;  // Discrete only
};

struct BPConfig {
  double beta = 0.0;
  double retention_p = 1.0;  // mutations happen at rate 1 - p per unit mass
  Reproduction reproduction = Reproduction::constant(1.0);
  double z0 = 1.0;
  // When set, masses are also tracked as integer multiples of this unit;
  // requires constant xi and 1 + beta to be multiples of it.
  std::optional<double> mass_unit;

  void validate() const;

  double mutant_mass() const { return 1.0 + beta; }
  // First and second moments of nu = law of xi + 1 + beta.
  double m1() const { return reproduction.mean() + 1.0 + beta; }
  double m2() const;
  // Mean reproduction of a single type: E xi + p (1 + beta).
  double m1p() const { return reproduction.mean() + retention_p * (1.0 + beta); }
};

// Genetic type: the empty path is the ancestral type, u.j is the type created
// by the j-th mutation inside u.
struct UlamLabel {
  std::vector<std::uint32_t> path;

  std::string str() const;  // dot-joined, "" for the ancestor
  static UlamLabel parse(const std::string& text);
  std::size_t depth() const noexcept { return path.size(); }
  friend bool operator==(const UlamLabel&, const UlamLabel&) = default;
};

using TypeId = std::uint32_t;
inline constexpr TypeId kAncestor = 0;

struct TypeRecord {
  TypeId parent = kAncestor;
  std::uint32_t ordinal = 0;  // j in u.j
  std::uint32_t depth = 0;
  double birth_time = 0.0;
  double mass = 0.0;
  std::uint32_t mutations = 0;  // children created so far
};

struct BPEvent {
  double time;
  TypeId host;
  double clone_delta;  // mass added to the host
  std::optional<TypeId> mutant;
};

struct BPTrajectory {
  BPConfig config;
  std::vector<TypeRecord> types;  // types[0] is the ancestor
  std::vector<BPEvent> events;    // empty unless recording was requested
  double total = 0.0;
  double time = 0.0;
  std::uint64_t event_count = 0;
  std::optional<std::int64_t> total_units;  // exact mode only
  std::vector<std::int64_t> type_units;     // exact mode only

  UlamLabel label(TypeId id) const;
  std::optional<TypeId> find(const UlamLabel& label) const;
  // Populations in generation one, i.e. types with a single mutation.
  std::vector<TypeId> generation1() const;
};

class BudgetExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Stops at the first condition met. `time` stops exactly at that time; the
// other conditions stop right after the triggering event.
struct StopRule {
  std::optional<double> time;
  std::optional<double> total;
  std::optional<std::uint64_t> events;
  std::uint64_t event_budget = 2'000'000'000;

  static StopRule at_time(double t) {
    StopRule s;
    s.time = t;
    return s;
  }
  static StopRule at_total(double z) {
    StopRule s;
    s.total = z;
    return s;
  }
  static StopRule after_events(std::uint64_t k) {
    StopRule s;
    s.events = k;
    return s;
  }
};

// Event-driven simulation of the branching system with neutral mutations.
class BranchingSystem {
 public:
  BranchingSystem(BPConfig config, Rng& rng, bool record_events = false);

  // Applies the next event, unless it would happen after `horizon`, in which
  // case the clock is moved to the horizon and false is returned.
  bool step(double horizon = std::numeric_limits<double>::infinity());

  const BPTrajectory& state() const noexcept { return traj_; }
  BPTrajectory release() && { return std::move(traj_); }

  // Total mass right before the most recent event (equal to total if none).
  double total_before_last() const noexcept { return total_before_last_; }

 private:
  void add_mass(TypeId id, double amount);
  TypeId pick_host();

  BPTrajectory traj_;
  Rng& rng_;
  bool record_;
  std::vector<double> fenwick_;  // 1-based partial sums of type masses
  double total_before_last_ = 0.0;
  std::int64_t clone_units_ = 0;
  std::int64_t mutant_units_ = 0;
};

BPTrajectory simulate_bp(const BPConfig& config, const StopRule& stop, Rng& rng, bool record_events = true);

// W(t) = exp(-rate t) Z(t) for a piecewise-constant mass path Z.
struct MartingalePath {
  double rate = 0.0;
  std::vector<double> times;   // knot times, increasing
  std::vector<double> masses;  // Z on [times[i], times[i+1])
  double end_time = 0.0;

  double at(double t) const;
  double terminal() const { return at(end_time); }
};

struct PathSelector {
  enum class Kind { kTotal, kAncestral, kLabel } kind = Kind::kTotal;
  UlamLabel label;

  static PathSelector total() { return {}; }
  static PathSelector ancestral() { return {Kind::kAncestral, {}}; }
  static PathSelector of(UlamLabel label) { return {Kind::kLabel, std::move(label)}; }
};

// Discounts with m1 for the total and m1(p) for a single type. Needs a
// trajectory recorded with events.
MartingalePath martingale_path(const BPTrajectory& traj, const PathSelector& which);

// Birth times of the generation-one types in birth order.
std::vector<double> gen1_birth_times(const BPTrajectory& traj);

// One JSON object per line: {"t","label","clone_delta","mutant"}.
void write_events_jsonl(std::ostream& out, const BPTrajectory& traj);

// Terminal value of a pure-birth process with unit birth rate per unit mass
// and fixed jump size, started at `start` and observed at `horizon`. Runs
// event by event until the mass reaches `leap_above`, then finishes with the
// exact negative-binomial transition of the linear birth process.
double simulate_yule_mass(double start, double jump, double horizon, Rng& rng, double leap_above = 2e4);

struct DeviationOptions {
  double t_max = 6.0;          // horizon standing in for infinity
  double drift_tolerance = 0.01;  // allowed mean relative drift of W over the last 10% of the horizon
};

// Monte Carlo estimate of E sup_{s >= t} |W(s) - W(inf)|^2 against the bound
// 10 z (m2 / m1) exp(-m1 t). Requires retention_p = 1. Passes unless the
// estimate exceeds the bound by more than three standard errors.
StatReport deviation_bound_check(const BPConfig& config, double t, std::uint64_t trials, Rng& rng,
                                 const DeviationOptions& options = {});

}  // namespace sfperc
