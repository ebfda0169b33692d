#include "sfperc/experiment.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <system_error>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "sfperc/branching.hpp"
#include "sfperc/parallel.hpp"
#include "sfperc/percolation.hpp"
#include "sfperc/stats.hpp"
#include "sfperc/tree.hpp"

namespace sfperc {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr std::pair<Command, const char*> kCommandNames[] = {
    {Command::kGrow, "grow"},           {Command::kPercolate, "percolate"},
    {Command::kTheorem1, "theorem1"},   {Command::kBpLimits, "bp-limits"},
    {Command::kYuleCheck, "yule-check"}, {Command::kSpacings, "spacings"},
};

bool percolates(Command c) {
  return c == Command::kPercolate || c == Command::kTheorem1 || c == Command::kSpacings;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::system_error(errno, std::generic_category(), fmt::format("cannot write '{}'", path.string()));
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw std::system_error(errno, std::generic_category(), fmt::format("error writing '{}'", path.string()));
}

std::string csv_field(const Cell& cell) {
  struct Visitor {
    std::string operator()(std::monostate) const { return {}; }
    std::string operator()(std::int64_t v) const { return std::to_string(v); }
    std::string operator()(double v) const {
      if (std::isnan(v)) return {};
      return fmt::format("{:.17g}", v);
    }
    std::string operator()(const std::string& s) const {
      if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
      std::string quoted = "\"";
      for (char ch : s) {
        if (ch == '"') quoted += '"';
        quoted += ch;
      }
      return quoted + '"';
    }
  };
  return std::visit(Visitor{}, cell);
}

json json_value(const Cell& cell) {
  struct Visitor {
    json operator()(std::monostate) const { return nullptr; }
    json operator()(std::int64_t v) const { return v; }
    json operator()(double v) const { return std::isnan(v) ? json(nullptr) : json(v); }
    json operator()(const std::string& s) const { return s; }
  };
  return std::visit(Visitor{}, cell);
}

Cell opt(const std::optional<double>& v) { return v ? Cell{*v} : Cell{}; }
Cell count(std::uint64_t v) { return Cell{static_cast<std::int64_t>(v)}; }

// Caps concurrent trials so that roughly 12 bytes per vertex per trial in
// flight stay within half of physical memory.
unsigned effective_jobs(unsigned requested, std::uint64_t vertices_per_trial) {
  const long pages = sysconf(_SC_PHYS_PAGES);
  const long page_size = sysconf(_SC_PAGE_SIZE);
  if (pages <= 0 || page_size <= 0) return std::max(1u, requested);
  const double budget = 0.5 * static_cast<double>(pages) * static_cast<double>(page_size);
  const double per_trial = 12.0 * static_cast<double>(std::max<std::uint64_t>(vertices_per_trial, 1));
  const auto cap = static_cast<unsigned>(std::clamp(budget / per_trial, 1.0, 4096.0));
  return std::clamp(requested, 1u, cap);
}

std::uint64_t stream_id(std::size_t ladder_index, std::uint64_t trial) {
  return (static_cast<std::uint64_t>(ladder_index) << 32) | trial;
}

std::string file_stem(const ExperimentConfig& cfg) {
  std::string s = to_string(cfg.command);
  std::replace(s.begin(), s.end(), '-', '_');
  return s;
}

const char* extension(Format f) { return f == Format::kCsv ? ".csv" : ".jsonl"; }

StatReport tolerance_report(std::string test, double estimate, double theory, double tolerance,
                            std::uint64_t samples) {
  StatReport r;
  r.test = std::move(test);
  r.n_samples = samples;
  r.statistic = estimate;
  const double rel = std::abs(estimate - theory) / std::abs(theory);
  r.p_value = std::numeric_limits<double>::quiet_NaN();
  r.verdict = samples == 0 ? Verdict::kInconclusive : (rel <= tolerance ? Verdict::kPass : Verdict::kFail);
  r.details = {{"theory", theory}, {"relative_error", rel}, {"tolerance", tolerance}};
  return r;
}

// Verdict that the sequence of errors (ordered along a ladder) never grows.
StatReport trend_report(std::string test, const std::vector<double>& ladder, const std::vector<double>& errors,
                        bool increasing_ok = false) {
  StatReport r;
  r.test = std::move(test);
  r.n_samples = errors.size();
  bool ok = true;
  for (std::size_t i = 1; i < errors.size(); ++i)
    ok = ok && (increasing_ok ? errors[i] >= errors[i - 1] : errors[i] <= errors[i - 1]);
  r.verdict = errors.size() < 2 ? Verdict::kInconclusive : (ok ? Verdict::kPass : Verdict::kFail);
  r.statistic = errors.empty() ? 0.0 : errors.back();
  r.p_value = std::numeric_limits<double>::quiet_NaN();
  r.details = {{"ladder", ladder}, {"values", errors}};
  return r;
}

void mark_informational(StatReport& r) { r.details["informational"] = true; }

bool is_informational(const StatReport& r) {
  return r.details.contains("informational") && r.details["informational"].get<bool>();
}

// ---------------------------------------------------------------------------
// Commands

struct Context {
  const ExperimentConfig& cfg;
  RunResult& result;
  json config_echo;

  fs::path path(const std::string& name) const { return cfg.out_path / name; }
  void table(const std::string& name, const Table& t) {
    const fs::path p = path(name + extension(cfg.format));
    write_table(p, t, cfg.format);
    result.files.push_back(p);
  }
};

void run_grow(Context& ctx) {
  const auto& cfg = ctx.cfg;
  for (std::size_t li = 0; li < cfg.n.size(); ++li) {
    const std::uint32_t n = cfg.n[li];
    std::vector<Tree> trees(cfg.trials);
    for_each_trial(cfg.trials, effective_jobs(cfg.jobs, n), [&](std::uint64_t t) {
      Rng rng(cfg.seed, stream_id(li, t));
      trees[t] = grow_tree(GrowthParams{cfg.beta, n}, rng);
    });
    for (std::uint64_t t = 0; t < cfg.trials; ++t) {
      const fs::path p = ctx.path(fmt::format("tree_n{}_trial{}.txt", n, t));
      auto out = open_output(p);
      write_tree(out, trees[t]);
      finish(out, p);
      ctx.result.files.push_back(p);
    }
  }
}

struct PercolationTrial {
  TrialRow row;
  std::vector<RankedSize> top;
  std::vector<double> gen1_scaled;  // i = 1..3
  std::uint32_t nonroot = 0;
  std::uint32_t generation1 = 0;
};

PercolationTrial percolation_trial(const ExperimentConfig& cfg, std::size_t li, std::uint64_t t, bool timed,
                                   ClusterDecomposition* keep = nullptr) {
  const std::uint32_t n = cfg.n[li];
  const double p = p_of_n(cfg.c, n);
  Rng rng(cfg.seed, stream_id(li, t));
  Rng mark_rng = rng.derive(2);
  TimedTree grown;
  if (timed) {
    grown = grow_timed_tree(GrowthParams{cfg.beta, n}, rng);
  } else {
    grown.tree = grow_tree(GrowthParams{cfg.beta, n}, rng);
  }
  const EdgeMarks marks = percolate(grown.tree, p, mark_rng);
  ClusterDecomposition decomp = decompose(grown.tree, marks, cfg.beta);

  const double log_n = std::log(static_cast<double>(n));
  PercolationTrial out;
  out.row.trial = t;
  out.row.n = n;
  out.row.c0_over_n = static_cast<double>(decomp.clusters[0].size) / n;
  out.top = top_nonroot_clusters(decomp, cfg.k);
  for (const auto& s : out.top) out.row.top_scaled.push_back(s.size * log_n / n);
  out.row.delta = decomp.delta();
  if (timed) {
    const double early = std::log(log_n) / (2.0 + cfg.beta) + cfg.r;
    const std::uint32_t present = grown.size_at(early);
    out.row.delta_early = present >= 1 ? delta_up_to(decomp, present - 1) : 0;
  }
  for (int i = 1; i <= 3; ++i) {
    auto size = generation1_cluster_size(decomp, i);
    out.gen1_scaled.push_back(size ? *size * log_n / n : std::numeric_limits<double>::quiet_NaN());
  }
  out.nonroot = decomp.n_clusters_nonroot;
  out.generation1 = decomp.n_generation1;
  if (keep) *keep = std::move(decomp);
  return out;
}

std::vector<PercolationTrial> percolation_trials(const ExperimentConfig& cfg, std::size_t li, bool timed) {
  std::vector<PercolationTrial> out(cfg.trials);
  for_each_trial(cfg.trials, effective_jobs(cfg.jobs, cfg.n[li]),
                 [&](std::uint64_t t) { out[t] = percolation_trial(cfg, li, t, timed); });
  return out;
}

void run_percolate(Context& ctx) {
  const auto& cfg = ctx.cfg;
  Table summary{{"trial", "n", "p", "C0_over_n", "n_clusters_nonroot", "n_generation1", "delta"}, {}};
  for (std::size_t li = 0; li < cfg.n.size(); ++li) {
    const std::uint32_t n = cfg.n[li];
    const double p = p_of_n(cfg.c, n);
    std::vector<PercolationTrial> rows(cfg.trials);
    // Cluster files are written from the worker so decompositions never pile up.
    for_each_trial(cfg.trials, effective_jobs(cfg.jobs, n), [&](std::uint64_t t) {
      ClusterDecomposition decomp;
      rows[t] = percolation_trial(cfg, li, t, false, &decomp);
      const fs::path path = ctx.path(fmt::format("clusters_n{}_trial{}.csv", n, t));
      auto out = open_output(path);
      write_clusters_csv(out, decomp);
      finish(out, path);
    });
    for (std::uint64_t t = 0; t < cfg.trials; ++t) {
      ctx.result.files.push_back(ctx.path(fmt::format("clusters_n{}_trial{}.csv", n, t)));
      const auto& r = rows[t];
      summary.rows.push_back({count(t), count(n), p, r.row.c0_over_n, count(r.nonroot), count(r.generation1),
                              count(r.row.delta)});
    }
  }
  ctx.table("percolate_trials", summary);
}

// Shared by theorem1 and spacings: per-n trial batches plus the spacing check.
struct LadderRun {
  std::vector<std::vector<PercolationTrial>> per_n;
  std::vector<StatReport> spacing;
};

LadderRun run_ladder(Context& ctx, bool timed) {
  const auto& cfg = ctx.cfg;
  const LimitLaw law = limit_constants(cfg.beta, cfg.c);
  LadderRun out;
  for (std::size_t li = 0; li < cfg.n.size(); ++li) {
    out.per_n.push_back(percolation_trials(cfg, li, timed));
    std::vector<std::vector<double>> scaled;
    for (const auto& tr : out.per_n.back()) scaled.push_back(tr.row.top_scaled);
    StatReport rep = poisson_spacing_check(scaled, law, cfg.spacing_k, cfg.level);
    rep.params["n"] = cfg.n[li];
    if (li + 1 < cfg.n.size()) mark_informational(rep);
    out.spacing.push_back(std::move(rep));
  }
  return out;
}

Summary summarize(const ExperimentConfig& cfg, const LadderRun& ladder) {
  Summary s;
  s.k = cfg.k;
  for (const auto& batch : ladder.per_n)
    for (const auto& tr : batch) s.trials.push_back(tr.row);
  s.aggregate = aggregate_trials(s.trials, cfg.beta, cfg.c, cfg.r);
  return s;
}

const AggregateRow* find_row(const std::vector<AggregateRow>& rows, std::uint32_t n, const std::string& q) {
  for (const auto& r : rows)
    if (r.n == n && r.quantity == q) return &r;
  return nullptr;
}

void run_theorem1(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const LimitLaw law = limit_constants(cfg.beta, cfg.c);
  LadderRun ladder = run_ladder(ctx, true);
  Summary summary = summarize(cfg, ladder);
  for (auto& f : emit_summary(summary, cfg.out_path, "theorem1", cfg.format)) ctx.result.files.push_back(f);

  std::vector<double> ladder_n(cfg.n.begin(), cfg.n.end());
  std::vector<double> giant_errors;
  for (std::size_t li = 0; li < cfg.n.size(); ++li) {
    const std::uint32_t n = cfg.n[li];
    const AggregateRow* giant = find_row(summary.aggregate, n, "C0_over_n");
    StatReport rep = tolerance_report("giant_fraction", giant->mean, law.giant_fraction, cfg.tolerance, cfg.trials);
    rep.params = {{"n", n}, {"beta", cfg.beta}, {"c", cfg.c}};
    giant_errors.push_back(giant->relative_error);
    if (li + 1 < cfg.n.size()) mark_informational(rep);
    ctx.result.reports.push_back(std::move(rep));
    ctx.result.reports.push_back(ladder.spacing[li]);

    std::vector<std::vector<RankedSize>> tops;
    std::vector<double> gen1;
    for (const auto& tr : ladder.per_n[li]) {
      tops.push_back(tr.top);
      if (!std::isnan(tr.gen1_scaled[0])) gen1.push_back(tr.gen1_scaled[0]);
    }
    StatReport order;
    order.test = "age_vs_size_ordering";
    order.n_samples = cfg.trials;
    order.params = {{"n", n}, {"k", 2}, {"l", 10}};
    order.statistic = cfg.k >= 2 ? age_vs_size_ordering(std::span<const std::vector<RankedSize>>(tops), 2, 10)
                                 : std::numeric_limits<double>::quiet_NaN();
    order.p_value = std::numeric_limits<double>::quiet_NaN();
    order.verdict = Verdict::kPass;
    mark_informational(order);
    ctx.result.reports.push_back(std::move(order));

    StatReport age = cluster_age_check(gen1, law, 1, cfg.level);
    age.params["n"] = n;
    mark_informational(age);
    ctx.result.reports.push_back(std::move(age));
  }
  if (cfg.n.size() > 1) {
    StatReport trend = trend_report("giant_fraction_trend", ladder_n, giant_errors);
    ctx.result.reports.push_back(std::move(trend));
  }
}

void run_spacings(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const LimitLaw law = limit_constants(cfg.beta, cfg.c);
  LadderRun ladder = run_ladder(ctx, false);
  Summary summary = summarize(cfg, ladder);
  for (auto& f : emit_summary(summary, cfg.out_path, "spacings", cfg.format)) ctx.result.files.push_back(f);
  std::vector<double> ladder_n(cfg.n.begin(), cfg.n.end());
  std::vector<double> errors;
  for (std::size_t li = 0; li < cfg.n.size(); ++li) {
    const AggregateRow* row = find_row(summary.aggregate, cfg.n[li], "inverse_x1");
    errors.push_back(row ? row->relative_error : std::numeric_limits<double>::quiet_NaN());
    ctx.result.reports.push_back(ladder.spacing[li]);
  }
  (void)law;
  if (cfg.n.size() > 1) ctx.result.reports.push_back(trend_report("inverse_x1_trend", ladder_n, errors));
}

void run_yule_check(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const double jump = 2.0 + cfg.beta;
  Table trials{{"trial", "n", "t", "size_at_t", "Y_t", "W_prime"}, {}};
  Table aggregate{{"n", "quantity", "mean", "stderr", "theory", "relative_error"}, {}};

  for (std::size_t li = 0; li < cfg.n.size(); ++li) {
    const std::uint32_t n = cfg.n[li];
    const double t = std::log(static_cast<double>(n)) / jump;
    const auto max_vertices = static_cast<std::uint32_t>(std::min<std::uint64_t>(64ull * n + 16, 0x7fffffffu));
    std::vector<double> y_at(cfg.trials);
    std::vector<std::uint32_t> sizes(cfg.trials);
    std::vector<double> w_prime(cfg.trials);
    std::vector<std::vector<double>> holding(cfg.trials);
    std::vector<std::uint8_t> jumps_ok(cfg.trials, 1);
    for_each_trial(cfg.trials, effective_jobs(cfg.jobs, 2ull * n), [&](std::uint64_t trial) {
      Rng rng(cfg.seed, stream_id(li, trial));
      Rng yule_rng = rng.derive(3);
      const TimedTree tt = grow_timed_tree_until(cfg.beta, t, max_vertices, rng);
      const std::uint32_t size = tt.tree.vertices();
      sizes[trial] = size;
      y_at[trial] = yule_value(size, cfg.beta);
      for (std::uint32_t s = 3; s <= size; ++s) {
        const double step = yule_value(s, cfg.beta) - yule_value(s - 1, cfg.beta);
        if (std::abs(step - jump) > 1e-12 * yule_value(s, cfg.beta)) jumps_ok[trial] = 0;
      }
      // Holding time in state Y is Exp(Y): rescaled gaps are standard exponential.
      for (std::uint32_t s = 2; s < std::min<std::uint32_t>(size, 7); ++s)
        holding[trial].push_back((tt.birth_time[s] - tt.birth_time[s - 1]) * yule_value(s, cfg.beta));
      w_prime[trial] = std::exp(-jump * cfg.horizon) * simulate_yule_mass(1.0 + cfg.beta, jump, cfg.horizon, yule_rng);
    });

    for (std::uint64_t trial = 0; trial < cfg.trials; ++trial)
      trials.rows.push_back({count(trial), count(n), t, count(sizes[trial]), y_at[trial], w_prime[trial]});
    const MeanEstimate y = mean_estimate(y_at);
    const double theory = 2.0 * (1.0 + cfg.beta) * std::exp(jump * t);
    aggregate.rows.push_back({count(n), std::string("Y_t"), y.mean,
                              cfg.trials > 1 ? Cell{y.std_error} : Cell{}, theory,
                              std::abs(y.mean - theory) / theory});

    StatReport jumps;
    jumps.test = "yule_jump_sizes";
    jumps.n_samples = cfg.trials;
    const auto bad = static_cast<std::uint64_t>(std::count(jumps_ok.begin(), jumps_ok.end(), 0));
    jumps.statistic = static_cast<double>(bad);
    jumps.p_value = std::numeric_limits<double>::quiet_NaN();
    jumps.verdict = bad == 0 ? Verdict::kPass : Verdict::kFail;
    jumps.params = {{"n", n}, {"jump", jump}};
    ctx.result.reports.push_back(std::move(jumps));

    StatReport mean = tolerance_report("yule_mean", y.mean, theory, cfg.tolerance, cfg.trials);
    mean.params = {{"n", n}, {"t", t}, {"beta", cfg.beta}};
    ctx.result.reports.push_back(std::move(mean));

    std::vector<double> gaps;
    for (const auto& h : holding) gaps.insert(gaps.end(), h.begin(), h.end());
    StatReport hold = ks_test(gaps, ExponentialRef{1.0}, cfg.level);
    hold.test = "yule_holding_times";
    hold.params["n"] = n;
    ctx.result.reports.push_back(std::move(hold));

    StatReport gamma = ks_test(w_prime, GammaRef{(1.0 + cfg.beta) / jump, jump}, cfg.level);
    gamma.test = "yule_gamma_limit";
    gamma.params["horizon"] = cfg.horizon;
    gamma.params["beta"] = cfg.beta;
    if (li > 0) mark_informational(gamma);  // same law for every n
    ctx.result.reports.push_back(std::move(gamma));
  }
  ctx.table("yule_check_trials", trials);
  ctx.table("yule_check_aggregate", aggregate);
}

void run_bp_limits(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const double alpha = (1.0 + cfg.beta) / (2.0 + cfg.beta);
  Table trials{{"trial", "p", "W_hat", "b1", "b2", "b3", "s1", "s2", "s3", "x1", "x2", "x3"}, {}};
  std::vector<double> ks_distances;

  for (std::size_t li = 0; li < cfg.p.size(); ++li) {
    const double p = cfg.p[li];
    BPConfig bp;
    bp.beta = cfg.beta;
    bp.retention_p = p;
    bp.reproduction = Reproduction::constant(1.0);
    bp.z0 = 2.0 + 2.0 * cfg.beta;
    const double m1 = bp.m1();
    const double m1p = bp.m1p();
    const double stop_total = std::max(1e5, 200.0 / (1.0 - p));

    struct Row {
      double w_hat;
      std::vector<double> b, s, x;
    };
    std::vector<Row> rows(cfg.trials);
    for_each_trial(cfg.trials, cfg.jobs, [&](std::uint64_t trial) {
      Rng rng(cfg.seed, stream_id(li, trial));
      const BPTrajectory traj = simulate_bp(bp, StopRule::at_total(stop_total), rng, false);
      Row row;
      row.w_hat = std::exp(-m1 * traj.time) * traj.total;
      const auto gen1 = traj.generation1();
      for (std::size_t i = 0; i < std::min<std::size_t>(3, gen1.size()); ++i) {
        const TypeRecord& ty = traj.types[gen1[i]];
        row.b.push_back(ty.birth_time);
        row.s.push_back((1.0 - p) / m1 * row.w_hat * std::exp(m1p * ty.birth_time));
        row.x.push_back(std::exp(-m1p * traj.time) * ty.mass / ((1.0 - p) * row.w_hat));
      }
      rows[trial] = std::move(row);
    });

    std::vector<std::vector<double>> s_samples(3), x_samples(3);
    for (std::uint64_t trial = 0; trial < cfg.trials; ++trial) {
      const Row& row = rows[trial];
      std::vector<Cell> cells{count(trial), p, row.w_hat};
      for (const auto* v : {&row.b, &row.s, &row.x})
        for (std::size_t i = 0; i < 3; ++i) cells.push_back(i < v->size() ? Cell{(*v)[i]} : Cell{});
      trials.rows.push_back(std::move(cells));
      for (std::size_t i = 0; i < row.s.size(); ++i) {
        s_samples[i].push_back(row.s[i]);
        x_samples[i].push_back(row.x[i]);
      }
    }

    for (int i = 1; i <= 3; ++i) {
      StatReport rep = ks_test(s_samples[i - 1], GammaRef{static_cast<double>(i), 1.0}, cfg.level);
      rep.test = "birth_time_scaling";
      rep.params["p"] = p;
      rep.params["i"] = i;
      if (i == 1) ks_distances.push_back(rep.statistic);
      if (i > 1 || li + 1 < cfg.p.size()) mark_informational(rep);
      ctx.result.reports.push_back(std::move(rep));

      StatReport joint = ks_test_cdf(
          x_samples[i - 1], [&](double x) { return gamma_ratio_cdf(alpha, i, x); },
          fmt::format("Gamma({:.6g}) / Gamma({})", alpha, i), cfg.level);
      joint.test = "joint_scaling_marginal";
      joint.params["p"] = p;
      joint.params["i"] = i;
      mark_informational(joint);
      ctx.result.reports.push_back(std::move(joint));
    }
  }
  if (cfg.p.size() > 1) {
    std::vector<double> ladder(cfg.p.begin(), cfg.p.end());
    ctx.result.reports.push_back(trend_report("birth_time_scaling_trend", ladder, ks_distances));
  }
  ctx.table("bp_limits_trials", trials);
}

}  // namespace

// ---------------------------------------------------------------------------

const char* to_string(Command c) {
  for (const auto& [cmd, name] : kCommandNames)
    if (cmd == c) return name;
  return "?";
}

std::optional<Command> parse_command(const std::string& name) {
  for (const auto& [cmd, text] : kCommandNames)
    if (name == text) return cmd;
  return std::nullopt;
}

void ExperimentConfig::validate() const {
  if (trials < 1) throw UsageError("--trials must be at least 1");
  if (!(beta > -1.0 + 1e-9)) throw UsageError("--beta must exceed -1");
  if (n.empty()) throw UsageError("--n is required");
  for (std::size_t i = 0; i < n.size(); ++i) {
    if (n[i] < 1 || n[i] > 0x7ffffffeu) throw UsageError("--n must lie in [1, 2^31 - 2]");
    if (i > 0 && n[i] <= n[i - 1]) throw UsageError("--n ladder must be strictly increasing");
  }
  if (k < 1) throw UsageError("--k must be at least 1");
  if (spacing_k < 1 || spacing_k > k) throw UsageError("--spacing-k must lie in [1, k]");
  if (!(level > 0.0 && level < 1.0)) throw UsageError("--level must lie in (0, 1)");
  if (!(tolerance > 0.0)) throw UsageError("--tolerance must be positive");
  if (percolates(command)) {
    if (!(c > 0.0)) throw UsageError("--c must be positive");
    const double smallest = std::log(static_cast<double>(n.front()));
    if (!(smallest > c))
      throw UsageError(fmt::format("ln n = {:.4f} must exceed c = {} for every n in the ladder", smallest, c));
  }
  if (command == Command::kYuleCheck && n.front() < 2) throw UsageError("yule-check needs n >= 2");
  if (command == Command::kBpLimits) {
    if (p.empty()) throw UsageError("--p is required for bp-limits");
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!(p[i] > 0.0 && p[i] < 1.0)) throw UsageError("--p values must lie in (0, 1)");
      if (i > 0 && p[i] <= p[i - 1]) throw UsageError("--p ladder must be strictly increasing");
    }
  }
  if (!(horizon > 0.0)) throw UsageError("--horizon must be positive");
}

json ExperimentConfig::to_json() const {
  json j;
  j["command"] = to_string(command);
  j["beta"] = beta;
  j["c"] = c;
  j["n"] = n;
  j["trials"] = trials;
  j["seed"] = seed;
  j["k"] = k;
  j["spacing_k"] = spacing_k;
  j["level"] = level;
  j["tolerance"] = tolerance;
  j["r"] = r;
  j["horizon"] = horizon;
  j["p"] = p;
  j["format"] = format == Format::kCsv ? "csv" : "json";
  return j;
}

void write_table(const fs::path& path, const Table& table, Format format) {
  auto out = open_output(path);
  if (format == Format::kCsv) {
    for (std::size_t i = 0; i < table.columns.size(); ++i)
      out << (i ? "," : "") << csv_field(Cell{table.columns[i]});
    out << "\r\n";
    for (const auto& row : table.rows) {
      for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << csv_field(row[i]);
      out << "\r\n";
    }
  } else {
    for (const auto& row : table.rows) {
      json obj;
      for (std::size_t i = 0; i < table.columns.size(); ++i)
        obj[table.columns[i]] = i < row.size() ? json_value(row[i]) : json(nullptr);
      out << obj.dump() << '\n';
    }
  }
  finish(out, path);
}

double expected_delta(double beta, double p, double t) {
  const double m1 = 2.0 + beta;
  const double m1p = m1 - (1.0 - p) * (1.0 + beta);
  // The first edge is already cut with probability 1 - p at time 0.
  const double root_start = 2.0 * (1.0 + beta) - (1.0 - p) * (1.0 + beta);
  return (1.0 - p) * (2.0 * (1.0 + beta) * std::expm1(m1 * t) / m1 - root_start * std::expm1(m1p * t) / m1p);
}

std::vector<AggregateRow> aggregate_trials(const std::vector<TrialRow>& trials, double beta, double c, double r) {
  std::map<std::uint32_t, std::vector<const TrialRow*>> by_n;
  for (const auto& t : trials) by_n[t.n].push_back(&t);
  const LimitLaw law = limit_constants(beta, c);
  std::vector<AggregateRow> out;
  for (const auto& [n, rows] : by_n) {
    const double log_n = std::log(static_cast<double>(n));
    auto add = [&, n = n](std::string quantity, const std::vector<double>& values, double theory) {
      AggregateRow row;
      row.n = n;
      row.quantity = std::move(quantity);
      const MeanEstimate est = mean_estimate(values);
      row.mean = est.mean;
      if (values.size() > 1) row.std_error = est.std_error;
      row.theory = theory;
      row.relative_error = std::abs(est.mean - theory) / std::abs(theory);
      out.push_back(std::move(row));
    };
    std::vector<double> giant, inverse_x1, early;
    for (const TrialRow* t : rows) {
      giant.push_back(t->c0_over_n);
      if (!t->top_scaled.empty()) inverse_x1.push_back(1.0 / t->top_scaled[0]);
      early.push_back(t->delta_early);
    }
    add("C0_over_n", giant, law.giant_fraction);
    add("inverse_x1", inverse_x1, 1.0 / law.intensity_const);
    const double p = n >= 2 && log_n > c ? p_of_n(c, n) : std::numeric_limits<double>::quiet_NaN();
    add("delta_early", early, expected_delta(beta, p, std::log(log_n) / (2.0 + beta) + r));
  }
  return out;
}

std::vector<fs::path> emit_summary(const Summary& summary, const fs::path& dir, const std::string& stem,
                                   Format format) {
  Table trials{{"trial", "n", "C0_over_n", "delta", "delta_early"}, {}};
  for (std::size_t i = 1; i <= summary.k; ++i) trials.columns.push_back(fmt::format("x{}", i));
  for (const auto& t : summary.trials) {
    std::vector<Cell> row{count(t.trial), count(t.n), t.c0_over_n, count(t.delta), count(t.delta_early)};
    for (std::size_t i = 0; i < summary.k; ++i) row.push_back(i < t.top_scaled.size() ? Cell{t.top_scaled[i]} : Cell{});
    trials.rows.push_back(std::move(row));
  }
  Table aggregate{{"n", "quantity", "mean", "stderr", "theory", "relative_error"}, {}};
  for (const auto& a : summary.aggregate)
    aggregate.rows.push_back({count(a.n), a.quantity, a.mean, opt(a.std_error), a.theory, a.relative_error});

  const fs::path trials_path = dir / (stem + "_trials" + extension(format));
  const fs::path aggregate_path = dir / (stem + "_aggregate" + extension(format));
  write_table(trials_path, trials, format);
  write_table(aggregate_path, aggregate, format);
  return {trials_path, aggregate_path};
}

RunResult run(const ExperimentConfig& config) {
  config.validate();
  RunResult result;
  std::error_code ec;
  fs::create_directories(config.out_path, ec);
  if (ec) throw std::system_error(ec, fmt::format("cannot create '{}'", config.out_path.string()));

  Context ctx{config, result, config.to_json()};
  {
    const fs::path p = ctx.path("config.json");
    auto out = open_output(p);
    out << ctx.config_echo.dump(2) << '\n';
    finish(out, p);
    result.files.push_back(p);
  }

  switch (config.command) {
    case Command::kGrow: run_grow(ctx); break;
    case Command::kPercolate: run_percolate(ctx); break;
    case Command::kTheorem1: run_theorem1(ctx); break;
    case Command::kSpacings: run_spacings(ctx); break;
    case Command::kYuleCheck: run_yule_check(ctx); break;
    case Command::kBpLimits: run_bp_limits(ctx); break;
  }

  Verdict overall = Verdict::kPass;
  for (const auto& r : result.reports)
    if (!is_informational(r)) overall = combine(overall, r.verdict);

  if (!result.reports.empty()) {
    const fs::path p = ctx.path(file_stem(config) + "_reports.jsonl");
    auto out = open_output(p);
    out << json{{"config", ctx.config_echo}}.dump() << '\n';
    for (const auto& r : result.reports) out << r.to_json().dump() << '\n';
    finish(out, p);
    result.files.push_back(p);
  }
  result.exit_status = overall == Verdict::kPass ? kExitPass
                       : overall == Verdict::kFail ? kExitFail
                                                   : kExitInconclusive;
  return result;
}

}  // namespace sfperc
