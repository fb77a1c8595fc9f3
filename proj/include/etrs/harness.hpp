#pragma once

// Randomized experiments: instance batches, cutting loops, a multi-start local solver for
// upper bounds, per-instance classification, and the per-dimension summary table.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "etrs/cuts.hpp"
#include "etrs/io.hpp"

namespace etrs {

struct LocalMinSettings {
  int n_starts = 100;
  std::uint64_t seed = 0;
  int rejections_per_start = 200;
};

struct LocalMinResult {
  Vec x;
  double value = std::numeric_limits<double>::infinity();
  int starts = 0;
};

namespace detail {

// Log-barrier for the constraints of the instance, each written as c_i(x) > 0.
class BarrierProblem {
 public:
  explicit BarrierProblem(const EtrsInstance& inst) : inst_(inst) {}

  bool strictly_feasible(const Vec& x) const {
    for (const auto& c : constraints(x)) {
      if (!(c.value > 0.0)) return false;
    }
    return true;
  }

  double value(const Vec& x, double mu) const {
    double v = objective(inst_, x);
    for (const auto& c : constraints(x)) {
      if (!(c.value > 0.0)) return std::numeric_limits<double>::infinity();
      v -= mu * std::log(c.value);
    }
    return v;
  }

  void derivatives(const Vec& x, double mu, Vec& grad, Mat& hess) const {
    grad = 2.0 * (inst_.H * x + inst_.g);
    hess = 2.0 * inst_.H;
    for (const auto& c : constraints(x)) {
      grad -= mu * c.grad / c.value;
      hess -= mu * (c.hess / c.value - c.grad * c.grad.transpose() / (c.value * c.value));
    }
  }

 private:
  struct Term {
    double value;
    Vec grad;
    Mat hess;
  };

  std::vector<Term> constraints(const Vec& x) const {
    const int n = inst_.n;
    const Mat I = Mat::Identity(n, n);
    std::vector<Term> out;
    out.push_back({inst_.nu * inst_.nu - x.squaredNorm(), -2.0 * x, -2.0 * I});
    if (inst_.gamma > 0.0) out.push_back({x.squaredNorm() - inst_.gamma * inst_.gamma, 2.0 * x, 2.0 * I});
    // The SOC slack b'x - alpha - |x - c| is concave, so its log-barrier is convex.
    const Vec r = x - inst_.c;
    const double nr = std::max(r.norm(), 1e-300);
    const Vec u = r / nr;
    out.push_back({inst_.b.dot(x) - inst_.alpha - nr, inst_.b - u, -(I - u * u.transpose()) / nr});
    return out;
  }

  const EtrsInstance& inst_;
};

// Newton's method on the barrier function for a decreasing sequence of weights. Negative
// curvature is handled by flipping the Hessian's negative eigenvalues.
inline Vec barrier_descent(const BarrierProblem& prob, const EtrsInstance& inst, Vec x,
                           double mu_scale = 1e-1) {
  Vec grad;
  Mat hess;
  const double mu0 = mu_scale * (1.0 + std::abs(objective(inst, x)));
  for (double mu = mu0; mu >= 1e-14; mu *= 0.1) {
    for (int it = 0; it < 100; ++it) {
      prob.derivatives(x, mu, grad, hess);
      Eigen::SelfAdjointEigenSolver<Mat> es(hess);
      const double floor = 1e-10 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
      const Vec ev = es.eigenvalues().cwiseAbs().cwiseMax(floor);
      const Vec dx = -es.eigenvectors() * (es.eigenvectors().transpose() * grad).cwiseQuotient(ev);
      const double slope = grad.dot(dx);
      if (-slope < 1e-18) break;
      const double f0 = prob.value(x, mu);
      double t = 1.0;
      bool moved = false;
      while (t > 1e-16) {
        const Vec trial = x + t * dx;
        if (prob.value(trial, mu) <= f0 + 1e-4 * t * slope) {
          x = trial;
          moved = true;
          break;
        }
        t *= 0.5;
      }
      if (!moved) break;
    }
  }
  return x;
}

}  // namespace detail

/// Multi-start local minimization. Starts are x-hat plus points drawn the way x-hat is
/// drawn (uniform radius in [gamma, nu], uniform direction) and kept when strictly feasible.
/// Each `hint` (e.g. a relaxation solution) adds one more start, pulled toward x-hat until
/// strictly feasible. The returned value is an upper bound on the global minimum.
inline LocalMinResult local_min(const EtrsInstance& inst, const LocalMinSettings& settings = {},
                                const std::vector<Vec>& hints = {}) {
  const detail::BarrierProblem prob(inst);
  std::mt19937_64 rng(settings.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  std::vector<Vec> starts;
  if (inst.interior_point && prob.strictly_feasible(*inst.interior_point)) {
    starts.push_back(*inst.interior_point);
    for (const Vec& h : hints) {
      require_size(h.size(), inst.n, "local_min hint");
      for (double t = 1.0; t > 1e-3; t *= 0.9) {
        const Vec x = *inst.interior_point + t * (h - *inst.interior_point);
        if (prob.strictly_feasible(x)) {
          starts.push_back(x);
          break;
        }
      }
    }
  }
  const long budget = static_cast<long>(settings.rejections_per_start) * settings.n_starts;
  for (long k = 0; k < budget && static_cast<int>(starts.size()) < settings.n_starts; ++k) {
    const double radius = inst.gamma + unif(rng) * (inst.nu - inst.gamma);
    Vec x = radius * detail::unit_direction(rng, inst.n);
    if (prob.strictly_feasible(x)) starts.push_back(std::move(x));
  }
  if (starts.empty()) throw std::runtime_error("local_min: no feasible starting point found");

  LocalMinResult best;
  for (const Vec& x0 : starts) {
    const Vec x = detail::barrier_descent(prob, inst, x0);
    for (const Vec* cand : {&x, &x0}) {
      const double v = objective(inst, *cand);
      if (v < best.value) {
        best.value = v;
        best.x = *cand;
      }
    }
  }
  best.starts = static_cast<int>(starts.size());
  return best;
}

enum class Bootstrap { Shor, ShorKsoc };

inline const char* to_string(Bootstrap b) { return b == Bootstrap::Shor ? "shor" : "ksoc"; }

inline Bootstrap parse_bootstrap(const std::string& s) {
  if (s == "shor") return Bootstrap::Shor;
  if (s == "ksoc" || s == "shor_ksoc") return Bootstrap::ShorKsoc;
  throw std::invalid_argument("unknown relaxation '" + s + "' (expected shor or ksoc)");
}

inline RelaxationSpec bootstrap_spec(Bootstrap b) {
  return b == Bootstrap::Shor ? RelaxationSpec::shor() : RelaxationSpec::shor_ksoc();
}

enum class Category { ExactInitial, Improved, Closed, NoImprovement };

inline const char* to_string(Category c) {
  switch (c) {
    case Category::ExactInitial: return "exact_initial";
    case Category::Improved: return "improved";
    case Category::Closed: return "closed";
    case Category::NoImprovement: return "no_improvement";
  }
  return "unknown";
}

inline Category parse_category(const std::string& s) {
  for (Category c : {Category::ExactInitial, Category::Improved, Category::Closed,
                     Category::NoImprovement}) {
    if (s == to_string(c)) return c;
  }
  throw std::invalid_argument("unknown category '" + s + "'");
}

/// Bound increase that counts as an improvement.
inline constexpr double kImprovementTol = 1e-7;

inline Category classify(const LoopResult& r) {
  if (r.initial_rank1) return Category::ExactInitial;
  if (r.cuts_added() >= 1 && r.final_rank1) return Category::Closed;
  if (r.cuts_added() >= 1 && r.v_final - r.v_initial > kImprovementTol) return Category::Improved;
  return Category::NoImprovement;
}

/// x read off the leading eigenvector of a (numerically) rank-1 Y.
inline Vec extract_rank1(const Mat& y) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(y));
  const Vec v = es.eigenvectors().col(y.rows() - 1);
  if (std::abs(v(0)) < 1e-12) throw std::runtime_error("rank-1 extraction: zero leading entry");
  return v.tail(y.rows() - 1) / v(0);
}

struct ExperimentRecord {
  int id = 0;
  std::uint64_t seed = 0;
  int n = 0;
  VariantKind variant = VariantKind::General;
  Bootstrap bootstrap = Bootstrap::Shor;
  Category category = Category::NoImprovement;
  int cuts_added = 0;
  double v_relax_initial = 0.0;
  double v_relax_final = 0.0;
  double v_local = 0.0;
  std::optional<double> gap_closure_pct;
  /// Objective at the point read off a Closed record's final Y.
  std::optional<double> v_extracted;
  /// Set when the numbers contradict the bound ordering (e.g. gap closure above 100%).
  bool flagged = false;
  std::string stop;
  /// Nonempty when the instance could not be processed; such records are left out of tables.
  std::string failure;

  bool failed() const { return !failure.empty(); }
};

struct ExperimentConfig {
  VariantKind variant = VariantKind::General;
  std::vector<int> n_list{2, 3, 4, 5};
  int count = 200;
  Bootstrap bootstrap = Bootstrap::ShorKsoc;
  std::uint64_t seed = 1;
  int threads = 0;  // 0 picks the hardware concurrency
  LoopSettings loop;
  LocalMinSettings local;
};

/// Seed of instance i in dimension n, from a splitmix64 mix of the master seed.
inline std::uint64_t instance_seed(std::uint64_t master, int n, int i) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(master) ^ static_cast<std::uint64_t>(n)) ^ static_cast<std::uint64_t>(i));
}

inline ExperimentRecord run_instance(const EtrsInstance& inst, int id, Bootstrap bootstrap,
                                     const LoopSettings& loop, const LocalMinSettings& local) {
  ExperimentRecord rec;
  rec.id = id;
  rec.seed = inst.seed.value_or(0);
  rec.n = inst.n;
  rec.variant = inst.variant.kind;
  rec.bootstrap = bootstrap;
  try {
    const LoopResult r = cutting_loop(inst, bootstrap_spec(bootstrap), loop);
    LocalMinSettings ls = local;
    ls.seed = rec.seed ^ 0x5bd1e995ULL;
    const LocalMinResult lm = local_min(inst, ls, {r.initial_point.x, r.final_point.x});
    rec.category = classify(r);
    rec.cuts_added = r.cuts_added();
    rec.v_relax_initial = r.v_initial;
    rec.v_relax_final = r.v_final;
    rec.v_local = lm.value;
    rec.stop = to_string(r.stop);
    if (rec.category == Category::Improved) {
      const double gap = rec.v_local - rec.v_relax_initial;
      rec.gap_closure_pct = 100.0 * (rec.v_relax_final - rec.v_relax_initial) / gap;
      if (!(*rec.gap_closure_pct > 0.0 && *rec.gap_closure_pct <= 100.0 + 1e-6)) rec.flagged = true;
    }
    if (rec.category == Category::Closed) {
      rec.v_extracted = objective(inst, extract_rank1(r.final_Y));
      if (std::abs(*rec.v_extracted - rec.v_relax_final) > 1e-4) rec.flagged = true;
    }
    if (rec.v_relax_final > rec.v_local + 1e-5) rec.flagged = true;
  } catch (const std::exception& e) {
    rec.failure = e.what();
  }
  return rec;
}

/// Runs every instance of the configuration, in parallel, and returns the records ordered
/// by id. `progress` (optional) is called after each finished instance.
inline std::vector<ExperimentRecord> run_experiment(
    const ExperimentConfig& cfg, const std::function<void(const ExperimentRecord&)>& progress = {}) {
  if (cfg.count < 1) throw std::invalid_argument("count must be at least 1");
  struct Job {
    int n;
    int i;
  };
  std::vector<Job> jobs;
  for (int n : cfg.n_list) {
    if (n < 1) throw std::invalid_argument("dimensions must be positive");
    for (int i = 0; i < cfg.count; ++i) jobs.push_back({n, i});
  }
  std::vector<ExperimentRecord> records(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex progress_mutex;
  auto worker = [&] {
    for (std::size_t k = next++; k < jobs.size(); k = next++) {
      const EtrsInstance inst =
          random_instance(jobs[k].n, cfg.variant, instance_seed(cfg.seed, jobs[k].n, jobs[k].i));
      records[k] = run_instance(inst, static_cast<int>(k), cfg.bootstrap, cfg.loop, cfg.local);
      if (progress) {
        std::lock_guard<std::mutex> lock(progress_mutex);
        progress(records[k]);
      }
    }
  };
  int threads = cfg.threads > 0 ? cfg.threads : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min<int>(threads, static_cast<int>(jobs.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return records;
}

/// One line of the summary table. Averages are NaN when their category is empty.
struct TableRow {
  int n = 0;
  int inexact_initial = 0;
  int improved = 0;
  double avg_cuts_improved = std::numeric_limits<double>::quiet_NaN();
  double avg_gap_closure_pct = std::numeric_limits<double>::quiet_NaN();
  int closed = 0;
  double avg_cuts_closed = std::numeric_limits<double>::quiet_NaN();
  int instances = 0;
  int failures = 0;
};

/// Per-dimension summary, folded over the records in (n, id) order.
inline std::vector<TableRow> aggregate(std::vector<ExperimentRecord> records) {
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    return a.n != b.n ? a.n < b.n : a.id < b.id;
  });
  std::vector<TableRow> rows;
  struct Sums {
    double cuts_improved = 0.0, gap = 0.0, cuts_closed = 0.0;
  };
  Sums sums;
  auto close_row = [&] {
    TableRow& t = rows.back();
    if (t.improved > 0) {
      t.avg_cuts_improved = sums.cuts_improved / t.improved;
      t.avg_gap_closure_pct = sums.gap / t.improved;
    }
    if (t.closed > 0) t.avg_cuts_closed = sums.cuts_closed / t.closed;
    sums = {};
  };
  for (const auto& r : records) {
    if (rows.empty() || rows.back().n != r.n) {
      if (!rows.empty()) close_row();
      rows.push_back({});
      rows.back().n = r.n;
    }
    TableRow& t = rows.back();
    ++t.instances;
    if (r.failed()) {
      ++t.failures;
      continue;
    }
    if (r.category == Category::ExactInitial) continue;
    ++t.inexact_initial;
    if (r.category == Category::Improved) {
      ++t.improved;
      sums.cuts_improved += r.cuts_added;
      sums.gap += r.gap_closure_pct.value_or(0.0);
    } else if (r.category == Category::Closed) {
      ++t.closed;
      sums.cuts_closed += r.cuts_added;
    }
  }
  if (!rows.empty()) close_row();
  return rows;
}

inline void write_csv(std::ostream& os, const std::vector<TableRow>& rows) {
  auto avg = [](double v) {
    if (std::isnan(v)) return std::string();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return std::string(buf);
  };
  os << "n,inexact_initial,improved,avg_cuts_improved,avg_gap_closure_pct,closed,avg_cuts_closed\n";
  for (const auto& r : rows) {
    os << r.n << ',' << r.inexact_initial << ',' << r.improved << ',' << avg(r.avg_cuts_improved)
       << ',' << avg(r.avg_gap_closure_pct) << ',' << r.closed << ',' << avg(r.avg_cuts_closed)
       << '\n';
  }
}

namespace io {

inline json record_to_json(const ExperimentRecord& r) {
  json j;
  j["id"] = r.id;
  j["seed"] = r.seed;
  j["n"] = r.n;
  j["variant"] = to_string(r.variant);
  j["bootstrap"] = to_string(r.bootstrap);
  j["category"] = to_string(r.category);
  j["cuts_added"] = r.cuts_added;
  j["v_relax_initial"] = r.v_relax_initial;
  j["v_relax_final"] = r.v_relax_final;
  j["v_local"] = r.v_local;
  j["gap_closure_pct"] = r.gap_closure_pct ? json(*r.gap_closure_pct) : json(nullptr);
  j["v_extracted"] = r.v_extracted ? json(*r.v_extracted) : json(nullptr);
  j["flagged"] = r.flagged;
  j["stop"] = r.stop;
  j["failure"] = r.failure;
  return j;
}

inline ExperimentRecord record_from_json(const json& j) {
  ExperimentRecord r;
  r.id = j.at("id").get<int>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.n = j.at("n").get<int>();
  r.variant = parse_variant(j.at("variant").get<std::string>());
  r.bootstrap = parse_bootstrap(j.at("bootstrap").get<std::string>());
  r.category = parse_category(j.at("category").get<std::string>());
  r.cuts_added = j.at("cuts_added").get<int>();
  r.v_relax_initial = j.at("v_relax_initial").get<double>();
  r.v_relax_final = j.at("v_relax_final").get<double>();
  r.v_local = j.at("v_local").get<double>();
  if (!j.at("gap_closure_pct").is_null()) r.gap_closure_pct = j.at("gap_closure_pct").get<double>();
  if (!j.at("v_extracted").is_null()) r.v_extracted = j.at("v_extracted").get<double>();
  r.flagged = j.at("flagged").get<bool>();
  r.stop = j.at("stop").get<std::string>();
  r.failure = j.at("failure").get<std::string>();
  return r;
}

inline json records_to_json(const std::vector<ExperimentRecord>& records) {
  json a = json::array();
  for (const auto& r : records) a.push_back(record_to_json(r));
  return a;
}

inline std::vector<ExperimentRecord> records_from_json(const json& j) {
  std::vector<ExperimentRecord> out;
  for (const auto& r : j) out.push_back(record_from_json(r));
  return out;
}

}  // namespace io

}  // namespace etrs
