#pragma once

// End-to-end driver: Hessenberg -> Schur -> optional reordering ->
// eigenvectors, with per-step timing, validation residuals and a CSV report.

#include <chrono>
#include <complex>
#include <cstdio>
#include <iomanip>
#include <random>
#include <sstream>

#include "taskeig/eigvec.hpp"
#include "taskeig/hessenberg.hpp"
#include "taskeig/reorder.hpp"
#include "taskeig/schur.hpp"

namespace taskeig {

// ---------------------------------------------------------------------------
// Problem generation

/// 64-bit linear congruential generator, x <- a x + c mod 2^64 (Knuth's MMIX
/// constants). The top 53 bits give u in [0, 1), the entry is 2u - 1.
using ProblemEngine = std::linear_congruential_engine<std::uint64_t, 6364136223846793005ULL, 1442695040888963407ULL, 0>;

inline double uniform_pm1(ProblemEngine& eng) {
  const double u = static_cast<double>(eng() >> 11) * 0x1.0p-53;
  return 2.0 * u - 1.0;
}

/// Random dense matrix with entries uniform on [-1, 1], filled row by row.
inline Matrix generate_dense(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("generate_problem: n must be positive");
  ProblemEngine eng(seed);
  Matrix a(n, n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) a(r, c) = uniform_pm1(eng);
  return a;
}

inline TiledMatrix generate_problem(std::size_t n, std::uint64_t seed, std::size_t tile_size = 0) {
  return from_dense(generate_dense(n, seed), tile_size ? tile_size : std::min<std::size_t>(n, 128));
}

// ---------------------------------------------------------------------------
// Configuration

enum class Step { hessenberg, schur, reorder, eigvec };

inline const char* to_string(Step s) {
  switch (s) {
    case Step::hessenberg: return "hessenberg";
    case Step::schur: return "schur";
    case Step::reorder: return "reorder";
    case Step::eigvec: return "eigvec";
  }
  return "?";
}

/// Thrown for invalid configurations (CLI exit code 2).
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a step fails numerically (CLI exit code 3).
class StepError : public std::runtime_error {
public:
  StepError(Step step, const std::string& what)
      : std::runtime_error(std::string(to_string(step)) + ": " + what), step_(step) {}
  Step step() const noexcept { return step_; }

private:
  Step step_;
};

inline std::vector<Step> parse_steps(const std::string& spec) {
  if (spec == "all") return {Step::hessenberg, Step::schur, Step::reorder, Step::eigvec};
  std::vector<Step> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "hessenberg") out.push_back(Step::hessenberg);
    else if (item == "schur") out.push_back(Step::schur);
    else if (item == "reorder") out.push_back(Step::reorder);
    else if (item == "eigvec") out.push_back(Step::eigvec);
    else throw ConfigError("unknown step '" + item + "'");
  }
  if (out.empty()) throw ConfigError("no steps given");
  for (std::size_t i = 1; i < out.size(); ++i)
    if (static_cast<int>(out[i]) <= static_cast<int>(out[i - 1]))
      throw ConfigError("steps must be listed once each, in pipeline order");
  return out;
}

/// Syntax-only check of a selection spec; lengths are checked against the
/// Schur structure later.
inline void check_selection_syntax(const std::string& spec) {
  if (spec == "all" || spec == "none") return;
  const auto colon = spec.find(':');
  if (colon != std::string::npos) {
    const std::string name = spec.substr(0, colon);
    if (name != "abs_gt" && name != "abs_lt" && name != "re_gt" && name != "re_lt")
      throw ConfigError("selection: unknown predicate '" + name + "'");
    try {
      std::size_t used = 0;
      std::stod(spec.substr(colon + 1), &used);
      if (used != spec.size() - colon - 1) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ConfigError("selection: bad threshold in '" + spec + "'");
    }
    return;
  }
  if (spec.empty() || spec.find_first_not_of("01") != std::string::npos)
    throw ConfigError("selection must be a 0/1 bitmask over blocks or a predicate like abs_gt:R");
}

struct PipelineConfig {
  std::size_t n = 100;
  std::size_t tile_size = 0;  // 0: min(n, 128)
  std::size_t workers = 1;
  std::uint64_t seed = 1;
  std::vector<Step> steps{Step::hessenberg, Step::schur, Step::eigvec};
  std::string selection;             // required with the reorder step
  std::string eigvec_selection = "all";
  std::size_t shifts = 0;            // 0: automatic
  std::size_t aed_window = 0;        // 0: automatic
  std::size_t max_sweeps = 0;        // 0: 30 n
  std::optional<bool> validate;      // default: n <= 2000
  std::optional<Matrix> input;       // replaces the generated matrix
  std::shared_ptr<TaskTrace> trace;

  std::size_t effective_tile() const { return tile_size ? tile_size : std::min<std::size_t>(n, 128); }
  bool effective_validate() const { return validate.value_or(n <= 2000); }
  bool wants(Step s) const { return std::find(steps.begin(), steps.end(), s) != steps.end(); }

  void check() const {
    if (n == 0) throw ConfigError("n must be positive");
    if (tile_size > n) throw ConfigError("tile size must not exceed n");
    if (workers == 0) throw ConfigError("workers must be at least 1");
    if (steps.empty()) throw ConfigError("no steps given");
    if (input && (input->rows() != n || input->cols() != n)) throw ConfigError("input matrix does not match n");
    if (wants(Step::reorder)) {
      if (selection.empty()) throw ConfigError("the reorder step needs a selection (--select)");
      check_selection_syntax(selection);
    }
    check_selection_syntax(eigvec_selection);
  }
};

// ---------------------------------------------------------------------------
// Report

struct StepReport {
  Step step = Step::hessenberg;
  double seconds = 0.0;
  double residual_backward = std::numeric_limits<double>::quiet_NaN();
  double residual_orth = std::numeric_limits<double>::quiet_NaN();
  std::string extra;  // key=value pairs separated by ';'
};

/// Matrices produced by a run, kept for inspection and determinism checks.
struct PipelineArtifacts {
  Matrix a, h, q1, s, q2;
  SchurStructure structure;
  EigenvectorSet vectors;
};

struct RunReport {
  std::size_t n = 0;
  std::size_t tile_size = 0;
  std::size_t workers = 0;
  std::uint64_t seed = 0;
  std::vector<StepReport> steps;
  std::vector<std::complex<double>> eigenvalues;
  bool numerical_failure = false;
  std::string diagnostic;
  PipelineArtifacts artifacts;
};

namespace detail {

inline std::string fmt_double(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string key_value(std::initializer_list<std::pair<const char*, std::string>> kv) {
  std::string out;
  for (const auto& [k, v] : kv) {
    if (!out.empty()) out += ';';
    out += k;
    out += '=';
    out += v;
  }
  return out;
}

/// log|det| and sign-carrying phase of a dense matrix by partial-pivoting LU in
/// extended precision; returns det as mantissa * 2^exponent.
struct ScaledDet {
  std::complex<long double> mantissa{1.0L, 0.0L};
  long exponent = 0;

  void multiply(std::complex<long double> f) {
    mantissa *= f;
    int e = 0;
    const long double m = std::max(std::abs(mantissa.real()), std::abs(mantissa.imag()));
    if (m == 0.0L) return;
    std::frexp(m, &e);
    mantissa = {std::ldexp(mantissa.real(), -e), std::ldexp(mantissa.imag(), -e)};
    exponent += e;
  }
};

inline ScaledDet lu_determinant(const Matrix& a) {
  const std::size_t n = a.rows();
  std::vector<long double> m(n * n);
  for (std::size_t c = 0; c < n; ++c)
    for (std::size_t r = 0; r < n; ++r) m[r * n + c] = a(r, c);
  ScaledDet det;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t r = k + 1; r < n; ++r)
      if (std::abs(m[r * n + k]) > std::abs(m[p * n + k])) p = r;
    if (m[p * n + k] == 0.0L) return {{0.0L, 0.0L}, 0};
    if (p != k) {
      for (std::size_t c = 0; c < n; ++c) std::swap(m[p * n + c], m[k * n + c]);
      det.multiply(-1.0L);
    }
    det.multiply(m[k * n + k]);
    for (std::size_t r = k + 1; r < n; ++r) {
      const long double f = m[r * n + k] / m[k * n + k];
      for (std::size_t c = k + 1; c < n; ++c) m[r * n + c] -= f * m[k * n + c];
    }
  }
  return det;
}

inline double relative_det_error(const ScaledDet& want, const ScaledDet& got) {
  if (want.mantissa == std::complex<long double>{}) return std::abs(got.mantissa) == 0.0L ? 0.0 : 1.0;
  const long shift = got.exponent - want.exponent;
  if (std::abs(shift) > 60) return 1.0;
  const auto g = got.mantissa * std::ldexp(1.0L, static_cast<int>(shift));
  return static_cast<double>(std::abs(g - want.mantissa) / std::abs(want.mantissa));
}

class Stopwatch {
public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace detail

/// Residual ||A x - lambda x|| / (||A||_F ||x||) of one original-basis column.
inline double eigenvector_residual(const Matrix& a, const ScaledVector& x) {
  const std::size_t n = a.rows();
  const double re = x.lambda.real(), im = x.lambda.imag();
  std::vector<double> r(n * x.v.cols());
  const Matrix av = multiply(a, x.v);
  for (std::size_t i = 0; i < n; ++i) {
    if (x.v.cols() == 1) {
      r[i] = av(i, 0) - re * x.v(i, 0);
    } else {
      r[i] = av(i, 0) - (re * x.v(i, 0) - im * x.v(i, 1));
      r[n + i] = av(i, 1) - (re * x.v(i, 1) + im * x.v(i, 0));
    }
  }
  const double xn = norm2(x.v.data().data(), x.v.data().size());
  return norm2(r.data(), r.size()) / (frobenius_norm(a) * xn);
}

/// Runs the configured steps. Steps that were not requested but are needed
/// by later ones run untimed and unreported.
inline RunReport run_pipeline(const PipelineConfig& cfg) {
  cfg.check();
  RunReport rep;
  rep.n = cfg.n;
  rep.tile_size = cfg.effective_tile();
  rep.workers = cfg.workers;
  rep.seed = cfg.seed;
  const bool validate = cfg.effective_validate();
  const std::size_t b = rep.tile_size;
  const std::size_t n = cfg.n;

  ExecPolicy policy;
  policy.workers = cfg.workers;
  policy.trace = cfg.trace;

  Step last = Step::hessenberg;
  for (Step s : cfg.steps)
    if (static_cast<int>(s) > static_cast<int>(last)) last = s;
  auto needed = [&](Step s) { return static_cast<int>(s) <= static_cast<int>(last) && (s != Step::reorder || cfg.wants(s)); };

  const Matrix a_dense = cfg.input ? *cfg.input : generate_dense(n, cfg.seed);
  const TiledMatrix a = from_dense(a_dense, b);
  rep.artifacts.a = a_dense;
  const double a_norm = frobenius_norm(a_dense);

  auto guarded = [&](Step step, auto&& fn) {
    try {
      return fn();
    } catch (const ConfigError&) {
      throw;
    } catch (const StepError&) {
      throw;
    } catch (const std::exception& e) {
      throw StepError(step, e.what());
    }
  };

  // Hessenberg
  TiledMatrix h = a, q1 = TiledMatrix::identity(n, b);
  {
    detail::Stopwatch sw;
    guarded(Step::hessenberg, [&] {
      auto r = reduce_to_hessenberg(a, 0, policy);
      h = std::move(r.h);
      q1 = std::move(r.q1);
      return 0;
    });
    StepReport sr;
    sr.step = Step::hessenberg;
    sr.seconds = sw.seconds();
    rep.artifacts.h = to_dense(h);
    rep.artifacts.q1 = to_dense(q1);
    if (validate) {
      sr.residual_backward = similarity_residual(a_dense, rep.artifacts.q1, rep.artifacts.h) / a_norm;
      sr.residual_orth = orthogonality_defect(rep.artifacts.q1);
    }
    if (cfg.wants(Step::hessenberg)) rep.steps.push_back(sr);
  }
  if (!needed(Step::schur)) return rep;

  // Schur
  SchurOptions sopts;
  sopts.shifts = cfg.shifts;
  sopts.aed_window = cfg.aed_window;
  sopts.max_sweeps = cfg.max_sweeps;
  sopts.policy = policy;
  TiledMatrix s = h, q2 = q1;
  SchurStructure structure;
  {
    detail::Stopwatch sw;
    SchurResult res = guarded(Step::schur, [&] { return multishift_qr(h, sopts); });
    StepReport sr;
    sr.step = Step::schur;
    sr.seconds = sw.seconds();
    s = std::move(res.s);
    q2 = std::move(res.q2);
    structure = res.structure;
    rep.eigenvalues = eigenvalues(structure);
    const Matrix hd = rep.artifacts.h;
    rep.artifacts.s = to_dense(s);
    rep.artifacts.q2 = to_dense(q2);
    if (validate) {
      const double h_norm = frobenius_norm(hd);
      sr.residual_backward = similarity_residual(hd, rep.artifacts.q2, rep.artifacts.s) / (h_norm > 0 ? h_norm : 1.0);
      sr.residual_orth = orthogonality_defect(rep.artifacts.q2);
      std::complex<double> sum = 0.0;
      double trace = 0.0;
      detail::ScaledDet prod;
      for (auto l : rep.eigenvalues) {
        sum += l;
        prod.multiply(std::complex<long double>(l.real(), l.imag()));
      }
      for (std::size_t i = 0; i < n; ++i) trace += a_dense(i, i);
      std::string extra = detail::key_value({{"blocks", std::to_string(structure.blocks.size())},
                                             {"trace_err", detail::fmt_double(std::abs(sum - trace))},
                                             {"sweeps", std::to_string(res.stats.sweeps)},
                                             {"aed_steps", std::to_string(res.stats.aed_steps)}});
      if (n <= 50)
        extra += ";det_rel=" + detail::fmt_double(detail::relative_det_error(detail::lu_determinant(a_dense), prod));
      sr.extra = extra;
    } else {
      sr.extra = detail::key_value({{"blocks", std::to_string(structure.blocks.size())},
                                    {"sweeps", std::to_string(res.stats.sweeps)},
                                    {"aed_steps", std::to_string(res.stats.aed_steps)}});
    }
    rep.artifacts.structure = structure;
    if (cfg.wants(Step::schur)) rep.steps.push_back(sr);
  }

  // Reordering
  if (cfg.wants(Step::reorder)) {
    EigenSelection sel;
    try {
      sel = parse_selection(cfg.selection, structure);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    const Matrix s_before = rep.artifacts.s;
    const Matrix q_before = rep.artifacts.q2;
    ReorderOptions ropts;
    ropts.policy = policy;
    detail::Stopwatch sw;
    ReorderResult rr = guarded(Step::reorder, [&] { return reorder_schur(s, q2, structure, sel, ropts); });
    StepReport sr;
    sr.step = Step::reorder;
    sr.seconds = sw.seconds();
    structure = rr.structure;
    rep.eigenvalues = eigenvalues(structure);
    rep.artifacts.s = to_dense(s);
    rep.artifacts.q2 = to_dense(q2);
    rep.artifacts.structure = structure;
    std::size_t selected = 0;
    for (bool x : sel.selected) selected += x;
    std::string extra = detail::key_value({{"selected", std::to_string(selected)},
                                           {"swaps", std::to_string(rr.swaps)},
                                           {"windows", std::to_string(rr.windows)},
                                           {"promoted", rr.promoted ? "1" : "0"},
                                           {"failed", rr.failure ? "1" : "0"}});
    if (validate) {
      const Matrix q3 = multiply(q_before, rep.artifacts.q2, Trans::yes, Trans::no);
      const double s_norm = frobenius_norm(s_before);
      sr.residual_backward = similarity_residual(s_before, q3, rep.artifacts.s) / (s_norm > 0 ? s_norm : 1.0);
      sr.residual_orth = orthogonality_defect(rep.artifacts.q2);
    }
    sr.extra = extra;
    rep.steps.push_back(sr);
    if (rr.failure) {
      rep.numerical_failure = true;
      rep.diagnostic = "reorder: swap of blocks at row " + std::to_string(rr.failure->upper_start) + " rejected";
      return rep;
    }
  }

  // Eigenvectors
  if (cfg.wants(Step::eigvec)) {
    EigenSelection sel;
    try {
      sel = parse_selection(cfg.eigvec_selection, structure);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    detail::Stopwatch sw;
    EigenvectorSet x = guarded(Step::eigvec, [&] {
      return backtransform(solve_schur_eigenvectors(s, structure, sel, policy), q1, q2, policy);
    });
    StepReport sr;
    sr.step = Step::eigvec;
    sr.seconds = sw.seconds();
    std::size_t failed = 0;
    double worst = 0.0, norm_dev = 0.0;
    for (const auto& c : x.columns) {
      if (c.failed) {
        ++failed;
        continue;
      }
      if (validate) {
        worst = std::max(worst, eigenvector_residual(a_dense, c));
        norm_dev = std::max(norm_dev, std::abs(norm2(c.v.data().data(), c.v.data().size()) - 1.0));
      }
    }
    if (validate) {
      sr.residual_backward = worst;
      sr.residual_orth = norm_dev;
    }
    sr.extra = detail::key_value({{"vectors", std::to_string(x.columns.size())}, {"failed", std::to_string(failed)}});
    rep.artifacts.vectors = std::move(x);
    rep.steps.push_back(sr);
    if (failed) {
      rep.numerical_failure = true;
      rep.diagnostic = "eigvec: " + std::to_string(failed) + " eigenvector column(s) failed";
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// CSV

inline const char* report_header = "n,b,workers,seed,step,seconds,residual_backward,residual_orth,extra";
inline const char* bench_header = "n,b,workers,seed,step,seconds,residual_backward,residual_orth,extra,speedup,status";

struct ReportRow {
  std::size_t n = 0, b = 0, workers = 0;
  std::uint64_t seed = 0;
  std::string step;
  double seconds = 0.0;
  double residual_backward = std::numeric_limits<double>::quiet_NaN();
  double residual_orth = std::numeric_limits<double>::quiet_NaN();
  std::string extra;
  double speedup = std::numeric_limits<double>::quiet_NaN();  // bench only
  std::string status;                                        // bench only
};

inline std::vector<ReportRow> rows_of(const RunReport& rep) {
  std::vector<ReportRow> rows;
  for (const auto& s : rep.steps)
    rows.push_back({rep.n, rep.tile_size, rep.workers, rep.seed, to_string(s.step), s.seconds, s.residual_backward,
                    s.residual_orth, s.extra, std::numeric_limits<double>::quiet_NaN(), ""});
  return rows;
}

inline void write_report_csv(std::ostream& out, const std::vector<ReportRow>& rows, bool bench = false) {
  out << (bench ? bench_header : report_header) << '\n';
  for (const auto& r : rows) {
    out << r.n << ',' << r.b << ',' << r.workers << ',' << r.seed << ',' << r.step << ','
        << detail::fmt_double(r.seconds) << ',' << detail::fmt_double(r.residual_backward) << ','
        << detail::fmt_double(r.residual_orth) << ',' << r.extra;
    if (bench) out << ',' << detail::fmt_double(r.speedup) << ',' << r.status;
    out << '\n';
  }
}

/// Reads a report or bench CSV written by write_report_csv.
inline std::vector<ReportRow> read_report_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("report: empty input");
  const bool bench = line == bench_header;
  if (!bench && line != report_header) throw std::runtime_error("report: unexpected header");
  auto num = [](const std::string& f) {
    return f.empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(f);
  };
  std::vector<ReportRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) f.push_back(item);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    const std::size_t want = bench ? 11 : 9;
    if (f.size() != want) throw std::runtime_error("report: malformed row '" + line + "'");
    ReportRow r;
    r.n = std::stoul(f[0]);
    r.b = std::stoul(f[1]);
    r.workers = std::stoul(f[2]);
    r.seed = std::stoull(f[3]);
    r.step = f[4];
    r.seconds = num(f[5]);
    r.residual_backward = num(f[6]);
    r.residual_orth = num(f[7]);
    r.extra = f[8];
    if (bench) {
      r.speedup = num(f[9]);
      r.status = f[10];
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Benchmark grid

struct BenchGrid {
  std::vector<std::size_t> n;
  std::vector<std::size_t> workers;
  std::vector<std::size_t> tile_sizes;  // empty: from the base config
};

/// "n=1000,2000;workers=1,2,4,8;b=128". Missing keys fall back to the base
/// configuration.
inline BenchGrid parse_grid(const std::string& spec) {
  BenchGrid g;
  std::stringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, ';')) {
    if (part.empty()) continue;
    const auto eq = part.find('=');
    if (eq == std::string::npos) throw ConfigError("bench grid: expected key=values in '" + part + "'");
    const std::string key = part.substr(0, eq);
    std::vector<std::size_t> values;
    std::stringstream vs(part.substr(eq + 1));
    std::string v;
    while (std::getline(vs, v, ',')) {
      try {
        std::size_t used = 0;
        const long long x = std::stoll(v, &used);
        if (used != v.size() || x <= 0) throw std::invalid_argument("bad");
        values.push_back(static_cast<std::size_t>(x));
      } catch (const std::exception&) {
        throw ConfigError("bench grid: bad value '" + v + "' for " + key);
      }
    }
    if (values.empty()) throw ConfigError("bench grid: no values for " + key);
    if (key == "n") g.n = values;
    else if (key == "workers") g.workers = values;
    else if (key == "b") g.tile_sizes = values;
    else throw ConfigError("bench grid: unknown key '" + key + "'");
  }
  return g;
}

/// Runs every (n, b, workers) cell of the grid. Failed cells are marked and
/// the remaining cells still run. Speedups are relative to the 1-worker row
/// of the same (n, b, step).
inline std::vector<ReportRow> bench(const PipelineConfig& base, const BenchGrid& grid_in,
                                    std::ostream* log = nullptr) {
  BenchGrid grid = grid_in;
  if (grid.n.empty()) grid.n = {base.n};
  if (grid.workers.empty()) grid.workers = {base.workers};
  std::vector<ReportRow> rows;
  for (std::size_t n : grid.n) {
    std::vector<std::size_t> tiles = grid.tile_sizes;
    if (tiles.empty()) tiles = {base.tile_size};
    for (std::size_t b : tiles)
      for (std::size_t w : grid.workers) {
        PipelineConfig cfg = base;
        cfg.n = n;
        cfg.tile_size = b ? std::min(b, n) : 0;
        cfg.workers = w;
        cfg.input.reset();
        try {
          const RunReport rep = run_pipeline(cfg);
          for (auto r : rows_of(rep)) {
            r.status = rep.numerical_failure ? "failed" : "ok";
            rows.push_back(std::move(r));
          }
        } catch (const std::exception& e) {
          if (log) *log << "bench cell n=" << n << " workers=" << w << ": " << e.what() << '\n';
          for (Step s : cfg.steps) {
            ReportRow r;
            r.n = n;
            r.b = cfg.effective_tile();
            r.workers = w;
            r.seed = cfg.seed;
            r.step = to_string(s);
            r.seconds = std::numeric_limits<double>::quiet_NaN();
            r.status = "failed";
            rows.push_back(std::move(r));
          }
        }
      }
  }
  for (auto& r : rows) {
    for (const auto& base_row : rows)
      if (base_row.workers == 1 && base_row.n == r.n && base_row.b == r.b && base_row.step == r.step &&
          base_row.status == "ok" && r.status == "ok" && base_row.seconds > 0)
        r.speedup = base_row.seconds / r.seconds;
  }
  return rows;
}

}  // namespace taskeig
