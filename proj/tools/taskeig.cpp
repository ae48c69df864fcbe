// taskeig: run the eigenvalue pipeline on a random (or given) matrix and
// write a per-step CSV report, or sweep a benchmark grid.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "taskeig/pipeline.hpp"

namespace {

constexpr int exit_ok = 0;
constexpr int exit_config = 2;
constexpr int exit_numerical = 3;

void write_rows(const std::string& path, const std::vector<taskeig::ReportRow>& rows, bool bench) {
  if (path.empty() || path == "-") {
    taskeig::write_report_csv(std::cout, rows, bench);
    return;
  }
  std::ofstream out(path);
  if (!out) throw taskeig::ConfigError("cannot open output file '" + path + "'");
  taskeig::write_report_csv(out, rows, bench);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Task-based dense nonsymmetric eigensolver pipeline"};
  taskeig::PipelineConfig cfg;
  std::size_t workers = 0;
  std::string steps = "hessenberg,schur,eigvec";
  std::string out_path = "-";
  std::string bench_spec, trace_path, input_path;
  bool validate = false, no_validate = false;

  app.add_option("--n", cfg.n, "Matrix order")->check(CLI::PositiveNumber);
  app.add_option("--tile-size", cfg.tile_size, "Tile size b (default min(n, 128))");
  app.add_option("--workers", workers, "Worker threads (default: TASKEIG_WORKERS or 1)");
  app.add_option("--seed", cfg.seed, "Seed of the matrix generator");
  app.add_option("--steps", steps, "Comma list of hessenberg,schur,reorder,eigvec, or all");
  app.add_option("--select", cfg.selection, "Reordering selection: block bitmask or abs_gt:R / abs_lt:R / re_gt:X / re_lt:X");
  app.add_option("--eigvec-select", cfg.eigvec_selection, "Eigenvector selection, same syntax (default all)");
  app.add_option("--shifts", cfg.shifts, "Shifts per QR sweep (default automatic)");
  app.add_option("--aed-window", cfg.aed_window, "AED window size (default automatic)");
  app.add_option("--max-sweeps", cfg.max_sweeps, "QR sweep cap (default 30 n)");
  app.add_option("--out", out_path, "CSV report path ('-' for stdout)");
  app.add_option("--bench", bench_spec, "Benchmark grid, e.g. 'n=1000,2000;workers=1,2,4,8'");
  app.add_option("--trace", trace_path, "Write a task trace CSV");
  app.add_option("--input", input_path, "Read the matrix from a text or binary matrix file instead");
  app.add_flag("--validate", validate, "Force residual computation");
  app.add_flag("--no-validate", no_validate, "Skip residual computation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_config;
  }

  try {
    cfg.workers = workers ? workers : taskeig::workers_from_env(1);
    cfg.steps = taskeig::parse_steps(steps);
    if (validate && no_validate) throw taskeig::ConfigError("--validate and --no-validate are exclusive");
    if (validate) cfg.validate = true;
    if (no_validate) cfg.validate = false;
    if (!input_path.empty()) {
      taskeig::Matrix m;
      try {
        m = taskeig::load_matrix(input_path);
      } catch (const std::exception& e) {
        throw taskeig::ConfigError(e.what());
      }
      if (m.rows() != m.cols()) throw taskeig::ConfigError("input matrix is not square");
      cfg.n = m.rows();
      cfg.input = std::move(m);
    }
    if (!trace_path.empty()) cfg.trace = std::make_shared<taskeig::TaskTrace>();

    int code = exit_ok;
    if (!bench_spec.empty()) {
      if (cfg.input) throw taskeig::ConfigError("--bench cannot be combined with --input");
      const auto grid = taskeig::parse_grid(bench_spec);
      const auto rows = taskeig::bench(cfg, grid, &std::cerr);
      write_rows(out_path, rows, true);
      for (const auto& r : rows)
        if (r.status != "ok") code = exit_numerical;
    } else {
      const auto report = taskeig::run_pipeline(cfg);
      write_rows(out_path, taskeig::rows_of(report), false);
      if (report.numerical_failure) {
        std::cerr << "taskeig: " << report.diagnostic << '\n';
        code = exit_numerical;
      }
    }
    if (cfg.trace) {
      std::ofstream tr(trace_path);
      if (!tr) throw taskeig::ConfigError("cannot open trace file '" + trace_path + "'");
      cfg.trace->write_csv(tr);
    }
    return code;
  } catch (const taskeig::ConfigError& e) {
    std::cerr << "taskeig: configuration error: " << e.what() << '\n';
    return exit_config;
  } catch (const taskeig::StepError& e) {
    std::cerr << "taskeig: step " << e.what() << '\n';
    return exit_numerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "taskeig: configuration error: " << e.what() << '\n';
    return exit_config;
  } catch (const std::exception& e) {
    std::cerr << "taskeig: " << e.what() << '\n';
    return exit_numerical;
  }
}
