// Command-line front end: experiments, trace summaries, bound verification and
// the two scalar evaluators.
//
// Exit codes: 0 success, 1 invalid input (arguments, config, data), 2 runtime
// failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "rna/harness.hpp"
#include "rna/theory.hpp"

namespace {

constexpr int kValidationError = 1;
constexpr int kRuntimeError = 2;

// Writes to `path`, or stdout when it is empty.
template <typename Fn>
void with_output(const std::string& path, Fn&& fn) {
  if (path.empty()) {
    fn(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path);
  if (!out) throw rna::InvalidInput("cannot open output " + path);
  fn(out);
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw rna::InvalidInput("cannot open " + path);
  return in;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regularized nonlinear acceleration: experiments and bound checks"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output;
  auto* run = app.add_subcommand("run", "Run an experiment and write its CSV trace");
  run->add_option("config", config_path, "INI config file")->required();
  run->add_option("-o,--output", output, "Trace path (default: config output, else stdout)");

  std::string trace_path;
  auto* summarize = app.add_subcommand("summarize", "Epochs to reach gap thresholds per method");
  summarize->add_option("trace", trace_path, "Trace CSV")->required();
  summarize->add_option("-o,--output", output, "Summary path (default stdout)");

  auto* verify = app.add_subcommand("verify-bounds", "Check the bounds on random windows");
  verify->add_option("config", config_path, "INI config file with a [verify] section")
      ->required();
  verify->add_option("-o,--output", output, "Report path (default stdout)");

  int k = 0;
  double kappa = 0.0;
  double alpha = 0.0;
  int grid = 2000;
  auto* chebyshev = app.add_subcommand("chebyshev", "Regularized Chebyshev value S_kappa(k, alpha)");
  chebyshev->add_option("--k", k, "Polynomial degree")->required();
  chebyshev->add_option("--kappa", kappa, "Condition number in (0, 1)")->required();
  chebyshev->add_option("--alpha", alpha, "Regularization >= 0")->required();
  chebyshev->add_option("--grid", grid, "Grid points on [0, 1 - kappa]");

  double a = 0.0;
  double b = 0.0;
  double lambda = 0.0;
  auto* sqrtmax = app.add_subcommand("sqrtmax", "Maximum of (1/kappa) sqrt(a - lambda x^2) + b x");
  sqrtmax->add_option("--a", a)->required();
  sqrtmax->add_option("--b", b)->required();
  sqrtmax->add_option("--lambda", lambda)->required();
  sqrtmax->add_option("--kappa", kappa)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kValidationError;
  }

  try {
    if (*run) {
      const rna::ExperimentConfig config = rna::load_config(config_path);
      const std::string target = output.empty() ? config.output.string() : output;
      with_output(target, [&](std::ostream& out) { rna::run_experiment(config, out); });
    } else if (*summarize) {
      std::ifstream in = open_input(trace_path);
      const auto summary = rna::summarize(rna::read_trace(in));
      with_output(output, [&](std::ostream& out) { rna::write_summary(out, summary); });
    } else if (*verify) {
      std::ifstream in = open_input(config_path);
      const auto rows = rna::verify_bounds(rna::parse_verify_config(in));
      with_output(output, [&](std::ostream& out) { rna::write_verification(out, rows); });
    } else if (*chebyshev) {
      const rna::ChebyshevResult result = rna::chebyshev_S(k, kappa, alpha, grid);
      std::cout.precision(17);
      std::cout << "value " << result.value << "\nlower_bound " << result.lower_bound
                << "\ncoefficients";
      for (Eigen::Index i = 0; i < result.coefficients.size(); ++i) {
        std::cout << ' ' << result.coefficients[i];
      }
      std::cout << '\n';
    } else if (*sqrtmax) {
      const rna::SqrtMax result = rna::sqrt_fun_max(a, b, lambda, kappa);
      std::cout.precision(17);
      std::cout << "x_opt " << result.x_opt << "\nf_max " << result.f_max << "\nboundary "
                << (result.boundary ? "true" : "false") << '\n';
    }
  } catch (const rna::InvalidInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidationError;
  } catch (const rna::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidationError;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << '\n';
    return kRuntimeError;
  }
  return 0;
}
