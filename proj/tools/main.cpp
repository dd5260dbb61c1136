#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "app.hpp"
#include "fwem/error.hpp"

namespace {

void set_overrides(fwem::Config& cfg, const std::vector<std::string>& pairs) {
  for (const auto& kv : pairs) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw fwem::Error("bad_option", "--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Fictitious-wave-domain CSEM modelling and inversion"};
  cli.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  int jobs = 0;
  auto common = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "Configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("--set", overrides, "Override a configuration value (key=value)");
    sub->add_option("--jobs", jobs, "Concurrent per-source simulations")->check(CLI::PositiveNumber);
  };

  CLI::App* forward = cli.add_subcommand("forward", "Simulate survey data for a model");
  common(forward);
  double noise = -1.0;
  long long seed = -1;
  std::string out;
  forward->add_option("--noise", noise, "Relative Gaussian noise level")->check(CLI::NonNegativeNumber);
  forward->add_option("--seed", seed, "Noise seed");
  forward->add_option("--out", out, "Data CSV to write");

  CLI::App* invert = cli.add_subcommand("invert", "Invert observed data for resistivity");
  common(invert);
  std::string out_dir;
  int max_iter = -1;
  invert->add_option("--out-dir", out_dir, "Directory for models and logs");
  invert->add_option("--max-iter", max_iter, "Maximum number of iterations")->check(CLI::NonNegativeNumber);

  CLI::App* basis = cli.add_subcommand("basis", "Compute adjoint-source basis functions");
  common(basis);
  basis->add_option("--out", out, "Basis CSV to write");

  CLI::App* gradcheck = cli.add_subcommand("gradcheck", "Compare adjoint, finite-difference and time-domain gradients");
  common(gradcheck);
  gradcheck->add_option("--out", out, "Comparison CSV to write");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return cli.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << '\n';
    return 2;
  }

  const auto log = [](const std::string& msg) { std::cerr << msg << '\n'; };
  try {
    fwem::Config cfg = fwem::Config::load(config_path);
    set_overrides(cfg, overrides);
    if (jobs > 0) cfg.set("jobs", std::to_string(jobs));
    int rc = 0;
    if (forward->parsed()) {
      if (noise >= 0.0) cfg.set("noise", fwem::format_double(noise));
      if (seed >= 0) cfg.set("seed", std::to_string(seed));
      if (!out.empty()) cfg.set("data", out);
      rc = fwem::app::cmd_forward(cfg, log);
    } else if (invert->parsed()) {
      if (!out_dir.empty()) cfg.set("output_dir", out_dir);
      if (max_iter >= 0) cfg.set("max_iter", std::to_string(max_iter));
      rc = fwem::app::cmd_invert(cfg, log);
    } else if (basis->parsed()) {
      if (!out.empty()) cfg.set("basis_output", out);
      rc = fwem::app::cmd_basis(cfg, log);
    } else {
      if (!out.empty()) cfg.set("gradcheck_output", out);
      rc = fwem::app::cmd_gradcheck(cfg, log);
    }
    return rc;
  } catch (const fwem::Error& e) {
    std::cerr << "error: " << e.code() << ": " << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << '\n';
  }
  return 1;
}
