#include <exception>
#include <iostream>
#include <stdexcept>
#include <string>

#include "CLI11.hpp"
#include "nestmax/commands.hpp"
#include "nestmax/util.hpp"

namespace {

void add_common(CLI::App* cmd, nestmax::CommandIo& io) {
  cmd->add_option("--config", io.config_path, "JSON run configuration")
      ->required();
  cmd->add_option("--out", io.out_dir, "output directory (overrides config)");
  cmd->add_option("--seed", io.seed, "seed override");
  cmd->add_option("--workers", io.workers, "OpenMP worker count");
}

int dispatch(int (*fn)(const nestmax::CommandIo&),
             const nestmax::CommandIo& io) {
  try {
    return fn(io);
  } catch (const nestmax::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return nestmax::kExitIo;
  } catch (const nestmax::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return nestmax::kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return nestmax::kExitValidation;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return nestmax::kExitValidation;
  } catch (const std::out_of_range& e) {
    std::cerr << "error: " << e.what() << "\n";
    return nestmax::kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return nestmax::kExitNumerical;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "nestmax: nested multivariate max-stable processes -- simulation, "
      "dependence summaries and Bayesian MCMC inference"};
  app.require_subcommand(1);

  nestmax::CommandIo io;

  CLI::App* sim = app.add_subcommand("simulate", "simulate fields");
  add_common(sim, io);

  CLI::App* fit = app.add_subcommand("fit", "MCMC posterior sampling");
  add_common(fit, io);
  fit->add_option("--data", io.data_path, "block-maxima CSV")->required();
  fit->add_option("--chains", io.chains, "number of chains");
  fit->add_flag("--unit-frechet", io.unit_frechet,
                "data already on the unit-Frechet scale");

  CLI::App* ext = app.add_subcommand("extremal", "extremal coefficients");
  add_common(ext, io);
  ext->add_option("--chain", io.chain_path,
                  "chain CSV; uses posterior medians");
  ext->add_option("--data", io.data_path, "data CSV for empirical estimates");

  CLI::App* diag = app.add_subcommand("diagnose", "chain diagnostics");
  add_common(diag, io);
  diag->add_option("--chain", io.chain_path, "chain CSV")->required();

  CLI::App* pred =
      app.add_subcommand("predict", "posterior-predictive max quantiles");
  add_common(pred, io);
  pred->add_option("--chain", io.chain_path, "chain CSV")->required();
  pred->add_option("--margins", io.margins_path,
                   "margins CSV for GEV-scale output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : nestmax::kExitValidation;
  }

  if (sim->parsed()) return dispatch(nestmax::cmd_simulate, io);
  if (fit->parsed()) return dispatch(nestmax::cmd_fit, io);
  if (ext->parsed()) return dispatch(nestmax::cmd_extremal, io);
  if (diag->parsed()) return dispatch(nestmax::cmd_diagnose, io);
  if (pred->parsed()) return dispatch(nestmax::cmd_predict, io);
  return nestmax::kExitValidation;
}
