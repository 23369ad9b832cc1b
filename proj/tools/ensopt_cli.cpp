#include <CLI11.hpp>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "ensopt/harness.hpp"

namespace {

std::string run_file_name(int run_index) {
  std::ostringstream os;
  os << "run_" << std::setw(3) << std::setfill('0') << run_index << ".csv";
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ensemble-uncertainty optimization campaigns (CMA-ES with "
               "neighborhood-based objective estimation)"};
  app.require_subcommand(1);

  // --- run ---------------------------------------------------------------
  auto* run = app.add_subcommand("run", "Run an optimization campaign");
  std::string config_path, out_dir = ".";
  std::map<std::string, std::string> overrides;
  auto add_override = [&](const char* flag, const char* key, const char* help) {
    run->add_option_function<std::string>(
        flag, [&overrides, key](const std::string& v) { overrides[key] = v; },
        help);
  };
  run->add_option("--config", config_path, "Flat key=value configuration file");
  run->add_option("--out", out_dir, "Output directory for trace CSVs");
  add_override("--problem", "problem", "Problem: shifted_sphere | npv_proxy");
  add_override("--dimension", "dimension", "Problem dimension");
  add_override("--nr", "n_realizations", "Number of realizations N_r");
  add_override("--strategy", "strategy",
               "mean_of_samples | one_realization | neighborhood");
  add_override("--seed", "master_seed", "Master seed");
  add_override("--runs", "runs", "Number of independent runs");
  add_override("--budget", "budget", "Total simulation budget per run");
  add_override("--lambda", "lambda", "CMA-ES population size");
  add_override("--sigma0", "sigma0", "Initial step size (<=0: auto)");
  add_override("--dmax", "dmax", "Neighbor selection distance d_max");
  add_override("--ns1", "ns1", "Bootstrap-phase simulations per point");
  add_override("--ns2", "ns2", "Main-phase simulations per point");
  add_override("--nsim", "nsim", "Bootstrap threshold N_sim");
  add_override("--nnmax", "nnmax", "Maximum neighbors N_n,max");
  add_override("--risk", "risk", "Risk factor r");
  add_override("--verify", "verify", "on_new_best | every_generation");

  // --- compare -----------------------------------------------------------
  auto* compare = app.add_subcommand("compare", "Summarize trace directories");
  std::vector<std::string> trace_dirs;
  std::string thresholds_arg;
  compare->add_option("dirs", trace_dirs, "Trace directories, one per strategy")
      ->required();
  compare->add_option("--thresholds", thresholds_arg,
                      "Comma-separated verified-objective thresholds")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      std::map<std::string, std::string> keys;
      if (!config_path.empty()) keys = ensopt::read_key_value_file(config_path);
      for (const auto& [key, value] : overrides) keys[key] = value;

      ensopt::RunConfig config;
      try {
        config = ensopt::config_from_keys(keys);
        config.validate();
      } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
      }

      std::filesystem::create_directories(out_dir);
      const auto traces = ensopt::run_campaign(config);
      for (const auto& trace : traces) {
        const auto path =
            (std::filesystem::path(out_dir) / run_file_name(trace.run_id)).string();
        ensopt::write_trace(trace, path);
        std::cout << path << ": " << trace.rows.size() << " generations, "
                  << trace.total_simulations() << " simulations, best verified ";
        if (trace.best_verified_value)
          std::cout << std::setprecision(17) << *trace.best_verified_value;
        else
          std::cout << "n/a";
        std::cout << (trace.complete ? "" : " [incomplete]") << '\n';
        if (!trace.complete) return 2;
      }
      return 0;
    }

    // compare
    std::vector<double> thresholds;
    std::istringstream ts(thresholds_arg);
    std::string cell;
    while (std::getline(ts, cell, ',')) thresholds.push_back(std::stod(cell));
    if (thresholds.empty()) {
      std::cerr << "config error: no thresholds given\n";
      return 1;
    }
    std::vector<std::pair<std::string, std::vector<ensopt::RunTrace>>> groups;
    for (const auto& dir : trace_dirs)
      groups.emplace_back(dir, ensopt::read_trace_dir(dir));
    ensopt::print_summary_table(ensopt::summarize_traces(groups, thresholds),
                                std::cout);
    return 0;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
