// harvest_cli: solve, simulate, verify, bounds and sweep on a JSON problem config.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "harvest/commands.hpp"

namespace {

bool read_file(const std::string& path, std::string& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::ostringstream ss;
  ss << in.rdbuf();
  out = ss.str();
  return true;
}

bool write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  return static_cast<bool>(out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal singular harvesting: closed forms, simulation and bounds"};
  app.require_subcommand(1);

  std::string config_path, out_path, grid_csv_path, policy_list;
  harvest::cli::Options opt;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "problem config (JSON)")->required();
    sub->add_option("--out", out_path, "write the result here instead of stdout");
    sub->add_option("--format", opt.format, "json or csv");
    sub->add_flag("--no-meta", opt.no_meta, "omit the timestamped meta block");
  };
  auto* solve = app.add_subcommand("solve", "closed-form value function and thresholds");
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo value of one or more policies");
  auto* verify = app.add_subcommand("verify", "grid check of the verification conditions");
  auto* bounds = app.add_subcommand("bounds", "lower and upper bounds on the value");
  auto* sweep = app.add_subcommand("sweep", "solve across a parameter range");
  for (auto* s : {solve, simulate, verify, bounds, sweep}) common(s);

  for (auto* s : {simulate, bounds, sweep}) s->add_option("--seed", opt.seed, "override sim.seed");
  simulate->add_option("--policy", policy_list,
                       "comma-separated: take_all, no_harvest, chatter[:m[:eta]], barrier, barrier*F, barrier@X");
  simulate->add_option("--extinction", opt.extinction, "joint, per_component or both");
  verify->add_option("--grid-csv", grid_csv_path, "per-grid-point CSV");
  verify->add_option("--threshold-scale", opt.threshold_scale, "multiply every solved threshold");
  bounds->add_flag("--with-mc", opt.with_mc, "refine the upper bound with a simulated extinction discount");
  sweep->add_flag("--with-mc", opt.with_mc, "also simulate the optimal policy at each point");
  sweep->add_option("--param", opt.param, "rho, mu, sigma, K, theta, dynamics[i].mu|sigma|K, prices.components[i].theta, x0[i]")
      ->required();
  sweep->add_option("--range", opt.range, "lo:hi:n")->required();

  CLI11_PARSE(app, argc, argv);

  CLI::App* active = app.get_subcommands().front();
  std::stringstream pl(policy_list);
  for (std::string tok; std::getline(pl, tok, ',');)
    if (!tok.empty()) opt.policies.push_back(tok);
  opt.grid_csv = !grid_csv_path.empty();

  std::string text;
  if (!read_file(config_path, text)) {
    std::cerr << "config error: cannot read " << config_path << "\n";
    return harvest::cli::kConfigError;
  }
  const auto res = harvest::cli::run(active->get_name(), text, opt);
  if (res.exit_code != harvest::cli::kOk) {
    std::cerr << res.error << "\n";
    return res.exit_code;
  }
  if (out_path.empty()) {
    std::cout << res.output;
  } else if (!write_file(out_path, res.output)) {
    std::cerr << "cannot write " << out_path << "\n";
    return harvest::cli::kConfigError;
  }
  if (opt.grid_csv && !write_file(grid_csv_path, res.grid_csv)) {
    std::cerr << "cannot write " << grid_csv_path << "\n";
    return harvest::cli::kConfigError;
  }
  return harvest::cli::kOk;
}
