#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "moran/cli.hpp"

#ifndef MORAN_CATALOG_DIR
#define MORAN_CATALOG_DIR "data/catalog"
#endif

int main(int argc, char** argv) {
  using namespace moran;
  cli::RunConfig cfg;
  std::string catalog;
  std::string theta_grid;
  std::string pairs;
  std::string placement = "uniform";
  std::string mode = "auto";
  std::string format = "json";
  std::size_t realize = 0;
  std::string out;

  CLI::App app{"Assouad-type dimensions of homogeneous Moran and Cantor-like sets"};
  app.require_subcommand(1);
  auto add_common = [&](CLI::App* sub) {
    auto* spec = sub->add_option("--spec", cfg.spec_path, "spec file (JSON)");
    auto* cat = sub->add_option("--catalog", catalog, "built-in spec name, e.g. middle-third");
    spec->excludes(cat);
    sub->add_option("--depth", cfg.depth, "formula depth K (probe depth for validate)")->check(CLI::PositiveNumber);
    sub->add_option("--out", out, "output file (default stdout)");
    sub->add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    sub->add_option("--jobs", cfg.jobs, "worker threads")->check(CLI::PositiveNumber);
  };
  auto add_realization = [&](CLI::App* sub) {
    sub->add_option("--realize", realize, "realization depth D");
    sub->add_option("--placement", placement, "uniform or left")->check(CLI::IsMember({"uniform", "left"}));
    sub->add_option("--mode", mode, "auto, moran or cantor")->check(CLI::IsMember({"auto", "moran", "cantor"}));
    sub->add_option("--seed", cfg.seed, "seed for Cantor-like ratios");
    sub->add_option("--samples", cfg.samples, "sample points per scale pair")->check(CLI::PositiveNumber);
    sub->add_option("--tail", cfg.tail, "tail-window fraction in (0, 1]")->check(CLI::Range(1e-9, 1.0));
  };

  auto* validate = app.add_subcommand("validate", "check class invariants of a spec");
  add_common(validate);
  auto* dim = app.add_subcommand("dim", "Assouad dimension and lower-dimension bound");
  add_common(dim);
  add_realization(dim);
  dim->add_option("--pairs", pairs, "kmax,lmax of the empirical pair grid");
  auto* spectrum = app.add_subcommand("spectrum", "Assouad and lower spectra over a theta grid");
  add_common(spectrum);
  add_realization(spectrum);
  spectrum->add_option("--theta-grid", theta_grid, "a:b:step inside (0,1)");
  spectrum->add_option("--tolerance", cfg.tolerance, "flag rows whose paths differ by more");
  spectrum->add_option("--empirical-tolerance", cfg.empirical_tolerance, "flag empirical values further off");
  auto* verify = app.add_subcommand("verify", "structural, counting, measure and oracle checks");
  add_common(verify);
  add_realization(verify);
  verify->add_flag("--negative-control", cfg.negative_control, "corrupt the realization first (must fail)");
  auto* levels = app.add_subcommand("levels", "export a realization as CSV");
  add_common(levels);
  add_realization(levels);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::kExitFail;
  }

  try {
    cfg.command = app.get_subcommands().front()->get_name();
    if (!catalog.empty()) cfg.spec_path = std::string(MORAN_CATALOG_DIR) + "/" + catalog + ".json";
    if (cfg.spec_path.empty()) throw ValidationError("one of --spec or --catalog is required");
    if (realize > 0) cfg.realize = realize;
    if (!out.empty()) cfg.out = out;
    cfg.format = format == "csv" ? cli::Format::csv : cli::Format::json;
    cfg.placement = placement == "left" ? Placement::left_packed : Placement::uniform_gaps;
    cfg.mode = mode == "moran" ? cli::ModeChoice::moran
               : mode == "cantor" ? cli::ModeChoice::cantor_like
                                  : cli::ModeChoice::automatic;
    if (!theta_grid.empty()) cfg.theta_grid = cli::parse_theta_grid(theta_grid);
    if (!pairs.empty()) {
      const auto comma = pairs.find(',');
      if (comma == std::string::npos) throw ValidationError("--pairs must be kmax,lmax");
      cfg.pair_k_max = std::stoul(pairs.substr(0, comma));
      cfg.pair_l_max = std::stoul(pairs.substr(comma + 1));
      if (cfg.pair_k_max < 1 || cfg.pair_l_max < 1) throw ValidationError("--pairs needs positive values");
    }
  } catch (const moran::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kExitFail;
  } catch (const std::exception& e) {
    std::cerr << "error: bad argument: " << e.what() << '\n';
    return cli::kExitFail;
  }
  return cli::run(cfg, std::cout, std::cerr);
}
