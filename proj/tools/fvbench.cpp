// fvbench: sweeps kernel realisations, layouts, memory modes and reduction
// strategies over batches of Euler patches and writes one CSV row per
// configuration.

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fvk/bench.hpp"

namespace {

std::vector<int> parseIntList(const std::string& text) {
  std::vector<int> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    const int v = std::stoi(item, &used);
    if (used != item.size()) throw std::invalid_argument("not an integer: '" + item + "'");
    values.push_back(v);
  }
  if (values.empty()) throw std::invalid_argument("empty list");
  return values;
}

template <class Enum, std::size_t N, class Parse>
std::vector<Enum> expandChoice(const std::string& choice, const std::array<Enum, N>& all, Parse parse) {
  if (choice == "all") return {all.begin(), all.end()};
  return {parse(choice)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite volume patch-update kernel benchmark"};
  app.set_help_flag("--help", "Print this help message and exit");  // -h would clash with --h

  int dim = 2;
  int patchSize = 4;
  int patches = 1;
  std::string patchesList;
  std::string realization = "batched";
  std::string layout = "aos";
  std::string memory = "pooled";
  std::string reduction = "off";
  std::string strategy = "tree";
  fvk::BenchConfig base;
  bool verify = false;
  bool extended = false;
  std::string output;

  app.add_option("--dim", dim, "Spatial dimension")->check(CLI::IsMember({2, 3}));
  app.add_option("--patch-size", patchSize, "Volumes per axis per patch")->check(CLI::Range(2, 1 << 16));
  auto* patchesOpt = app.add_option("--patches", patches, "Number of patches T")->check(CLI::PositiveNumber);
  app.add_option("--patches-list", patchesList, "Comma-separated list of patch counts")->excludes(patchesOpt);
  app.add_option("--realization", realization, "Kernel realisation")
      ->check(CLI::IsMember({"sequential", "patch-wise", "batched", "task-graph", "all"}));
  app.add_option("--layout", layout, "Data layout")->check(CLI::IsMember({"aos", "soa", "aosoa", "all"}));
  app.add_option("--memory", memory, "Data transfer mode")
      ->check(CLI::IsMember({"shared", "copy", "pooled", "all"}));
  app.add_option("--reduction", reduction, "Compute the reduced maximum eigenvalue")
      ->check(CLI::IsMember({"on", "off", "both"}));
  app.add_option("--reduction-strategy", strategy, "Reduction strategy")
      ->check(CLI::IsMember({"tree", "shared-max", "serial"}));
  app.add_option("--samples", base.samples, "Timed launches per configuration")->check(CLI::PositiveNumber);
  app.add_option("--workers", base.workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--seed", base.seed, "Seed of the initial field");
  app.add_option("--gamma", base.gamma, "Adiabatic exponent");
  app.add_option("--dt", base.dt, "Time step size");
  app.add_option("--h", base.h, "Volume edge length");
  app.add_option("--workgroup-limit", base.workgroupLimit, "Maximum lanes per patch-wise workgroup")
      ->check(CLI::PositiveNumber);
  app.add_flag("--verify", verify, "Check every configuration against the sequential oracle before timing");
  app.add_flag("--extended", extended, "Add a min_total_s column");
  app.add_option("--output", output, "CSV output path (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    fvk::SweepGrid grid;
    grid.base = base;
    grid.dims = {dim};
    grid.patchSizes = {patchSize};
    grid.patchCounts = patchesList.empty() ? std::vector<int>{patches} : parseIntList(patchesList);
    grid.layouts = expandChoice(layout, fvk::allLayouts, fvk::parseLayout);
    grid.realizations = expandChoice(realization, fvk::allRealizations, fvk::parseRealization);
    grid.transfers = expandChoice(memory, fvk::allTransferModes, fvk::parseTransferMode);
    grid.strategies = {fvk::parseReductionStrategy(strategy)};
    if (reduction == "both") {
      grid.reductions = {false, true};
    } else {
      grid.reductions = {reduction == "on"};
    }

    fvk::SweepOptions options;
    options.verify = verify;
    options.log = &std::cerr;
    const auto records = fvk::runSweep(fvk::expandGrid(grid), options);

    if (output.empty()) {
      fvk::writeCSV(records, std::cout, extended);
    } else {
      fvk::emitCSV(records, output, extended);
    }
  } catch (const std::exception& e) {
    std::cerr << "fvbench: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
