// Prints one PASS/FAIL line per acceptance criterion; exit status 0 iff all pass.
#include "mevt/acceptance.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  mevt::AcceptanceOptions opt;
  int only = 0;
  app.add_option("--only", only, "Run a single criterion by number")->check(CLI::Range(0, 11));
  app.add_option("--seed", opt.seed, "Base seed for randomized instances");
  CLI11_PARSE(app, argc, argv);

  bool all = true;
  mevt::run_acceptance(opt, only, [&all](const mevt::CriterionResult& r) {
    std::cout << mevt::format_result(r) << std::endl;
    all = all && r.passed;
  });
  return all ? 0 : 1;
}
