// Runs every acceptance criterion and prints one PASS/FAIL line each.

#include <cstdio>
#include <iostream>

#include <fmt/format.h>

#include "chainsim/acceptance.h"

int main() {
  const auto results = chainsim::run_suite("all", [](const std::string& msg) { fmt::print(stderr, "{}\n", msg); });
  std::cout << chainsim::format_results(results);
  int failed = 0;
  for (const auto& r : results) failed += r.pass ? 0 : 1;
  fmt::print("{}/{} criteria passed\n", results.size() - static_cast<size_t>(failed), results.size());
  return failed == 0 ? 0 : 1;
}
