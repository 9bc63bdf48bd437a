#include <iostream>

#include "cmc/acceptance.hpp"

int main() {
  const auto results = cmc::run_acceptance({}, &std::cout);
  int failed = 0;
  for (const auto& r : results) failed += r.pass ? 0 : 1;
  std::cout << results.size() - failed << " of " << results.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
