// Runs every acceptance criterion at full size and prints one line each.
#include <iostream>

#include "bwvi/verification.hpp"

int main() {
  int failed = 0;
  bwvi::run_suite({bwvi::VerifyLevel::Full, bwvi::Mutation::None},
                  [&](const bwvi::CheckResult& r) {
                    std::cout << bwvi::format_result(r) << std::endl;
                    if (!r.passed) ++failed;
                  });
  std::cout << (failed == 0 ? "acceptance: all criteria passed"
                            : "acceptance: " + std::to_string(failed) +
                                  " criterion/criteria failed")
            << std::endl;
  return failed == 0 ? 0 : 1;
}
