#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace eshield::validate {

struct CheckResult {
  std::string name;
  bool passed = false;
  double margin = 0.0;  // worst-case slack toward the bound, positive = pass
  std::string details;
};

std::vector<CheckResult> run_rmt_suite(std::uint64_t seed);
std::vector<CheckResult> run_rbns_suite(std::uint64_t seed);
std::vector<CheckResult> run_metrics_suite(std::uint64_t seed);
std::vector<CheckResult> run_all(std::uint64_t seed);

}  // namespace eshield::validate
