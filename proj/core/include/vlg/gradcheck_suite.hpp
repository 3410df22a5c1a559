#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vlg/gradcheck.hpp"

namespace vlg {

struct SuiteOptions {
  std::string module;  // empty -> every module
  std::size_t seeds = 10;
  // Adds an operation whose backward pass is scaled by 2 (negative control).
  bool inject_fault = false;
  GradCheckOptions check;
};

struct SuiteCaseResult {
  std::string module;
  std::string op;
  std::size_t seeds = 0;
  bool passed = false;
  std::size_t worst_seed = 0;
  GradCheckReport worst;
};

const std::vector<std::string>& gradcheck_modules();

// Unknown module names throw ConfigError.
std::vector<SuiteCaseResult> run_gradcheck_suite(const SuiteOptions& options);

}  // namespace vlg
