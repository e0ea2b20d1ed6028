#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace tj_accept {

struct CriterionResult {
  std::string name;
  bool pass = false;
  std::vector<std::string> failures;  // empty when pass
  std::string summary;
  double seconds = 0.0;
};

CriterionResult schema_fidelity();
CriterionResult agreement_oracles();
CriterionResult reward_arithmetic();
CriterionResult perturbation_mechanics();
CriterionResult reference_specificity();
CriterionResult statistics_oracles();
CriterionResult closed_loop_direction();
CriterionResult lambda_sweep_shape();
/// Runs evaluate, perturb, loop and stats twice below `work_dir`.
CriterionResult end_to_end_determinism(const std::filesystem::path& work_dir);

std::vector<CriterionResult> run_all(const std::filesystem::path& work_dir);

}  // namespace tj_accept
