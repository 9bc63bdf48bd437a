#pragma once
/// @file acceptance.hpp
/// @brief The fifteen acceptance criteria, each run at its stated tolerance.

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

namespace cmc {

/// @brief Outcome of one criterion.
struct CriterionResult {
  int id = 0;
  std::string title;
  bool pass = false;
  std::string detail;  ///< measured quantities
  double seconds = 0.0;
  /// @brief "PASS [ 3] title: detail (1.2 s)".
  std::string line() const;
};

struct AcceptanceOptions {
  std::string graph_dir = CMC_GRAPH_DIR;  ///< bundled example graphs
  std::vector<int> only;                  ///< criteria to run (empty = all)
};

/// @brief Number of criteria.
constexpr int acceptance_count = 15;

/// @brief Runs one criterion; internal errors are reported as a failure with the message.
/// @throws Error(Parameter) for an id outside 1..15.
CriterionResult run_criterion(int id, const AcceptanceOptions& opts = {});

/// @brief Runs the selected criteria in order, writing each line to out as it completes.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts, std::ostream* out = nullptr);

nlohmann::json to_json(const std::vector<CriterionResult>& results);

}  // namespace cmc
