#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "cgl/config.hpp"
#include "cgl/io.hpp"

namespace cgl {

struct CriterionResult {
  int id = 0;
  std::string title;
  bool passed = false;  // the numerical property
  std::string detail;
  double seconds = 0.0;
  double budget_seconds = 0.0;

  bool within_budget() const { return seconds < budget_seconds; }
  bool ok() const { return passed && within_budget(); }
};

struct AcceptanceReport {
  std::vector<CriterionResult> criteria;
  bool all_passed() const;
};

/// One line: `criterion N PASS|FAIL title: detail [time s / budget s]`.
std::string format_line(const CriterionResult& result);

inline constexpr int kCriteriaCount = 10;

/// Criteria 1..9. Evidence files go through `writer` when it is non-null.
CriterionResult run_criterion(int id, const RunConfig& config, RunWriter* writer);

/// Runs criteria 1..9 into `<out>/run1`, repeats them into `<out>/run2` and compares every CSV/JSON
/// byte for byte (criterion 10). Lines are streamed to `progress` as results arrive.
AcceptanceReport run_acceptance(const RunConfig& config, const std::string& out_dir, std::ostream* progress);

}  // namespace cgl
