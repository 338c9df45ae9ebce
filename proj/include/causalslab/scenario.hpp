#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "causalslab/sem_model.hpp"

namespace causalslab {

/// Ground-truth parameters plus the confounder pairs left free for inference.
struct Scenario {
  std::string name;
  std::string description;
  std::vector<std::string> variables;  // model order
  SemParameters params;
  ConfounderLayout free_pairs;

  CovarianceMatrix covariance() const { return implied_covariance(params); }
};

/// The six three-variable benchmark settings "a" .. "f": b21 = b32 = 1, unit
/// noise variances and a single bow over (X2, X3), with
///   a: b31 = 0,    c = (0, 0)     b: b31 = 0,    c = (1, 1)
///   c: b31 = 0.05, c = (0, 0)     d: b31 = 0.05, c = (1, 1)
///   e: b31 = 1,    c = (1, 1)     f: b31 = 1,    c = (1, 2)
Scenario named_scenario(std::string_view name);
std::vector<std::string> scenario_names();

/// Scenario document:
///   {"name": str?, "description": str?, "n": int,
///    "ordering": [names]?,             // defaults to X1..Xn
///    "B": [[i, j, value], ...],        // 1-based, i > j
///    "C": [[pair_j, pair_i, row, value], ...],
///    "V": [v1, ..., vn],
///    "free_pairs": [[j, i], ...]?}     // defaults to every pair
Scenario scenario_from_json(const nlohmann::json& doc);
Scenario load_scenario_file(const std::string& path);
nlohmann::json scenario_to_json(const Scenario& scenario);

/// A named scenario if `name_or_path` is one of scenario_names(), otherwise a
/// scenario document on disk.
Scenario resolve_scenario(const std::string& name_or_path);

/// Parses "2-3,1-3" (1-based) or "all" / "none".
ConfounderLayout parse_pairs(std::string_view text, int n);
std::string format_pairs(const ConfounderLayout& layout);

}  // namespace causalslab
