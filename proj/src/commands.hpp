#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "cwqed/io.hpp"
#include "cwqed/observables.hpp"

namespace cwqed::cli {

struct Outcome {
  int exit_code = 0;
  std::vector<std::filesystem::path> files;
  bool cache_hit = false;
};

// Resolves beta, M (from atoms or od), p_in and theta. M is required when need_atoms is set.
PhysParams resolve_params(const io::RunConfig& cfg, bool need_atoms = true);

Order resolve_order(const io::RunConfig& cfg);

// Inclusive atom range from atoms_min/atoms_max; empty ranges are rejected.
std::vector<int> resolve_atom_range(const io::RunConfig& cfg);

Outcome cmd_grid(const io::RunConfig& cfg, std::ostream& log);
Outcome cmd_scan(const io::RunConfig& cfg, std::ostream& log);
Outcome cmd_verify(const io::RunConfig& cfg, std::ostream& log);
Outcome cmd_countrate(const io::RunConfig& cfg, std::ostream& log);
Outcome cmd_cache_gc(const io::RunConfig& cfg, bool all, std::ostream& log);

// Thresholds for the verification errors at a given input flux.
struct VerifyThresholds {
  double cumulant;
  double g3c;
};
VerifyThresholds verify_thresholds(const io::RunConfig& cfg, double p_in);

}  // namespace cwqed::cli
