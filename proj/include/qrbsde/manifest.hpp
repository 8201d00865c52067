// Run manifests: a JSON record of everything a run depends on (resolved
// configuration, its hash, seed, version) together with the theoretical
// constants and the measured-vs-formula check verdicts. Manifests carry no
// timing, so reruns produce byte-identical files.
#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "json.hpp"

#include "qrbsde/convergence.hpp"
#include "qrbsde/presets.hpp"
#include "qrbsde/reflected.hpp"

namespace qrbsde {

std::uint64_t fnv1a64(std::string_view s);
std::string hex64(std::uint64_t v);

// Serializable view of the resolved configuration (constants only; function
// bodies are identified by the preset name or the embedded config text).
nlohmann::json config_json(const RunConfig& cfg);

// config + config_hash + seed + version + resolved grid.
nlohmann::json manifest_root(const RunConfig& cfg, const SpaceGrid& gx);

// Theoretical constants for the configured problem.
nlohmann::json theoretical_json(const RunConfig& cfg);

// Measured diagnostics of a discrete solve: the per-date Lipschitz sequence
// against its envelope, per-interval z maxima against the window bounds, the
// sup of |u| against the y bound, with one verdict per check.
nlohmann::json discrete_checks_json(const RunConfig& cfg, const DiscreteSolution& disc);

// Measured diagnostics of the reference solve.
nlohmann::json reference_checks_json(const RunConfig& cfg, const ContinuousReference& ref);

// Fitted slopes, theoretical exponents, per-n records, and warnings.
nlohmann::json sweep_summary_json(const ConvergenceReport& rep);

// dump(2) with a trailing newline.
void write_json_file(const std::string& path, const nlohmann::json& j);

}  // namespace qrbsde
