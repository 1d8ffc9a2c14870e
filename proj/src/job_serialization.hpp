#pragma once

// Internal helpers shared by the orchestrator and the artifact reader:
// enum <-> string names and the manifest JSON layout.

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

#include "mosaic/orchestrator.hpp"

namespace mosaic::detail {

std::string mode_name(JobMode mode);
JobMode mode_from(const std::string& name);

std::string kernel_name(KernelKind kernel);
KernelKind kernel_from(const std::string& name);

std::string window_name(WindowKind window);
WindowKind window_from(const std::string& name);

std::string fingerprint_hex(std::uint64_t fingerprint);

// The manifest records everything needed to re-prepare the job except
// worker_count (execution detail; artifacts are byte-identical across worker
// counts) and output_dir (where the artifact itself lives).
nlohmann::json manifest_json(const JobConfig& config, const PreparedJob& prep,
                             const std::vector<double>& rhat);

// Inverse of manifest_json; fills config (output_dir/worker_count left at
// defaults), the recorded fingerprint, per-fragment rhat and fragment count.
void manifest_parse(const nlohmann::json& manifest, JobConfig& config,
                    std::uint64_t& bank_fingerprint, std::vector<double>& rhat,
                    std::size_t& fragment_count);

}  // namespace mosaic::detail
