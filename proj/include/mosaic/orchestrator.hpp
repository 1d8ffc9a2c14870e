#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mosaic/audio.hpp"
#include "mosaic/fragment_bank.hpp"
#include "mosaic/image.hpp"
#include "mosaic/inference.hpp"

namespace mosaic {

enum class JobMode { kImageInplace, kImagePhotographic, kAudio };

// Full description of one mosaicing job. Built from a key=value config file
// plus overrides; see validate_config.
struct JobConfig {
    JobMode mode = JobMode::kImageInplace;
    std::string target_path;
    std::string source_dir;
    std::string output_dir;

    std::size_t image_size = 0;  // resize target/sources to this square side (0 = native)
    std::size_t window = 64;     // in-place tile side
    std::size_t stride = 64;     // in-place tile step
    std::size_t cell_side = 16;  // photographic cell side

    std::size_t nfft = 8192;
    std::size_t hop = 0;  // 0 = nfft (contiguous frames)
    WindowKind window_fn = WindowKind::kRectangular;

    std::uint32_t num_clips = 30;
    double stddev = 0.05;
    std::size_t prefilter_k = 0;  // 0 = full candidate set

    InferenceConfig inference;
    int worker_count = 1;
    std::size_t render_count = 10;
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

// Parses "key = value" lines; '#' starts a comment, blank lines are skipped.
KeyValues parse_key_values(const std::string& text);

// Named bundles of defaults: image-default (1000 warmup), audio-default
// (20000 warmup, sigma in dB), low-compute (10 warmup, single chain).
void apply_preset(JobConfig& config, const std::string& name);

// Returns every constraint violation (empty = valid).
std::vector<std::string> check_config(const JobConfig& config);

// Builds a JobConfig from config text and CLI overrides. Precedence:
// overrides > MOSAIC_WORKERS env var > file keys > preset defaults. Throws
// ValidationError carrying the full violation list.
JobConfig validate_config(const std::string& config_text, const KeyValues& overrides = {});

// Everything run_job derives from the corpus before inference: one problem
// per target fragment plus the bank(s) the selections index into.
struct PreparedJob {
    std::vector<MosaicProblem> problems;
    std::vector<FragmentBank> banks;      // one per tile (in-place) or a single shared bank
    std::vector<std::size_t> bank_index;  // per fragment
    TileGrid grid;                        // image modes
    SpectralFrames source_spectral;       // audio mode: shared complex-frame store
    std::uint64_t bank_fingerprint = 0;

    const FragmentBank& bank_for(std::size_t fragment) const {
        return banks[bank_index[fragment]];
    }
};

PreparedJob prepare_job(const JobConfig& config);

// One line of records.jsonl.
struct FragmentRecord {
    std::uint64_t fragment_id = 0;
    std::uint32_t chain_index = 0;
    std::uint64_t sample_index = 0;
    std::vector<std::uint32_t> slots;

    bool operator==(const FragmentRecord&) const = default;
};

// In-memory form of a persisted artifact (manifest.json + records.jsonl).
struct Artifact {
    JobConfig config;  // as recorded; worker_count/output_dir are not persisted
    std::uint64_t bank_fingerprint = 0;
    std::vector<double> rhat;  // per fragment, NaN when unavailable
    std::vector<std::vector<FragmentRecord>> per_fragment;
};

Artifact read_artifact(const std::string& artifact_dir);

struct RunSummary {
    std::filesystem::path manifest_path;
    std::filesystem::path records_path;
    std::vector<std::filesystem::path> render_paths;
    std::vector<double> rhat;  // per fragment
};

// Runs the whole job: prepare, infer fragment x chain tasks across
// worker_count workers, persist the artifact, render render_count mosaics.
// Any failure removes the partially written outputs before rethrowing.
RunSummary run_job(const JobConfig& config);

// Re-renders from a persisted artifact after checking the corpus fingerprint
// (mismatch = stale-corpus error). Draw r for a fragment depends only on
// (seed, fragment_id, r) and that fragment's records, so renders are
// bit-identical across re-runs and unaffected by other fragments' records.
std::vector<std::filesystem::path> render_from_artifact(const std::string& artifact_dir,
                                                        std::size_t render_count,
                                                        std::uint64_t seed,
                                                        const std::string& out_dir);

// Text report: per-fragment Rhat and mean residual, Rhat min/median/max, and
// the fragments exceeding the 1.05 convergence flag.
std::string diagnostics_report(const std::string& artifact_dir);

}  // namespace mosaic
