#include "mosaic/orchestrator.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "job_serialization.hpp"
#include "mosaic/errors.hpp"
#include "mosaic/image_io.hpp"
#include "mosaic/parallel.hpp"
#include "mosaic/rng.hpp"

namespace fs = std::filesystem;

namespace mosaic {

namespace {

// Render draws live in their own seed stream, far away from chain indices.
constexpr std::uint64_t kRenderStreamBase = 0x8000000000000000ULL;

std::string trim(const std::string& s) {
    std::size_t begin = 0;
    std::size_t end = s.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
    return s.substr(begin, end - begin);
}

// One config assignment with failures collected instead of thrown.
template <typename Fn>
void try_assign(const std::string& key, const std::string& value, Fn&& parse,
                std::vector<std::string>& issues) {
    try {
        parse();
    } catch (const std::exception& e) {
        issues.push_back(key + " = " + value + ": " + e.what());
    }
}

std::uint64_t parse_u64(const std::string& value) {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument("not an integer");
    return v;
}

std::size_t parse_size(const std::string& value) {
    return static_cast<std::size_t>(parse_u64(value));
}

double parse_real(const std::string& value) {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("not a number");
    return v;
}

// Applies one key to the config; returns false for unknown keys.
bool assign_key(JobConfig& config, const std::string& key, const std::string& value,
                std::vector<std::string>& issues) {
    if (key == "mode") {
        try_assign(key, value, [&] { config.mode = detail::mode_from(value); }, issues);
    } else if (key == "target") {
        config.target_path = value;
    } else if (key == "sources") {
        config.source_dir = value;
    } else if (key == "output") {
        config.output_dir = value;
    } else if (key == "image_size") {
        try_assign(key, value, [&] { config.image_size = parse_size(value); }, issues);
    } else if (key == "window") {
        try_assign(key, value, [&] { config.window = parse_size(value); }, issues);
    } else if (key == "stride") {
        try_assign(key, value, [&] { config.stride = parse_size(value); }, issues);
    } else if (key == "cell_side") {
        try_assign(key, value, [&] { config.cell_side = parse_size(value); }, issues);
    } else if (key == "nfft") {
        try_assign(key, value, [&] { config.nfft = parse_size(value); }, issues);
    } else if (key == "hop") {
        try_assign(key, value, [&] { config.hop = parse_size(value); }, issues);
    } else if (key == "window_fn") {
        try_assign(key, value, [&] { config.window_fn = detail::window_from(value); }, issues);
    } else if (key == "num_clips") {
        try_assign(key, value,
                   [&] { config.num_clips = static_cast<std::uint32_t>(parse_u64(value)); },
                   issues);
    } else if (key == "stddev") {
        try_assign(key, value, [&] { config.stddev = parse_real(value); }, issues);
    } else if (key == "prefilter_k") {
        try_assign(key, value, [&] { config.prefilter_k = parse_size(value); }, issues);
    } else if (key == "kernel") {
        try_assign(key, value,
                   [&] { config.inference.kernel = detail::kernel_from(value); }, issues);
    } else if (key == "num_warmup") {
        try_assign(key, value, [&] { config.inference.num_warmup = parse_u64(value); },
                   issues);
    } else if (key == "num_samples") {
        try_assign(key, value, [&] { config.inference.num_samples = parse_u64(value); },
                   issues);
    } else if (key == "thinning") {
        try_assign(key, value, [&] { config.inference.thinning = parse_u64(value); }, issues);
    } else if (key == "num_chains") {
        try_assign(
            key, value,
            [&] { config.inference.num_chains = static_cast<std::uint32_t>(parse_u64(value)); },
            issues);
    } else if (key == "master_seed") {
        try_assign(key, value, [&] { config.inference.master_seed = parse_u64(value); },
                   issues);
    } else if (key == "worker_count") {
        try_assign(key, value,
                   [&] { config.worker_count = static_cast<int>(parse_u64(value)); }, issues);
    } else if (key == "render_count") {
        try_assign(key, value, [&] { config.render_count = parse_size(value); }, issues);
    } else {
        return false;
    }
    return true;
}

// FNV-1a over a sequence of per-bank fingerprints.
std::uint64_t combine_fingerprints(const std::vector<FragmentBank>& banks) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& bank : banks) {
        std::uint64_t fp = bank.fingerprint();
        for (int i = 0; i < 8; ++i) {
            h ^= (fp >> (8 * i)) & 0xFF;
            h *= 1099511628211ULL;
        }
    }
    return h;
}

std::vector<fs::path> list_source_files(const std::string& dir,
                                        const std::vector<std::string>& extensions) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        if (std::find(extensions.begin(), extensions.end(), ext) != extensions.end()) {
            files.push_back(entry.path());
        }
    }
    // lexicographic filename order defines the source indices
    std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
        return a.filename().string() < b.filename().string();
    });
    if (files.empty()) {
        throw std::invalid_argument("no source files found in " + dir);
    }
    return files;
}

std::vector<std::uint32_t> full_candidate_set(std::size_t rows) {
    std::vector<std::uint32_t> candidates(rows);
    std::iota(candidates.begin(), candidates.end(), 0);
    return candidates;
}

MosaicProblem make_problem(std::vector<double> target, std::vector<std::uint32_t> candidates,
                           const JobConfig& config, std::uint64_t fragment_id) {
    MosaicProblem problem;
    problem.target = std::move(target);
    problem.candidates = std::move(candidates);
    problem.num_clips = config.num_clips;
    problem.stddev = config.stddev;
    problem.fragment_id = fragment_id;
    return problem;
}

void prepare_image_inplace(const JobConfig& config, PreparedJob& prep) {
    const ImageTensor target = load_and_normalize(config.target_path, config.image_size);
    const auto files = list_source_files(config.source_dir, {".png", ".jpg", ".jpeg"});
    std::vector<ImageTensor> sources;
    sources.reserve(files.size());
    for (const auto& file : files) {
        sources.push_back(load_and_normalize(file.string(), config.image_size));
    }

    auto [grid, fragments] = tile_image(target, config.window, config.stride);
    prep.grid = std::move(grid);
    prep.banks.reserve(prep.grid.tiles.size());
    for (std::size_t t = 0; t < prep.grid.tiles.size(); ++t) {
        const auto [row_off, col_off] = prep.grid.tiles[t];
        prep.banks.push_back(build_inplace_bank(sources, row_off, col_off, config.window));
        const FragmentBank& bank = prep.banks.back();

        std::vector<std::uint32_t> candidates =
            config.prefilter_k > 0
                ? topk_candidates(fragments[t], bank, config.prefilter_k, 0.0)
                : full_candidate_set(bank.rows());
        prep.problems.push_back(
            make_problem(std::move(fragments[t]), std::move(candidates), config, t));
        prep.bank_index.push_back(t);
    }
}

void prepare_image_photographic(const JobConfig& config, PreparedJob& prep) {
    const ImageTensor target = load_and_normalize(config.target_path, config.image_size);
    const auto files = list_source_files(config.source_dir, {".png", ".jpg", ".jpeg"});
    std::vector<ImageTensor> sources;
    sources.reserve(files.size());
    for (const auto& file : files) sources.push_back(load_image(file.string()));

    auto [grid, fragments] = tile_image(target, config.cell_side, config.cell_side);
    prep.grid = std::move(grid);
    prep.banks.push_back(build_photographic_bank(sources, config.cell_side));
    const FragmentBank& bank = prep.banks.front();

    for (std::size_t t = 0; t < prep.grid.tiles.size(); ++t) {
        std::vector<std::uint32_t> candidates =
            config.prefilter_k > 0
                ? topk_candidates(fragments[t], bank, config.prefilter_k, 0.0)
                : full_candidate_set(bank.rows());
        prep.problems.push_back(
            make_problem(std::move(fragments[t]), std::move(candidates), config, t));
        prep.bank_index.push_back(0);
    }
}

void prepare_audio(const JobConfig& config, PreparedJob& prep) {
    const AudioClip target = load_wav(config.target_path);
    const auto files = list_source_files(config.source_dir, {".wav"});

    SpectralFrames combined;
    combined.nfft = config.nfft;
    combined.hop = config.hop == 0 ? config.nfft : config.hop;
    combined.window = config.window_fn;
    combined.num_bins = config.nfft / 2 + 1;
    for (const auto& file : files) {
        const AudioClip clip = load_wav(file.string());
        SpectralFrames spectral;
        try {
            spectral = stft_frames(clip, config.nfft, combined.hop, config.window_fn);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(file.string() + ": " + e.what());
        }
        combined.num_frames += spectral.num_frames;
        combined.frames.insert(combined.frames.end(), spectral.frames.begin(),
                               spectral.frames.end());
    }

    const double db_reference = max_magnitude(combined);
    if (!(db_reference > 0.0)) {
        throw NumericalError("silent source corpus: no dB reference magnitude");
    }
    apply_db_scaling(combined, db_reference);
    prep.source_spectral = std::move(combined);
    prep.banks.push_back(magnitude_bank(prep.source_spectral));
    const FragmentBank& bank = prep.banks.front();

    SpectralFrames target_spectral =
        stft_frames(target, config.nfft, prep.source_spectral.hop, config.window_fn);
    apply_db_scaling(target_spectral, db_reference);

    for (std::size_t t = 0; t < target_spectral.num_frames; ++t) {
        const auto row = target_spectral.magnitude_row(t);
        std::vector<double> observation(row.begin(), row.end());
        std::vector<std::uint32_t> candidates =
            config.prefilter_k > 0
                ? topk_candidates(observation, bank, config.prefilter_k,
                                  -prep.source_spectral.db_floor)
                : full_candidate_set(bank.rows());
        prep.problems.push_back(
            make_problem(std::move(observation), std::move(candidates), config, t));
        prep.bank_index.push_back(0);
    }
}

// Pool of stored slot arrays for one fragment, in (chain, sample) order.
using RenderPool = std::vector<const std::vector<std::uint32_t>*>;

const std::vector<std::uint32_t>& draw_slots(const RenderPool& pool, std::uint64_t seed,
                                             std::uint64_t fragment_id,
                                             std::size_t render_index) {
    Rng rng(derive_seed(seed, fragment_id, kRenderStreamBase + render_index));
    return *pool[rng.uniform_index(pool.size())];
}

std::vector<fs::path> render_outputs(const PreparedJob& prep, const JobConfig& config,
                                     const std::vector<RenderPool>& pools, std::size_t count,
                                     std::uint64_t seed, const fs::path& out_dir,
                                     std::vector<fs::path>* created) {
    std::vector<fs::path> paths;
    for (std::size_t r = 0; r < count; ++r) {
        char name[32];
        std::snprintf(name, sizeof(name), "render_%03zu.%s", r,
                      config.mode == JobMode::kAudio ? "wav" : "png");
        const fs::path path = out_dir / name;
        if (created) created->push_back(path);

        if (config.mode == JobMode::kAudio) {
            std::vector<Selection> selections;
            selections.reserve(pools.size());
            for (std::size_t f = 0; f < pools.size(); ++f) {
                selections.push_back(
                    Selection{draw_slots(pools[f], seed, prep.problems[f].fragment_id, r)});
            }
            write_wav(path.string(),
                      reconstruct_audio(selections, prep.source_spectral, kProjectSampleRate));
        } else {
            std::vector<std::vector<double>> tiles;
            tiles.reserve(pools.size());
            for (std::size_t f = 0; f < pools.size(); ++f) {
                const auto& slots =
                    draw_slots(pools[f], seed, prep.problems[f].fragment_id, r);
                tiles.push_back(average_clips(Selection{slots}, prep.bank_for(f)));
            }
            write_png(path.string(), stitch_tiles(prep.grid, tiles));
        }
        paths.push_back(path);
    }
    return paths;
}

void write_records_file(const fs::path& path,
                        const std::vector<PosteriorSamples>& posteriors) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open output file: " + path.string());
    for (const auto& posterior : posteriors) {
        for (const auto& chain : posterior.chains) {
            for (std::size_t s = 0; s < chain.selections.size(); ++s) {
                out << "{\"fragment\":" << posterior.fragment_id
                    << ",\"chain\":" << chain.chain_index << ",\"sample\":" << s
                    << ",\"slots\":[";
                const auto& slots = chain.selections[s].slots;
                for (std::size_t i = 0; i < slots.size(); ++i) {
                    if (i) out << ',';
                    out << slots[i];
                }
                out << "]}\n";
            }
        }
    }
    if (!out) throw std::runtime_error("failed to write records: " + path.string());
}

}  // namespace

KeyValues parse_key_values(const std::string& text) {
    KeyValues kv;
    std::vector<std::string> issues;
    std::istringstream stream(text);
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(stream, line)) {
        ++line_number;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            issues.push_back("line " + std::to_string(line_number) +
                             ": expected key = value, got '" + line + "'");
            continue;
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            issues.push_back("line " + std::to_string(line_number) + ": empty key");
            continue;
        }
        kv.emplace_back(key, value);
    }
    if (!issues.empty()) throw ValidationError(std::move(issues));
    return kv;
}

void apply_preset(JobConfig& config, const std::string& name) {
    if (name == "image-default") {
        config.inference.kernel = KernelKind::kGibbs;
        config.inference.num_warmup = 1000;
        config.inference.num_samples = 100;
        config.inference.thinning = 1;
        config.inference.num_chains = 2;
        config.num_clips = 30;
        config.stddev = 0.05;
        config.render_count = 10;
    } else if (name == "audio-default") {
        config.inference.kernel = KernelKind::kGibbs;
        config.inference.num_warmup = 20000;
        config.inference.num_samples = 100;
        config.inference.thinning = 1;
        config.inference.num_chains = 2;
        config.num_clips = 30;
        config.stddev = 3.0;  // dB-scale observations
        config.prefilter_k = 200;
        config.nfft = 8192;
        config.hop = 0;
        config.window_fn = WindowKind::kRectangular;
        config.render_count = 10;
    } else if (name == "low-compute") {
        config.inference.num_warmup = 10;
        config.inference.num_samples = 10;
        config.inference.thinning = 1;
        config.inference.num_chains = 1;
        config.render_count = 3;
    } else {
        throw std::invalid_argument("unknown preset '" + name +
                                    "' (expected image-default, audio-default or low-compute)");
    }
}

std::vector<std::string> check_config(const JobConfig& config) {
    std::vector<std::string> issues;

    if (config.target_path.empty()) {
        issues.push_back("target: no target path configured");
    } else if (!fs::exists(config.target_path)) {
        issues.push_back("target: file does not exist: " + config.target_path);
    }
    if (config.source_dir.empty()) {
        issues.push_back("sources: no source directory configured");
    } else if (!fs::is_directory(config.source_dir)) {
        issues.push_back("sources: not a directory: " + config.source_dir);
    }
    if (config.output_dir.empty()) {
        issues.push_back("output: no output directory configured");
    }

    if (!(config.stddev > 0.0)) issues.push_back("stddev must be positive");
    if (config.num_clips < 1) issues.push_back("num_clips must be >= 1");
    if (config.worker_count < 1) issues.push_back("worker_count must be >= 1");
    if (config.inference.num_samples < 1) issues.push_back("num_samples must be >= 1");
    if (config.inference.thinning < 1) issues.push_back("thinning must be >= 1");
    if (config.inference.num_chains < 1) issues.push_back("num_chains must be >= 1");

    if (config.mode == JobMode::kImageInplace) {
        if (config.window < 1) issues.push_back("window must be >= 1");
        if (config.stride < 1) {
            issues.push_back("stride must be >= 1");
        } else if (config.stride > config.window) {
            issues.push_back("stride " + std::to_string(config.stride) +
                             " exceeds window " + std::to_string(config.window));
        }
    } else if (config.mode == JobMode::kImagePhotographic) {
        if (config.cell_side < 1) issues.push_back("cell_side must be >= 1");
    } else {
        if (config.nfft < 2) issues.push_back("nfft must be >= 2");
        if (config.hop > config.nfft) {
            issues.push_back("hop " + std::to_string(config.hop) + " exceeds nfft " +
                             std::to_string(config.nfft));
        }
    }
    return issues;
}

JobConfig validate_config(const std::string& config_text, const KeyValues& overrides) {
    const KeyValues file_kv = parse_key_values(config_text);

    JobConfig config;
    std::vector<std::string> issues;

    // preset first so later keys can override it; an override preset wins
    std::string preset;
    for (const auto& [key, value] : file_kv) {
        if (key == "preset") preset = value;
    }
    for (const auto& [key, value] : overrides) {
        if (key == "preset") preset = value;
    }
    if (!preset.empty()) {
        try {
            apply_preset(config, preset);
        } catch (const std::exception& e) {
            issues.push_back(std::string("preset: ") + e.what());
        }
    }

    for (const auto& [key, value] : file_kv) {
        if (key == "preset") continue;
        if (!assign_key(config, key, value, issues)) {
            issues.push_back("unknown config key '" + key + "'");
        }
    }

    if (const char* env = std::getenv("MOSAIC_WORKERS")) {
        try_assign("MOSAIC_WORKERS", env,
                   [&] { config.worker_count = static_cast<int>(parse_u64(env)); }, issues);
    }

    for (const auto& [key, value] : overrides) {
        if (key == "preset") continue;
        if (!assign_key(config, key, value, issues)) {
            issues.push_back("unknown config key '" + key + "'");
        }
    }

    auto violations = check_config(config);
    issues.insert(issues.end(), violations.begin(), violations.end());
    if (!issues.empty()) throw ValidationError(std::move(issues));
    return config;
}

PreparedJob prepare_job(const JobConfig& config) {
    PreparedJob prep;
    switch (config.mode) {
        case JobMode::kImageInplace:
            prepare_image_inplace(config, prep);
            break;
        case JobMode::kImagePhotographic:
            prepare_image_photographic(config, prep);
            break;
        case JobMode::kAudio:
            prepare_audio(config, prep);
            break;
    }
    if (prep.problems.empty()) {
        throw std::invalid_argument("job produced no target fragments");
    }
    prep.bank_fingerprint = combine_fingerprints(prep.banks);
    return prep;
}

RunSummary run_job(const JobConfig& config) {
    if (auto issues = check_config(config); !issues.empty()) {
        throw ValidationError(std::move(issues));
    }

    const PreparedJob prep = prepare_job(config);
    const std::size_t num_fragments = prep.problems.size();
    const std::uint32_t num_chains = config.inference.num_chains;

    // fragment x chain task grid; every task writes its own pre-allocated slot
    std::vector<std::vector<ChainTrace>> traces(num_fragments);
    for (auto& t : traces) t.resize(num_chains);
    parallel_for(num_fragments * num_chains, config.worker_count, [&](std::size_t task) {
        const std::size_t f = task / num_chains;
        const auto c = static_cast<std::uint32_t>(task % num_chains);
        traces[f][c] = run_chain(prep.problems[f], prep.bank_for(f), config.inference, c);
    });

    std::vector<PosteriorSamples> posteriors;
    posteriors.reserve(num_fragments);
    for (std::size_t f = 0; f < num_fragments; ++f) {
        posteriors.push_back(assemble_posterior(prep.problems[f].fragment_id,
                                                std::move(traces[f]), config.inference));
    }

    RunSummary summary;
    summary.rhat.reserve(num_fragments);
    for (const auto& p : posteriors) summary.rhat.push_back(p.split_rhat);

    const fs::path out_dir(config.output_dir);
    std::vector<fs::path> created;
    try {
        fs::create_directories(out_dir);

        summary.manifest_path = out_dir / "manifest.json";
        created.push_back(summary.manifest_path);
        {
            std::ofstream manifest_file(summary.manifest_path, std::ios::trunc);
            if (!manifest_file) {
                throw std::runtime_error("cannot open output file: " +
                                         summary.manifest_path.string());
            }
            manifest_file << detail::manifest_json(config, prep, summary.rhat).dump(2)
                          << '\n';
            if (!manifest_file) {
                throw std::runtime_error("failed to write manifest: " +
                                         summary.manifest_path.string());
            }
        }

        summary.records_path = out_dir / "records.jsonl";
        created.push_back(summary.records_path);
        write_records_file(summary.records_path, posteriors);

        std::vector<RenderPool> pools(num_fragments);
        for (std::size_t f = 0; f < num_fragments; ++f) {
            for (const auto& chain : posteriors[f].chains) {
                for (const auto& selection : chain.selections) {
                    pools[f].push_back(&selection.slots);
                }
            }
        }
        summary.render_paths =
            render_outputs(prep, config, pools, config.render_count,
                           config.inference.master_seed, out_dir, &created);
    } catch (...) {
        // fail-fast: a partial artifact must not look usable
        for (const auto& path : created) {
            std::error_code ec;
            fs::remove(path, ec);
        }
        throw;
    }
    return summary;
}

std::vector<fs::path> render_from_artifact(const std::string& artifact_dir,
                                           std::size_t render_count, std::uint64_t seed,
                                           const std::string& out_dir) {
    const Artifact artifact = read_artifact(artifact_dir);
    const PreparedJob prep = prepare_job(artifact.config);
    if (prep.bank_fingerprint != artifact.bank_fingerprint) {
        throw std::runtime_error(
            "stale corpus: current bank fingerprint " +
            detail::fingerprint_hex(prep.bank_fingerprint) + " does not match the artifact's " +
            detail::fingerprint_hex(artifact.bank_fingerprint));
    }
    if (artifact.per_fragment.size() != prep.problems.size()) {
        throw std::runtime_error("artifact fragment count " +
                                 std::to_string(artifact.per_fragment.size()) +
                                 " does not match the corpus geometry's " +
                                 std::to_string(prep.problems.size()));
    }

    std::vector<RenderPool> pools(artifact.per_fragment.size());
    for (std::size_t f = 0; f < artifact.per_fragment.size(); ++f) {
        if (artifact.per_fragment[f].empty()) {
            throw std::runtime_error("fragment " + std::to_string(f) +
                                     " has no stored records");
        }
        const std::size_t rows = prep.bank_for(f).rows();
        for (const auto& record : artifact.per_fragment[f]) {
            for (std::uint32_t s : record.slots) {
                if (s >= rows) {
                    throw std::runtime_error("record for fragment " + std::to_string(f) +
                                             " selects row " + std::to_string(s) +
                                             " outside the bank (" + std::to_string(rows) +
                                             " rows)");
                }
            }
            pools[f].push_back(&record.slots);
        }
    }

    fs::create_directories(out_dir);
    return render_outputs(prep, artifact.config, pools, render_count, seed, out_dir,
                          nullptr);
}

std::string diagnostics_report(const std::string& artifact_dir) {
    const Artifact artifact = read_artifact(artifact_dir);
    const PreparedJob prep = prepare_job(artifact.config);
    if (prep.bank_fingerprint != artifact.bank_fingerprint) {
        throw std::runtime_error(
            "stale corpus: current bank fingerprint " +
            detail::fingerprint_hex(prep.bank_fingerprint) + " does not match the artifact's " +
            detail::fingerprint_hex(artifact.bank_fingerprint));
    }

    const std::size_t num_fragments = artifact.per_fragment.size();
    std::ostringstream report;
    report << "mosaic diagnostics\n";
    report << "mode: " << detail::mode_name(artifact.config.mode) << '\n';
    report << "fragments: " << num_fragments << '\n';
    report << "chains per fragment: " << artifact.config.inference.num_chains << '\n';

    const bool have_rhat = artifact.config.inference.num_chains >= 2;
    if (!have_rhat) {
        report << "rhat: unavailable (single chain)\n";
    } else {
        std::vector<double> sorted;
        for (double r : artifact.rhat) {
            if (!std::isnan(r)) sorted.push_back(r);
        }
        std::sort(sorted.begin(), sorted.end());
        if (!sorted.empty()) {
            report << "rhat: min " << sorted.front() << " median "
                   << sorted[sorted.size() / 2] << " max " << sorted.back() << '\n';
        }
        std::vector<std::size_t> flagged;
        for (std::size_t f = 0; f < artifact.rhat.size(); ++f) {
            if (!std::isnan(artifact.rhat[f]) && artifact.rhat[f] > 1.05) flagged.push_back(f);
        }
        report << "flagged (rhat > 1.05): ";
        if (flagged.empty()) {
            report << "none\n";
        } else {
            for (std::size_t i = 0; i < flagged.size(); ++i) {
                if (i) report << ' ';
                report << flagged[i];
            }
            report << '\n';
        }
    }

    for (std::size_t f = 0; f < num_fragments; ++f) {
        const MosaicProblem& problem = prep.problems[f];
        const FragmentBank& bank = prep.bank_for(f);
        const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(bank.dim()));

        double mean_residual = 0.0;
        for (const auto& record : artifact.per_fragment[f]) {
            const auto average = average_clips(Selection{record.slots}, bank);
            double sq = 0.0;
            for (std::size_t d = 0; d < average.size(); ++d) {
                const double diff = problem.target[d] - average[d];
                sq += diff * diff;
            }
            mean_residual += std::sqrt(sq) * inv_sqrt_d;
        }
        if (!artifact.per_fragment[f].empty()) {
            mean_residual /= static_cast<double>(artifact.per_fragment[f].size());
        }

        report << "fragment " << f << ": rhat ";
        if (f < artifact.rhat.size() && !std::isnan(artifact.rhat[f])) {
            report << artifact.rhat[f];
        } else {
            report << "n/a";
        }
        report << " mean_residual " << mean_residual << " records "
               << artifact.per_fragment[f].size() << '\n';
    }
    return report.str();
}

}  // namespace mosaic
