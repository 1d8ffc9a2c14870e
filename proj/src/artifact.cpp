#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "job_serialization.hpp"
#include "mosaic/orchestrator.hpp"

namespace mosaic {

namespace detail {

std::string mode_name(JobMode mode) {
    switch (mode) {
        case JobMode::kImageInplace:
            return "image-inplace";
        case JobMode::kImagePhotographic:
            return "image-photographic";
        case JobMode::kAudio:
            return "audio";
    }
    throw std::invalid_argument("unknown job mode");
}

JobMode mode_from(const std::string& name) {
    if (name == "image-inplace") return JobMode::kImageInplace;
    if (name == "image-photographic") return JobMode::kImagePhotographic;
    if (name == "audio") return JobMode::kAudio;
    throw std::invalid_argument("unknown mode '" + name +
                                "' (expected image-inplace, image-photographic or audio)");
}

std::string kernel_name(KernelKind kernel) {
    return kernel == KernelKind::kGibbs ? "gibbs" : "rwmh";
}

KernelKind kernel_from(const std::string& name) {
    if (name == "gibbs") return KernelKind::kGibbs;
    if (name == "rwmh") return KernelKind::kRwmh;
    throw std::invalid_argument("unknown kernel '" + name + "' (expected gibbs or rwmh)");
}

std::string window_name(WindowKind window) {
    return window == WindowKind::kRectangular ? "rect" : "hann";
}

WindowKind window_from(const std::string& name) {
    if (name == "rect") return WindowKind::kRectangular;
    if (name == "hann") return WindowKind::kHann;
    throw std::invalid_argument("unknown window function '" + name +
                                "' (expected rect or hann)");
}

std::string fingerprint_hex(std::uint64_t fingerprint) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "0x%016llx",
                  static_cast<unsigned long long>(fingerprint));
    return buf;
}

namespace {

std::uint64_t fingerprint_from_hex(const std::string& hex) {
    if (hex.size() != 18 || hex[0] != '0' || hex[1] != 'x') {
        throw std::runtime_error("malformed bank fingerprint '" + hex + "'");
    }
    return std::stoull(hex.substr(2), nullptr, 16);
}

nlohmann::json rhat_entry(double value) {
    if (std::isnan(value)) return nullptr;
    if (std::isinf(value)) return "inf";
    return value;
}

double rhat_from(const nlohmann::json& entry) {
    if (entry.is_null()) return std::numeric_limits<double>::quiet_NaN();
    if (entry.is_string()) return std::numeric_limits<double>::infinity();
    return entry.get<double>();
}

}  // namespace

nlohmann::json manifest_json(const JobConfig& config, const PreparedJob& prep,
                             const std::vector<double>& rhat) {
    nlohmann::json geometry;
    switch (config.mode) {
        case JobMode::kImageInplace:
            geometry["window"] = config.window;
            geometry["stride"] = config.stride;
            break;
        case JobMode::kImagePhotographic:
            geometry["cell_side"] = config.cell_side;
            break;
        case JobMode::kAudio:
            geometry["nfft"] = config.nfft;
            geometry["hop"] = prep.source_spectral.hop;
            geometry["window_fn"] = window_name(config.window_fn);
            geometry["sample_rate"] = kProjectSampleRate;
            geometry["db_reference"] = prep.source_spectral.db_reference;
            geometry["db_floor"] = prep.source_spectral.db_floor;
            break;
    }

    nlohmann::json rhat_json = nlohmann::json::array();
    for (double r : rhat) rhat_json.push_back(rhat_entry(r));

    return nlohmann::json{
        {"format", "mosaic-artifact-v1"},
        {"mode", mode_name(config.mode)},
        {"target", config.target_path},
        {"sources", config.source_dir},
        {"image_size", config.image_size},
        {"geometry", geometry},
        {"model",
         {{"num_clips", config.num_clips},
          {"stddev", config.stddev},
          {"prefilter_k", config.prefilter_k}}},
        {"inference",
         {{"kernel", kernel_name(config.inference.kernel)},
          {"num_warmup", config.inference.num_warmup},
          {"num_samples", config.inference.num_samples},
          {"thinning", config.inference.thinning},
          {"num_chains", config.inference.num_chains},
          {"master_seed", config.inference.master_seed}}},
        {"render_count", config.render_count},
        {"fragment_count", prep.problems.size()},
        {"bank_fingerprint", fingerprint_hex(prep.bank_fingerprint)},
        {"rhat", rhat_json},
    };
}

void manifest_parse(const nlohmann::json& manifest, JobConfig& config,
                    std::uint64_t& bank_fingerprint, std::vector<double>& rhat,
                    std::size_t& fragment_count) {
    if (manifest.at("format").get<std::string>() != "mosaic-artifact-v1") {
        throw std::runtime_error("unsupported artifact format '" +
                                 manifest.at("format").get<std::string>() + "'");
    }
    config = JobConfig{};
    config.mode = mode_from(manifest.at("mode").get<std::string>());
    config.target_path = manifest.at("target").get<std::string>();
    config.source_dir = manifest.at("sources").get<std::string>();
    config.image_size = manifest.at("image_size").get<std::size_t>();

    const auto& geometry = manifest.at("geometry");
    switch (config.mode) {
        case JobMode::kImageInplace:
            config.window = geometry.at("window").get<std::size_t>();
            config.stride = geometry.at("stride").get<std::size_t>();
            break;
        case JobMode::kImagePhotographic:
            config.cell_side = geometry.at("cell_side").get<std::size_t>();
            break;
        case JobMode::kAudio:
            config.nfft = geometry.at("nfft").get<std::size_t>();
            config.hop = geometry.at("hop").get<std::size_t>();
            config.window_fn = window_from(geometry.at("window_fn").get<std::string>());
            break;
    }

    const auto& model = manifest.at("model");
    config.num_clips = model.at("num_clips").get<std::uint32_t>();
    config.stddev = model.at("stddev").get<double>();
    config.prefilter_k = model.at("prefilter_k").get<std::size_t>();

    const auto& inference = manifest.at("inference");
    config.inference.kernel = kernel_from(inference.at("kernel").get<std::string>());
    config.inference.num_warmup = inference.at("num_warmup").get<std::uint64_t>();
    config.inference.num_samples = inference.at("num_samples").get<std::uint64_t>();
    config.inference.thinning = inference.at("thinning").get<std::uint64_t>();
    config.inference.num_chains = inference.at("num_chains").get<std::uint32_t>();
    config.inference.master_seed = inference.at("master_seed").get<std::uint64_t>();

    config.render_count = manifest.at("render_count").get<std::size_t>();
    fragment_count = manifest.at("fragment_count").get<std::size_t>();
    bank_fingerprint = fingerprint_from_hex(manifest.at("bank_fingerprint").get<std::string>());

    rhat.clear();
    for (const auto& entry : manifest.at("rhat")) rhat.push_back(rhat_from(entry));
}

}  // namespace detail

Artifact read_artifact(const std::string& artifact_dir) {
    namespace fs = std::filesystem;
    const fs::path dir(artifact_dir);
    const fs::path manifest_path = dir / "manifest.json";
    const fs::path records_path = dir / "records.jsonl";

    std::ifstream manifest_file(manifest_path);
    if (!manifest_file) {
        throw std::runtime_error("cannot open artifact manifest: " + manifest_path.string());
    }
    nlohmann::json manifest;
    try {
        manifest_file >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed manifest " + manifest_path.string() + ": " +
                                 e.what());
    }

    Artifact artifact;
    std::size_t fragment_count = 0;
    try {
        detail::manifest_parse(manifest, artifact.config, artifact.bank_fingerprint,
                               artifact.rhat, fragment_count);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed manifest " + manifest_path.string() + ": " +
                                 e.what());
    }

    std::ifstream records_file(records_path);
    if (!records_file) {
        throw std::runtime_error("cannot open artifact records: " + records_path.string());
    }
    artifact.per_fragment.resize(fragment_count);

    std::string line;
    std::size_t line_number = 0;
    while (std::getline(records_file, line)) {
        ++line_number;
        if (line.empty()) continue;
        FragmentRecord record;
        try {
            const nlohmann::json j = nlohmann::json::parse(line);
            record.fragment_id = j.at("fragment").get<std::uint64_t>();
            record.chain_index = j.at("chain").get<std::uint32_t>();
            record.sample_index = j.at("sample").get<std::uint64_t>();
            record.slots = j.at("slots").get<std::vector<std::uint32_t>>();
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error("malformed record at " + records_path.string() + ":" +
                                     std::to_string(line_number) + ": " + e.what());
        }
        if (record.fragment_id >= fragment_count) {
            throw std::runtime_error("record at " + records_path.string() + ":" +
                                     std::to_string(line_number) + " names fragment " +
                                     std::to_string(record.fragment_id) + " of " +
                                     std::to_string(fragment_count));
        }
        if (record.slots.size() != artifact.config.num_clips) {
            throw std::runtime_error("record at " + records_path.string() + ":" +
                                     std::to_string(line_number) + " has " +
                                     std::to_string(record.slots.size()) +
                                     " slots, expected " +
                                     std::to_string(artifact.config.num_clips));
        }
        artifact.per_fragment[record.fragment_id].push_back(std::move(record));
    }
    return artifact;
}

}  // namespace mosaic
