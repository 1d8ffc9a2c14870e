// Command-line front end: run a mosaicing job, re-render or inspect a stored
// artifact, or print the exact selection posterior for a tiny problem.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "mosaic/errors.hpp"
#include "mosaic/inference.hpp"
#include "mosaic/orchestrator.hpp"

namespace {

std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw mosaic::ValidationError({"cannot open config file: " + path});
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Turns leftover CLI tokens into config overrides. Accepts "--key value" and
// "--key=value"; anything else is a usage error.
mosaic::KeyValues parse_overrides(const std::vector<std::string>& extras) {
    mosaic::KeyValues overrides;
    for (std::size_t i = 0; i < extras.size(); ++i) {
        const std::string& token = extras[i];
        if (token.rfind("--", 0) != 0 || token.size() <= 2) {
            throw mosaic::ValidationError(
                {"unexpected argument '" + token + "' (overrides are --key value)"});
        }
        const std::string body = token.substr(2);
        if (const auto eq = body.find('='); eq != std::string::npos) {
            overrides.emplace_back(body.substr(0, eq), body.substr(eq + 1));
        } else {
            if (i + 1 >= extras.size()) {
                throw mosaic::ValidationError({"missing value for override --" + body});
            }
            overrides.emplace_back(body, extras[++i]);
        }
    }
    return overrides;
}

int command_run(const std::string& config_path, const std::vector<std::string>& extras) {
    const mosaic::JobConfig config =
        mosaic::validate_config(read_text_file(config_path), parse_overrides(extras));
    const mosaic::RunSummary summary = mosaic::run_job(config);
    std::cout << "manifest: " << summary.manifest_path.string() << '\n';
    std::cout << "records:  " << summary.records_path.string() << '\n';
    for (const auto& path : summary.render_paths) {
        std::cout << "render:   " << path.string() << '\n';
    }
    return 0;
}

int command_render(const std::string& artifact_dir, const std::optional<std::size_t>& samples,
                   const std::optional<std::uint64_t>& seed,
                   const std::optional<std::string>& out_dir) {
    const mosaic::Artifact artifact = mosaic::read_artifact(artifact_dir);
    const auto paths = mosaic::render_from_artifact(
        artifact_dir, samples.value_or(artifact.config.render_count),
        seed.value_or(artifact.config.inference.master_seed), out_dir.value_or(artifact_dir));
    for (const auto& path : paths) std::cout << path.string() << '\n';
    return 0;
}

int command_diag(const std::string& artifact_dir) {
    std::cout << mosaic::diagnostics_report(artifact_dir);
    return 0;
}

// Tiny-problem JSON: {"bank": [[...], ...], "target": [...], "num_clips": C,
// "stddev": s, "candidates": [...]?}. Prints the full normalized posterior
// table over slot multisets.
int command_oracle(const std::string& problem_path) {
    nlohmann::json spec;
    {
        std::ifstream in(problem_path);
        if (!in) {
            throw mosaic::ValidationError({"cannot open problem file: " + problem_path});
        }
        try {
            in >> spec;
        } catch (const nlohmann::json::exception& e) {
            throw mosaic::ValidationError(
                {"malformed problem file " + problem_path + ": " + e.what()});
        }
    }

    std::size_t rows = 0;
    std::size_t dim = 0;
    std::vector<float> data;
    mosaic::MosaicProblem problem;
    try {
        const auto& bank_rows = spec.at("bank");
        rows = bank_rows.size();
        for (const auto& row : bank_rows) {
            if (dim == 0) dim = row.size();
            for (const auto& v : row) data.push_back(v.get<float>());
        }
        problem.target = spec.at("target").get<std::vector<double>>();
        problem.num_clips = spec.at("num_clips").get<std::uint32_t>();
        problem.stddev = spec.at("stddev").get<double>();
        if (spec.contains("candidates")) {
            problem.candidates = spec.at("candidates").get<std::vector<std::uint32_t>>();
        } else {
            problem.candidates.resize(rows);
            std::iota(problem.candidates.begin(), problem.candidates.end(), 0);
        }
    } catch (const nlohmann::json::exception& e) {
        throw mosaic::ValidationError(
            {"malformed problem file " + problem_path + ": " + e.what()});
    }

    const mosaic::FragmentBank bank(rows, dim, std::move(data), {dim},
                                    mosaic::Modality::kRaw);
    const mosaic::ExactPosterior posterior = mosaic::exact_posterior(problem, bank);

    nlohmann::json table = nlohmann::json::array();
    for (const auto& [multiset, probability] : posterior.table) {
        table.push_back({{"multiset", multiset}, {"probability", probability}});
    }
    const nlohmann::json out{{"support", problem.candidates.size()},
                             {"num_clips", problem.num_clips},
                             {"stddev", problem.stddev},
                             {"table", table}};
    std::cout << out.dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian mosaicing engine"};
    app.require_subcommand(1);

    std::string config_path;
    auto* run_cmd = app.add_subcommand("run", "run a job from a key=value config file");
    run_cmd->add_option("config", config_path, "config file path")->required();
    run_cmd->allow_extras();  // --key value pairs become config overrides

    std::string artifact_dir;
    std::optional<std::size_t> samples;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    auto* render_cmd =
        app.add_subcommand("render", "draw new mosaics from a stored artifact");
    render_cmd->add_option("artifact", artifact_dir, "artifact directory")->required();
    render_cmd->add_option("--samples", samples, "number of renders (default: as recorded)");
    render_cmd->add_option("--seed", seed, "render seed (default: the job's master seed)");
    render_cmd->add_option("--out", out_dir, "output directory (default: the artifact dir)");

    std::string diag_dir;
    auto* diag_cmd = app.add_subcommand("diag", "print convergence diagnostics");
    diag_cmd->add_option("artifact", diag_dir, "artifact directory")->required();

    std::string problem_path;
    auto* oracle_cmd =
        app.add_subcommand("oracle", "exact selection posterior of a tiny JSON problem");
    oracle_cmd->add_option("problem", problem_path, "tiny problem JSON file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (run_cmd->parsed()) return command_run(config_path, run_cmd->remaining());
        if (render_cmd->parsed()) return command_render(artifact_dir, samples, seed, out_dir);
        if (diag_cmd->parsed()) return command_diag(diag_dir);
        if (oracle_cmd->parsed()) return command_oracle(problem_path);
    } catch (const mosaic::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const mosaic::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
