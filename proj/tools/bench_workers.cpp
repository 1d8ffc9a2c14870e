// Benchmark of the fragment x chain task grid: the OpenMP-backed parallel_for
// against the serial reference loop, on a synthetic in-memory workload.
// With --check, asserts the 4-worker speedup on machines with enough cores
// and always asserts that every schedule produces identical traces.

#include <CLI11.hpp>

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <numeric>
#include <vector>

#include "mosaic/fragment_bank.hpp"
#include "mosaic/inference.hpp"
#include "mosaic/parallel.hpp"
#include "mosaic/rng.hpp"

namespace {

struct Workload {
    mosaic::FragmentBank bank;
    std::vector<mosaic::MosaicProblem> problems;
    mosaic::InferenceConfig inference;
};

Workload make_workload(std::size_t num_fragments, std::uint64_t num_warmup) {
    constexpr std::size_t kRows = 100;
    constexpr std::size_t kDim = 64;

    mosaic::Rng rng(20240901);
    std::vector<float> data(kRows * kDim);
    for (auto& v : data) v = static_cast<float>(rng.uniform_double());
    mosaic::FragmentBank bank(kRows, kDim, std::move(data), {kDim},
                              mosaic::Modality::kRaw);

    std::vector<mosaic::MosaicProblem> problems(num_fragments);
    for (std::size_t f = 0; f < num_fragments; ++f) {
        auto& p = problems[f];
        p.fragment_id = f;
        p.num_clips = 10;
        p.stddev = 0.1;
        p.candidates.resize(kRows);
        std::iota(p.candidates.begin(), p.candidates.end(), 0);
        p.target.resize(kDim);
        // target = one bank row plus noise, so the posterior has structure
        const auto row = bank.row(f % kRows);
        for (std::size_t d = 0; d < kDim; ++d) {
            p.target[d] = row[d] + 0.02 * (rng.uniform_double() - 0.5);
        }
    }

    mosaic::InferenceConfig inference;
    inference.kernel = mosaic::KernelKind::kGibbs;
    inference.num_warmup = num_warmup;
    inference.num_samples = 20;
    inference.num_chains = 2;
    inference.master_seed = 99;
    return Workload{std::move(bank), std::move(problems), inference};
}

using TraceGrid = std::vector<mosaic::ChainTrace>;

// Runs every (fragment, chain) task; workers == 0 uses the serial reference.
TraceGrid run_grid(const Workload& w, int workers) {
    const std::size_t num_tasks = w.problems.size() * w.inference.num_chains;
    TraceGrid traces(num_tasks);
    const auto body = [&](std::size_t task) {
        const std::size_t f = task / w.inference.num_chains;
        const auto c = static_cast<std::uint32_t>(task % w.inference.num_chains);
        traces[task] = mosaic::run_chain(w.problems[f], w.bank, w.inference, c);
    };
    if (workers == 0) {
        mosaic::serial_for(num_tasks, body);
    } else {
        mosaic::parallel_for(num_tasks, workers, body);
    }
    return traces;
}

bool grids_equal(const TraceGrid& a, const TraceGrid& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].selections != b[i].selections) return false;
        if (a[i].log_lik_trace != b[i].log_lik_trace) return false;
    }
    return true;
}

double time_seconds(const Workload& w, int workers, TraceGrid& out) {
    const auto start = std::chrono::steady_clock::now();
    out = run_grid(w, workers);
    const auto stop = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(stop - start).count();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"worker-scaling benchmark for the mosaic inference grid"};
    bool check = false;
    std::size_t num_fragments = 32;
    std::uint64_t num_warmup = 100;
    app.add_flag("--check", check, "fail unless 4 workers beat 1 by >= 1.5x (skipped below 4 cores)");
    app.add_option("--fragments", num_fragments, "synthetic fragment count");
    app.add_option("--warmup", num_warmup, "warmup sweeps per chain");
    CLI11_PARSE(app, argc, argv);

    const int hardware = mosaic::hardware_workers();
    std::printf("hardware workers: %d\n", hardware);

    const Workload w = make_workload(num_fragments, num_warmup);
    std::printf("workload: %zu fragments x %u chains, %llu warmup + %llu samples\n",
                w.problems.size(), w.inference.num_chains,
                static_cast<unsigned long long>(w.inference.num_warmup),
                static_cast<unsigned long long>(w.inference.num_samples));

    TraceGrid serial;
    const double serial_time = time_seconds(w, 0, serial);
    std::printf("serial reference: %8.3f s\n", serial_time);

    bool identical = true;
    double one_worker_time = serial_time;
    double four_worker_time = 0.0;
    for (int workers = 1; workers <= hardware; workers *= 2) {
        TraceGrid grid;
        const double t = time_seconds(w, workers, grid);
        identical = identical && grids_equal(serial, grid);
        std::printf("workers %2d:       %8.3f s (%.2fx vs serial)\n", workers, t,
                    serial_time / t);
        if (workers == 1) one_worker_time = t;
        if (workers == 4) four_worker_time = t;
    }
    std::printf("traces identical across schedules: %s\n", identical ? "yes" : "NO");

    if (!identical) {
        std::fprintf(stderr, "FAIL: parallel schedules changed the inference output\n");
        return 1;
    }
    if (check) {
        if (hardware < 4) {
            std::printf("speedup check skipped: %d hardware workers (need 4)\n", hardware);
            return 0;
        }
        const double speedup = one_worker_time / four_worker_time;
        std::printf("speedup 1 -> 4 workers: %.2fx (required >= 1.50x)\n", speedup);
        if (speedup < 1.5) {
            std::fprintf(stderr, "FAIL: insufficient parallel speedup\n");
            return 1;
        }
    }
    return 0;
}
