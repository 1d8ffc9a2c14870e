#pragma once

#include <cstdint>
#include <vector>

#include "mosaic/fragment_bank.hpp"
#include "mosaic/model.hpp"
#include "mosaic/rng.hpp"

namespace mosaic {

enum class KernelKind { kGibbs, kRwmh };

struct InferenceConfig {
    KernelKind kernel = KernelKind::kGibbs;
    std::uint64_t num_warmup = 1000;
    std::uint64_t num_samples = 100;   // retained draws per chain
    std::uint64_t thinning = 1;        // keep every n-th post-warmup sweep
    std::uint32_t num_chains = 2;
    std::uint64_t master_seed = 0;

    void validate() const;
};

// Output of one chain. The log-likelihood trace covers every sweep/step,
// warmup included: num_warmup + num_samples * thinning entries.
struct ChainTrace {
    std::uint32_t chain_index = 0;
    std::vector<Selection> selections;
    std::vector<double> log_lik_trace;
    std::uint64_t accepted = 0;  // RWMH only
    std::uint64_t proposed = 0;
};

// Per-fragment posterior: all chains plus the split-Rhat diagnostic on the
// post-warmup log-likelihood traces (NaN when fewer than 2 chains).
struct PosteriorSamples {
    std::uint64_t fragment_id = 0;
    std::vector<ChainTrace> chains;
    double split_rhat = 0.0;
};

// One site-wise Gibbs sweep: each slot in order is redrawn from its exact
// full conditional over the candidate set.
void gibbs_sweep(ChainState& state, const MosaicProblem& problem, const FragmentBank& bank,
                 Rng& rng);

// One random-walk Metropolis-Hastings step: a uniformly chosen slot gets a
// uniformly proposed candidate, accepted with probability min(1, exp(delta)).
// Returns whether the proposal was accepted.
bool rwmh_step(ChainState& state, const MosaicProblem& problem, const FragmentBank& bank,
               Rng& rng);

// Runs one chain: prior initialization from a seed derived from
// (master_seed, fragment_id, chain_index), num_warmup discarded iterations,
// then num_samples retained draws at the configured thinning.
ChainTrace run_chain(const MosaicProblem& problem, const FragmentBank& bank,
                     const InferenceConfig& config, std::uint32_t chain_index);

// Runs config.num_chains chains sequentially and assembles the posterior.
PosteriorSamples run_fragment(const MosaicProblem& problem, const FragmentBank& bank,
                              const InferenceConfig& config);

PosteriorSamples assemble_posterior(std::uint64_t fragment_id, std::vector<ChainTrace> chains,
                                    const InferenceConfig& config);

// Split-Rhat over per-chain scalar traces (warmup already excluded by the
// caller). Chains are halved, then sqrt((N-1)/N + B/(N*W)) over the 2m
// half-chains. Returns exactly 1.0 in the degenerate all-constant case.
double split_rhat(const std::vector<std::vector<double>>& traces);

// Exact posterior over slot multisets, for tests and the oracle CLI.
struct ExactPosterior {
    // Sorted multiset of bank indices -> posterior probability; entries are
    // ordered lexicographically by multiset.
    std::vector<std::pair<std::vector<std::uint32_t>, double>> table;

    double probability_of(const std::vector<std::uint32_t>& multiset) const;
};

// Number of distinct slot multisets: (support + C - 1) choose C.
// Saturates at 2^64-1 on overflow.
std::uint64_t multiset_count(std::uint64_t support, std::uint64_t num_clips);

// Enumerates every multiset; probability proportional to multinomial
// multiplicity times exp(log_likelihood). Refuses supports above 10^6.
ExactPosterior exact_posterior(const MosaicProblem& problem, const FragmentBank& bank);

}  // namespace mosaic
