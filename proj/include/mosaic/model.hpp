#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mosaic/fragment_bank.hpp"
#include "mosaic/rng.hpp"

namespace mosaic {

// One target fragment plus its selection support and model hyperparameters.
struct MosaicProblem {
    std::vector<double> target;             // length D, matches the bank
    std::vector<std::uint32_t> candidates;  // distinct bank row indices
    std::uint32_t num_clips = 1;            // clips averaged per sample
    double stddev = 1.0;                    // observation-noise tolerance
    std::uint64_t fragment_id = 0;

    // Throws std::invalid_argument on any violated invariant.
    void validate(const FragmentBank& bank) const;
};

// Ordered slot assignment; the latent variable. Slots may repeat.
struct Selection {
    std::vector<std::uint32_t> slots;

    bool operator==(const Selection&) const = default;
};

// Elementwise mean of the selected bank rows.
std::vector<double> average_clips(const Selection& selection, const FragmentBank& bank);

// Full normalized isotropic Gaussian log-density of the target given the
// averaged clips:  -D*log(sigma*sqrt(2*pi)) - ||target - avg||^2 / (2*sigma^2).
double log_likelihood(const Selection& selection, const MosaicProblem& problem,
                      const FragmentBank& bank);

// Each slot drawn independently and uniformly from the candidate set.
Selection prior_sample(const MosaicProblem& problem, Rng& rng);

// Selection plus cached clip sum and log-likelihood, so single-slot swaps
// cost O(D) instead of O(C*D). The cache is rebuilt from scratch every
// kRefreshInterval accepted swaps to bound floating-point drift.
class ChainState {
public:
    ChainState(Selection selection, const MosaicProblem& problem, const FragmentBank& bank);

    const Selection& selection() const { return selection_; }
    double log_lik() const { return log_lik_; }
    std::span<const double> clip_sum() const { return clip_sum_; }

    // log_likelihood with slots[slot] replaced by new_index, minus the
    // current log-likelihood. Does not mutate the state.
    double delta_log_likelihood_swap(std::size_t slot, std::uint32_t new_index,
                                     const MosaicProblem& problem,
                                     const FragmentBank& bank) const;

    // Same delta given the current residual vector (target - clip_sum/C),
    // as precomputed by residual(). Hot path for full-conditional sweeps.
    double delta_given_residual(std::span<const double> residual, std::size_t slot,
                                std::uint32_t new_index, const MosaicProblem& problem,
                                const FragmentBank& bank) const;

    // Writes target - clip_sum/C into out (length D).
    void residual(const MosaicProblem& problem, std::span<double> out) const;

    // Commits a swap whose delta was already computed.
    void apply_swap(std::size_t slot, std::uint32_t new_index, double delta,
                    const MosaicProblem& problem, const FragmentBank& bank);

    // Recomputes clip_sum and log_lik from the selection.
    void refresh(const MosaicProblem& problem, const FragmentBank& bank);

    // Throws NumericalError if the cache drifted beyond tolerance.
    void verify_cache(const MosaicProblem& problem, const FragmentBank& bank) const;

    static constexpr std::uint64_t kRefreshInterval = 1000;

private:
    Selection selection_;
    std::vector<double> clip_sum_;
    double log_lik_ = 0.0;
    std::uint64_t swaps_since_refresh_ = 0;
};

}  // namespace mosaic
