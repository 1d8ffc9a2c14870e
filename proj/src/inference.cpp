#include "mosaic/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "mosaic/errors.hpp"

namespace mosaic {

void InferenceConfig::validate() const {
    if (num_samples < 1) throw std::invalid_argument("num_samples must be >= 1");
    if (thinning < 1) throw std::invalid_argument("thinning must be >= 1");
    if (num_chains < 1) throw std::invalid_argument("num_chains must be >= 1");
}

void gibbs_sweep(ChainState& state, const MosaicProblem& problem, const FragmentBank& bank,
                 Rng& rng) {
    const auto& cands = problem.candidates;
    const std::size_t num_slots = state.selection().slots.size();
    if (cands.size() == 1) return;  // support of size 1: nothing to redraw

    std::vector<double> residual(bank.dim());
    std::vector<double> deltas(cands.size());
    std::vector<double> probs(cands.size());

    for (std::size_t slot = 0; slot < num_slots; ++slot) {
        state.residual(problem, residual);

        double max_delta = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < cands.size(); ++i) {
            deltas[i] = state.delta_given_residual(residual, slot, cands[i], problem, bank);
            max_delta = std::max(max_delta, deltas[i]);
        }

        double total = 0.0;
        for (std::size_t i = 0; i < cands.size(); ++i) {
            probs[i] = std::exp(deltas[i] - max_delta);
            total += probs[i];
        }
        if (!std::isfinite(total) || !(total > 0.0)) {
            throw NumericalError("conditional weights degenerate for fragment " +
                                 std::to_string(problem.fragment_id));
        }

        const double u = rng.uniform_double() * total;
        double acc = 0.0;
        std::size_t pick = cands.size() - 1;
        for (std::size_t i = 0; i < cands.size(); ++i) {
            acc += probs[i];
            if (u < acc) {
                pick = i;
                break;
            }
        }
        state.apply_swap(slot, cands[pick], deltas[pick], problem, bank);
    }

#ifndef NDEBUG
    state.verify_cache(problem, bank);
#endif
}

bool rwmh_step(ChainState& state, const MosaicProblem& problem, const FragmentBank& bank,
               Rng& rng) {
    const std::size_t slot = rng.uniform_index(state.selection().slots.size());
    const std::uint32_t proposal =
        problem.candidates[rng.uniform_index(problem.candidates.size())];

    const double delta = state.delta_log_likelihood_swap(slot, proposal, problem, bank);
    bool accept = delta >= 0.0;
    if (!accept) accept = rng.uniform_double() < std::exp(delta);
    if (accept) state.apply_swap(slot, proposal, delta, problem, bank);
    return accept;
}

ChainTrace run_chain(const MosaicProblem& problem, const FragmentBank& bank,
                     const InferenceConfig& config, std::uint32_t chain_index) {
    config.validate();
    problem.validate(bank);

    Rng rng(derive_seed(config.master_seed, problem.fragment_id, chain_index));
    ChainState state(prior_sample(problem, rng), problem, bank);

    ChainTrace trace;
    trace.chain_index = chain_index;
    const std::uint64_t total_iters = config.num_warmup + config.num_samples * config.thinning;
    trace.log_lik_trace.reserve(total_iters);
    trace.selections.reserve(config.num_samples);

    try {
        for (std::uint64_t it = 0; it < total_iters; ++it) {
            if (config.kernel == KernelKind::kGibbs) {
                gibbs_sweep(state, problem, bank, rng);
            } else {
                ++trace.proposed;
                if (rwmh_step(state, problem, bank, rng)) ++trace.accepted;
            }
            trace.log_lik_trace.push_back(state.log_lik());
            if (it >= config.num_warmup &&
                (it - config.num_warmup + 1) % config.thinning == 0) {
                trace.selections.push_back(state.selection());
            }
        }
    } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " (chain " + std::to_string(chain_index) +
                             ")");
    }
    return trace;
}

PosteriorSamples assemble_posterior(std::uint64_t fragment_id, std::vector<ChainTrace> chains,
                                    const InferenceConfig& config) {
    PosteriorSamples out;
    out.fragment_id = fragment_id;
    out.chains = std::move(chains);

    std::vector<std::vector<double>> post_warmup;
    for (const auto& chain : out.chains) {
        if (chain.log_lik_trace.size() <= config.num_warmup) continue;
        post_warmup.emplace_back(chain.log_lik_trace.begin() + config.num_warmup,
                                 chain.log_lik_trace.end());
    }
    const bool enough = post_warmup.size() >= 2 &&
                        std::all_of(post_warmup.begin(), post_warmup.end(),
                                    [](const auto& t) { return t.size() >= 4; });
    out.split_rhat =
        enough ? split_rhat(post_warmup) : std::numeric_limits<double>::quiet_NaN();
    return out;
}

PosteriorSamples run_fragment(const MosaicProblem& problem, const FragmentBank& bank,
                              const InferenceConfig& config) {
    std::vector<ChainTrace> chains;
    chains.reserve(config.num_chains);
    for (std::uint32_t c = 0; c < config.num_chains; ++c) {
        chains.push_back(run_chain(problem, bank, config, c));
    }
    return assemble_posterior(problem.fragment_id, std::move(chains), config);
}

double split_rhat(const std::vector<std::vector<double>>& traces) {
    if (traces.size() < 2) throw std::invalid_argument("split_rhat needs >= 2 chains");
    std::size_t min_len = std::numeric_limits<std::size_t>::max();
    for (const auto& t : traces) min_len = std::min(min_len, t.size());
    if (min_len < 4) throw std::invalid_argument("split_rhat needs traces of length >= 4");

    // Halve every chain; all halves truncated to a common length.
    const std::size_t half_len = min_len / 2;
    std::vector<std::pair<const double*, std::size_t>> halves;
    for (const auto& t : traces) {
        halves.emplace_back(t.data(), half_len);
        halves.emplace_back(t.data() + half_len, half_len);
    }

    const double n = static_cast<double>(half_len);
    const double m = static_cast<double>(halves.size());

    std::vector<double> means(halves.size());
    std::vector<double> vars(halves.size());
    for (std::size_t j = 0; j < halves.size(); ++j) {
        const double* x = halves[j].first;
        // An exactly constant half must report exactly zero variance; the
        // accumulated mean of n equal doubles can round away from them,
        // which would leak a spurious epsilon into the within term.
        bool constant = true;
        for (std::size_t i = 1; i < half_len; ++i) {
            if (x[i] != x[0]) {
                constant = false;
                break;
            }
        }
        if (constant) {
            means[j] = x[0];
            vars[j] = 0.0;
            continue;
        }
        double mean = 0.0;
        for (std::size_t i = 0; i < half_len; ++i) mean += x[i];
        mean /= n;
        double var = 0.0;
        for (std::size_t i = 0; i < half_len; ++i) {
            const double d = x[i] - mean;
            var += d * d;
        }
        means[j] = mean;
        vars[j] = var / (n - 1.0);
    }

    // Same guard for the between term: equal half-means must give exactly
    // zero, so the constant-everywhere case lands on 1.0 and not infinity.
    bool means_equal = true;
    double grand_mean = 0.0;
    for (std::size_t j = 0; j < halves.size(); ++j) {
        if (means[j] != means[0]) means_equal = false;
        grand_mean += means[j];
    }
    grand_mean /= m;

    double within = 0.0;
    double between = 0.0;
    for (std::size_t j = 0; j < halves.size(); ++j) {
        within += vars[j];
        const double d = means[j] - grand_mean;
        between += d * d;
    }
    within /= m;
    between = means_equal ? 0.0 : between * n / (m - 1.0);

    if (within == 0.0) {
        return between == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    }
    return std::sqrt((n - 1.0) / n + between / (n * within));
}

std::uint64_t multiset_count(std::uint64_t support, std::uint64_t num_clips) {
    // binom(support + num_clips - 1, num_clips), computed incrementally
    unsigned __int128 result = 1;
    for (std::uint64_t k = 1; k <= num_clips; ++k) {
        result = result * (support - 1 + k) / k;
        if (result > std::numeric_limits<std::uint64_t>::max()) {
            return std::numeric_limits<std::uint64_t>::max();
        }
    }
    return static_cast<std::uint64_t>(result);
}

double ExactPosterior::probability_of(const std::vector<std::uint32_t>& multiset) const {
    auto it = std::lower_bound(table.begin(), table.end(), multiset,
                               [](const auto& entry, const std::vector<std::uint32_t>& key) {
                                   return entry.first < key;
                               });
    if (it == table.end() || it->first != multiset) return 0.0;
    return it->second;
}

ExactPosterior exact_posterior(const MosaicProblem& problem, const FragmentBank& bank) {
    problem.validate(bank);

    constexpr std::uint64_t kMaxSupport = 1000000;
    const std::uint64_t support = multiset_count(problem.candidates.size(), problem.num_clips);
    if (support > kMaxSupport) {
        throw std::invalid_argument("exact posterior support " + std::to_string(support) +
                                    " exceeds the bound of " + std::to_string(kMaxSupport) +
                                    " multisets");
    }

    std::vector<std::uint32_t> values = problem.candidates;
    std::sort(values.begin(), values.end());
    const std::size_t num_values = values.size();
    const std::uint32_t num_clips = problem.num_clips;

    ExactPosterior out;
    out.table.reserve(support);
    std::vector<double> log_weights;
    log_weights.reserve(support);

    // Odometer over non-decreasing index tuples = multisets in
    // lexicographic order.
    std::vector<std::size_t> idx(num_clips, 0);
    Selection sel;
    sel.slots.resize(num_clips);
    for (;;) {
        for (std::uint32_t c = 0; c < num_clips; ++c) sel.slots[c] = values[idx[c]];

        double log_multiplicity = std::lgamma(static_cast<double>(num_clips) + 1.0);
        std::size_t run_start = 0;
        for (std::size_t c = 1; c <= num_clips; ++c) {
            if (c == num_clips || idx[c] != idx[run_start]) {
                log_multiplicity -= std::lgamma(static_cast<double>(c - run_start) + 1.0);
                run_start = c;
            }
        }

        out.table.emplace_back(sel.slots, 0.0);
        log_weights.push_back(log_multiplicity + log_likelihood(sel, problem, bank));

        // advance odometer
        std::size_t pos = num_clips;
        while (pos > 0 && idx[pos - 1] == num_values - 1) --pos;
        if (pos == 0) break;
        const std::size_t next = idx[pos - 1] + 1;
        for (std::size_t c = pos - 1; c < num_clips; ++c) idx[c] = next;
    }

    const double max_lw = *std::max_element(log_weights.begin(), log_weights.end());
    double total = 0.0;
    for (double lw : log_weights) total += std::exp(lw - max_lw);
    for (std::size_t i = 0; i < log_weights.size(); ++i) {
        out.table[i].second = std::exp(log_weights[i] - max_lw) / total;
    }
    return out;
}

}  // namespace mosaic
