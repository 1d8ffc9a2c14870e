#include "mosaic/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <unordered_set>

#include "mosaic/errors.hpp"

namespace mosaic {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void check_selection_bounds(const Selection& selection, const FragmentBank& bank) {
    for (std::uint32_t s : selection.slots) {
        if (s >= bank.rows()) {
            throw std::invalid_argument("invalid selection: index " + std::to_string(s) +
                                        " out of range for bank with " +
                                        std::to_string(bank.rows()) + " rows");
        }
    }
}

double gaussian_log_norm(std::size_t dim, double stddev) {
    return -static_cast<double>(dim) * std::log(stddev * std::sqrt(kTwoPi));
}

}  // namespace

void MosaicProblem::validate(const FragmentBank& bank) const {
    if (target.size() != bank.dim()) {
        throw std::invalid_argument("target dimension " + std::to_string(target.size()) +
                                    " does not match bank dimension " +
                                    std::to_string(bank.dim()));
    }
    for (double v : target) {
        if (!std::isfinite(v)) throw std::invalid_argument("target contains non-finite values");
    }
    if (candidates.empty()) throw std::invalid_argument("candidate set is empty");
    std::unordered_set<std::uint32_t> seen;
    for (std::uint32_t c : candidates) {
        if (c >= bank.rows()) {
            throw std::invalid_argument("candidate " + std::to_string(c) +
                                        " out of range for bank with " +
                                        std::to_string(bank.rows()) + " rows");
        }
        if (!seen.insert(c).second) {
            throw std::invalid_argument("duplicate candidate " + std::to_string(c));
        }
    }
    if (num_clips < 1) throw std::invalid_argument("num_clips must be >= 1");
    if (!(stddev > 0.0)) throw std::invalid_argument("stddev must be positive");
}

std::vector<double> average_clips(const Selection& selection, const FragmentBank& bank) {
    if (selection.slots.empty()) throw std::invalid_argument("invalid selection: empty");
    check_selection_bounds(selection, bank);

    const std::size_t dim = bank.dim();
    std::vector<double> avg(dim, 0.0);
    for (std::uint32_t s : selection.slots) {
        const auto row = bank.row(s);
        for (std::size_t d = 0; d < dim; ++d) avg[d] += static_cast<double>(row[d]);
    }
    const double inv_clips = 1.0 / static_cast<double>(selection.slots.size());
    for (double& v : avg) v *= inv_clips;
    return avg;
}

double log_likelihood(const Selection& selection, const MosaicProblem& problem,
                      const FragmentBank& bank) {
    const std::vector<double> avg = average_clips(selection, bank);
    double residual_sq = 0.0;
    for (std::size_t d = 0; d < avg.size(); ++d) {
        const double diff = problem.target[d] - avg[d];
        residual_sq += diff * diff;
    }
    const double ll = gaussian_log_norm(bank.dim(), problem.stddev) -
                      residual_sq / (2.0 * problem.stddev * problem.stddev);
    if (!std::isfinite(ll)) {
        throw NumericalError("non-finite log-likelihood for fragment " +
                             std::to_string(problem.fragment_id));
    }
    return ll;
}

Selection prior_sample(const MosaicProblem& problem, Rng& rng) {
    if (problem.candidates.empty()) throw std::invalid_argument("candidate set is empty");
    Selection sel;
    sel.slots.resize(problem.num_clips);
    for (auto& slot : sel.slots) {
        slot = problem.candidates[rng.uniform_index(problem.candidates.size())];
    }
    return sel;
}

ChainState::ChainState(Selection selection, const MosaicProblem& problem,
                       const FragmentBank& bank)
    : selection_(std::move(selection)) {
    if (selection_.slots.size() != problem.num_clips) {
        throw std::invalid_argument("selection length does not match num_clips");
    }
    check_selection_bounds(selection_, bank);
    clip_sum_.resize(bank.dim());
    refresh(problem, bank);
}

void ChainState::refresh(const MosaicProblem& problem, const FragmentBank& bank) {
    std::fill(clip_sum_.begin(), clip_sum_.end(), 0.0);
    for (std::uint32_t s : selection_.slots) {
        const auto row = bank.row(s);
        for (std::size_t d = 0; d < clip_sum_.size(); ++d) {
            clip_sum_[d] += static_cast<double>(row[d]);
        }
    }
    log_lik_ = log_likelihood(selection_, problem, bank);
    swaps_since_refresh_ = 0;
}

void ChainState::residual(const MosaicProblem& problem, std::span<double> out) const {
    const double inv_clips = 1.0 / static_cast<double>(selection_.slots.size());
    for (std::size_t d = 0; d < clip_sum_.size(); ++d) {
        out[d] = problem.target[d] - clip_sum_[d] * inv_clips;
    }
}

double ChainState::delta_given_residual(std::span<const double> residual, std::size_t slot,
                                        std::uint32_t new_index, const MosaicProblem& problem,
                                        const FragmentBank& bank) const {
    if (slot >= selection_.slots.size()) throw std::invalid_argument("slot out of range");
    const std::uint32_t old_index = selection_.slots[slot];
    if (new_index == old_index) return 0.0;
    if (new_index >= bank.rows()) {
        throw std::invalid_argument("invalid selection: index " + std::to_string(new_index));
    }

    // r2_old - r2_new telescopes elementwise: with step = (new - old)/C the
    // per-element change is step * (2*residual - step), which avoids the
    // cancellation of subtracting two large accumulated sums.
    const auto old_row = bank.row(old_index);
    const auto new_row = bank.row(new_index);
    const double inv_clips = 1.0 / static_cast<double>(selection_.slots.size());
    double gain = 0.0;
    for (std::size_t d = 0; d < residual.size(); ++d) {
        const double step =
            (static_cast<double>(new_row[d]) - static_cast<double>(old_row[d])) * inv_clips;
        gain += step * (2.0 * residual[d] - step);
    }
    return gain / (2.0 * problem.stddev * problem.stddev);
}

double ChainState::delta_log_likelihood_swap(std::size_t slot, std::uint32_t new_index,
                                             const MosaicProblem& problem,
                                             const FragmentBank& bank) const {
    if (slot >= selection_.slots.size()) throw std::invalid_argument("slot out of range");
    if (new_index == selection_.slots[slot]) return 0.0;
    std::vector<double> res(clip_sum_.size());
    residual(problem, res);
    return delta_given_residual(res, slot, new_index, problem, bank);
}

void ChainState::apply_swap(std::size_t slot, std::uint32_t new_index, double delta,
                            const MosaicProblem& problem, const FragmentBank& bank) {
    if (slot >= selection_.slots.size()) throw std::invalid_argument("slot out of range");
    const std::uint32_t old_index = selection_.slots[slot];
    if (new_index == old_index) return;
    if (new_index >= bank.rows()) {
        throw std::invalid_argument("invalid selection: index " + std::to_string(new_index));
    }

    const auto old_row = bank.row(old_index);
    const auto new_row = bank.row(new_index);
    for (std::size_t d = 0; d < clip_sum_.size(); ++d) {
        clip_sum_[d] += static_cast<double>(new_row[d]) - static_cast<double>(old_row[d]);
    }
    selection_.slots[slot] = new_index;
    log_lik_ += delta;

    if (++swaps_since_refresh_ >= kRefreshInterval) {
        refresh(problem, bank);
    }
}

void ChainState::verify_cache(const MosaicProblem& problem, const FragmentBank& bank) const {
    std::vector<double> sum(bank.dim(), 0.0);
    for (std::uint32_t s : selection_.slots) {
        const auto row = bank.row(s);
        for (std::size_t d = 0; d < sum.size(); ++d) sum[d] += static_cast<double>(row[d]);
    }
    for (std::size_t d = 0; d < sum.size(); ++d) {
        const double tol = 1e-9 * std::max(1.0, std::abs(sum[d]));
        if (std::abs(sum[d] - clip_sum_[d]) > tol) {
            throw NumericalError("stale clip_sum cache for fragment " +
                                 std::to_string(problem.fragment_id));
        }
    }
    const double exact = log_likelihood(selection_, problem, bank);
    const double tol = 1e-9 * std::max(1.0, std::abs(exact));
    if (std::abs(exact - log_lik_) > tol) {
        throw NumericalError("stale log-likelihood cache for fragment " +
                             std::to_string(problem.fragment_id));
    }
}

}  // namespace mosaic
