#include "mosaic/audio.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace mosaic {

namespace {

// FFTW plan creation/destruction is not thread-safe (execution is).
std::mutex& fftw_plan_mutex() {
    static std::mutex m;
    return m;
}

double window_value(WindowKind window, std::size_t i, std::size_t nfft) {
    switch (window) {
        case WindowKind::kRectangular:
            return 1.0;
        case WindowKind::kHann:
            return 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                         static_cast<double>(nfft)));
    }
    return 1.0;
}

}  // namespace

SpectralFrames stft_frames(const AudioClip& clip, std::size_t nfft, std::size_t hop,
                           WindowKind window) {
    if (nfft < 2) throw std::invalid_argument("nfft must be at least 2");
    if (hop == 0) hop = nfft;
    if (clip.samples.size() < nfft) {
        throw std::invalid_argument("clip of " + std::to_string(clip.samples.size()) +
                                    " samples is shorter than one " + std::to_string(nfft) +
                                    "-sample frame");
    }

    SpectralFrames out;
    out.nfft = nfft;
    out.hop = hop;
    out.window = window;
    out.num_bins = nfft / 2 + 1;
    out.num_frames = (clip.samples.size() - nfft) / hop + 1;
    out.frames.resize(out.num_frames * out.num_bins);

    double* in = fftw_alloc_real(nfft);
    fftw_complex* spec = fftw_alloc_complex(out.num_bins);
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex());
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(nfft), in, spec, FFTW_ESTIMATE);
    }
    if (!plan) {
        fftw_free(in);
        fftw_free(spec);
        throw std::runtime_error("failed to create an FFT plan for nfft " +
                                 std::to_string(nfft));
    }

    for (std::size_t t = 0; t < out.num_frames; ++t) {
        const double* src = clip.samples.data() + t * hop;
        for (std::size_t i = 0; i < nfft; ++i) in[i] = src[i] * window_value(window, i, nfft);
        fftw_execute(plan);
        for (std::size_t f = 0; f < out.num_bins; ++f) {
            out.frames[t * out.num_bins + f] = {spec[f][0], spec[f][1]};
        }
    }

    {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex());
        fftw_destroy_plan(plan);
    }
    fftw_free(in);
    fftw_free(spec);
    return out;
}

double max_magnitude(const SpectralFrames& spectral) {
    double best = 0.0;
    for (const auto& x : spectral.frames) best = std::max(best, std::abs(x));
    return best;
}

void apply_db_scaling(SpectralFrames& spectral, double db_reference, double db_floor) {
    if (!(db_reference > 0.0)) {
        throw std::invalid_argument("db_reference must be positive");
    }
    spectral.db_reference = db_reference;
    spectral.db_floor = db_floor;
    spectral.magnitudes_db.resize(spectral.frames.size());
    for (std::size_t i = 0; i < spectral.frames.size(); ++i) {
        const double mag = std::max(std::abs(spectral.frames[i]), kDbEpsilon);
        spectral.magnitudes_db[i] = std::max(20.0 * std::log10(mag / db_reference), db_floor);
    }
}

FragmentBank magnitude_bank(const SpectralFrames& spectral) {
    if (spectral.magnitudes_db.empty()) {
        throw std::invalid_argument("dB scaling has not been applied to the spectral frames");
    }
    std::vector<float> data(spectral.magnitudes_db.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        data[i] = static_cast<float>(spectral.magnitudes_db[i]);
    }
    return FragmentBank(spectral.num_frames, spectral.num_bins, std::move(data),
                        {spectral.num_bins}, Modality::kAudioMagnitude);
}

std::vector<std::uint32_t> topk_candidates(std::span<const double> target_row,
                                           const FragmentBank& bank, std::size_t k,
                                           double shift) {
    if (k < 1) throw std::invalid_argument("k must be at least 1");
    if (target_row.size() != bank.dim()) {
        throw std::invalid_argument("target row dimension does not match the bank");
    }
    const std::size_t rows = bank.rows();
    const std::size_t take = std::min(k, rows);

    double target_norm2 = 0.0;
    for (double v : target_row) {
        const double s = v + shift;
        target_norm2 += s * s;
    }

    std::vector<std::uint32_t> order(rows);
    if (target_norm2 == 0.0) {
        std::cerr << "warning: zero-norm prefilter target, falling back to the first "
                  << take << " source fragments\n";
        for (std::size_t i = 0; i < take; ++i) order[i] = static_cast<std::uint32_t>(i);
        order.resize(take);
        return order;
    }

    std::vector<double> distance(rows);
    const double target_norm = std::sqrt(target_norm2);
    for (std::size_t r = 0; r < rows; ++r) {
        const auto row = bank.row(r);
        double dot = 0.0;
        double norm2 = 0.0;
        for (std::size_t d = 0; d < row.size(); ++d) {
            const double b = static_cast<double>(row[d]) + shift;
            dot += (target_row[d] + shift) * b;
            norm2 += b * b;
        }
        distance[r] = norm2 == 0.0 ? 1.0 : 1.0 - dot / (target_norm * std::sqrt(norm2));
        order[r] = static_cast<std::uint32_t>(r);
    }

    std::partial_sort(order.begin(), order.begin() + take, order.end(),
                      [&distance](std::uint32_t a, std::uint32_t b) {
                          if (distance[a] != distance[b]) return distance[a] < distance[b];
                          return a < b;
                      });
    order.resize(take);
    return order;
}

AudioClip reconstruct_audio(const std::vector<Selection>& per_frame_selections,
                            const SpectralFrames& source, std::uint32_t sample_rate) {
    if (per_frame_selections.empty()) {
        throw std::invalid_argument("no frame selections to reconstruct");
    }
    for (std::size_t t = 0; t < per_frame_selections.size(); ++t) {
        const auto& slots = per_frame_selections[t].slots;
        if (slots.empty()) {
            throw std::invalid_argument("empty selection for frame " + std::to_string(t));
        }
        for (std::uint32_t s : slots) {
            if (s >= source.num_frames) {
                throw std::invalid_argument("selected source frame " + std::to_string(s) +
                                            " is missing from the complex-frame store");
            }
        }
    }
    const std::size_t nfft = source.nfft;
    const std::size_t hop = source.hop;
    const std::size_t bins = source.num_bins;

    fftw_complex* spec = fftw_alloc_complex(bins);
    double* frame_out = fftw_alloc_real(nfft);
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex());
        plan = fftw_plan_dft_c2r_1d(static_cast<int>(nfft), spec, frame_out, FFTW_ESTIMATE);
    }
    if (!plan) {
        fftw_free(spec);
        fftw_free(frame_out);
        throw std::runtime_error("failed to create an inverse FFT plan for nfft " +
                                 std::to_string(nfft));
    }

    const std::size_t total = (per_frame_selections.size() - 1) * hop + nfft;
    std::vector<double> accum(total, 0.0);
    std::vector<double> window_sum(total, 0.0);
    const double scale = 1.0 / static_cast<double>(nfft);  // FFTW c2r is unnormalized

    for (std::size_t t = 0; t < per_frame_selections.size(); ++t) {
        const auto& slots = per_frame_selections[t].slots;
        for (std::size_t f = 0; f < bins; ++f) {
            std::complex<double> sum = 0.0;
            for (std::uint32_t s : slots) sum += source.frames[s * bins + f];
            sum /= static_cast<double>(slots.size());
            spec[f][0] = sum.real();
            spec[f][1] = sum.imag();
        }
        fftw_execute(plan);
        for (std::size_t i = 0; i < nfft; ++i) {
            accum[t * hop + i] += frame_out[i] * scale;
            window_sum[t * hop + i] += window_value(source.window, i, nfft);
        }
    }

    {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex());
        fftw_destroy_plan(plan);
    }
    fftw_free(spec);
    fftw_free(frame_out);

    AudioClip clip;
    clip.sample_rate = sample_rate;
    clip.samples.resize(total);
    for (std::size_t i = 0; i < total; ++i) {
        const double v = window_sum[i] > 1e-12 ? accum[i] / window_sum[i] : 0.0;
        clip.samples[i] = std::clamp(v, -1.0, 1.0);
    }
    return clip;
}

}  // namespace mosaic
