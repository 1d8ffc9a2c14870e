#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mosaic/fragment_bank.hpp"
#include "mosaic/model.hpp"

namespace mosaic {

// Default project sample rate; loaded clips are resampled to this.
inline constexpr std::uint32_t kProjectSampleRate = 22050;

// Floor inside the log when converting magnitudes to dB.
inline constexpr double kDbEpsilon = 1e-10;
inline constexpr double kDbFloor = -100.0;

struct AudioClip {
    std::vector<double> samples;  // [-1,1]
    std::uint32_t sample_rate = kProjectSampleRate;
};

enum class WindowKind { kRectangular, kHann };

// STFT of one clip: num_frames x num_bins complex spectra (num_bins =
// nfft/2+1) plus, once apply_db_scaling has run, the dB-magnitude matrix that
// serves as the observation space.
struct SpectralFrames {
    std::size_t nfft = 0;
    std::size_t hop = 0;
    WindowKind window = WindowKind::kRectangular;
    std::size_t num_frames = 0;
    std::size_t num_bins = 0;
    std::vector<std::complex<double>> frames;  // row-major num_frames x num_bins
    std::vector<double> magnitudes_db;         // same shape; empty until scaled
    double db_reference = 1.0;
    double db_floor = kDbFloor;

    std::span<const std::complex<double>> frame(std::size_t t) const {
        return {frames.data() + t * num_bins, num_bins};
    }
    std::span<const double> magnitude_row(std::size_t t) const {
        return {magnitudes_db.data() + t * num_bins, num_bins};
    }
};

// Frames the clip at the given hop and applies the analysis window before a
// forward real FFT. Frame t covers samples [t*hop, t*hop + nfft); the
// trailing partial frame is discarded. Defaults to contiguous rectangular
// frames (hop = nfft when hop is 0).
SpectralFrames stft_frames(const AudioClip& clip, std::size_t nfft, std::size_t hop = 0,
                           WindowKind window = WindowKind::kRectangular);

// Largest magnitude over all frames; the per-run dB reference.
double max_magnitude(const SpectralFrames& spectral);

// Fills magnitudes_db with max(20*log10(max(|X|, eps)/db_reference), db_floor).
void apply_db_scaling(SpectralFrames& spectral, double db_reference,
                      double db_floor = kDbFloor);

// One bank row per frame, taken from the dB-magnitude matrix.
FragmentBank magnitude_bank(const SpectralFrames& spectral);

// Indices of the k bank rows closest to the target row in cosine distance,
// ranked ascending, ties broken by lower index. Rows and target are shifted
// by `shift` first (pass -db_floor so dB rows become nonnegative). Zero-norm
// rows after the shift rank last (distance 1); a zero-norm target falls back
// to the first k indices with a warning on stderr.
std::vector<std::uint32_t> topk_candidates(std::span<const double> target_row,
                                           const FragmentBank& bank, std::size_t k,
                                           double shift);

// Mosaic frame t = mean of the selected source complex frames; inverse real
// FFT per frame, then overlap-add with normalization by the accumulated
// analysis window (plain concatenation for rectangular hop = nfft). Output
// clamped to [-1,1].
AudioClip reconstruct_audio(const std::vector<Selection>& per_frame_selections,
                            const SpectralFrames& source, std::uint32_t sample_rate);

// WAV I/O: PCM16 or float32, mono or downmixed-to-mono, resampled to
// project_rate by linear interpolation when rates differ.
AudioClip load_wav(const std::string& path, std::uint32_t project_rate = kProjectSampleRate);
void write_wav(const std::string& path, const AudioClip& clip);

}  // namespace mosaic
