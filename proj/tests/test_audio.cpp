#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "mosaic/audio.hpp"
#include "mosaic/rng.hpp"
#include "test_support.hpp"

using namespace mosaic;

namespace {

AudioClip random_clip(std::size_t length, std::uint64_t seed) {
    AudioClip clip;
    clip.samples.resize(length);
    Rng rng(seed);
    for (auto& s : clip.samples) s = 2.0 * rng.uniform_double() - 1.0;
    return clip;
}

// O(n^2) reference DFT of one windowless frame.
std::vector<std::complex<double>> naive_dft(std::span<const double> x, std::size_t bins) {
    std::vector<std::complex<double>> out(bins);
    const std::size_t n = x.size();
    for (std::size_t f = 0; f < bins; ++f) {
        std::complex<double> sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double angle = -2.0 * std::numbers::pi * static_cast<double>(f) *
                                 static_cast<double>(i) / static_cast<double>(n);
            sum += x[i] * std::complex<double>(std::cos(angle), std::sin(angle));
        }
        out[f] = sum;
    }
    return out;
}

// Reference inverse: rebuild the full Hermitian spectrum from the half
// spectrum and sum complex exponentials.
std::vector<double> naive_idft(std::span<const std::complex<double>> half, std::size_t nfft) {
    std::vector<std::complex<double>> full(nfft);
    for (std::size_t f = 0; f < half.size(); ++f) full[f] = half[f];
    for (std::size_t f = half.size(); f < nfft; ++f) full[f] = std::conj(half[nfft - f]);

    std::vector<double> out(nfft);
    for (std::size_t i = 0; i < nfft; ++i) {
        std::complex<double> sum = 0.0;
        for (std::size_t f = 0; f < nfft; ++f) {
            const double angle = 2.0 * std::numbers::pi * static_cast<double>(f) *
                                 static_cast<double>(i) / static_cast<double>(nfft);
            sum += full[f] * std::complex<double>(std::cos(angle), std::sin(angle));
        }
        out[i] = sum.real() / static_cast<double>(nfft);
    }
    return out;
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

void write_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    REQUIRE(f.good());
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

void push_u16(std::vector<unsigned char>& b, std::uint16_t v) {
    b.push_back(static_cast<unsigned char>(v & 0xFF));
    b.push_back(static_cast<unsigned char>(v >> 8));
}

void push_u32(std::vector<unsigned char>& b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

// Hand-built WAV container for formats write_wav does not emit.
std::vector<unsigned char> build_wav(std::uint16_t format, std::uint16_t channels,
                                     std::uint32_t rate, std::uint16_t bits,
                                     const std::vector<unsigned char>& payload) {
    std::vector<unsigned char> b;
    const char* riff = "RIFF";
    b.insert(b.end(), riff, riff + 4);
    push_u32(b, 36 + static_cast<std::uint32_t>(payload.size()));
    const char* wavefmt = "WAVEfmt ";
    b.insert(b.end(), wavefmt, wavefmt + 8);
    push_u32(b, 16);
    push_u16(b, format);
    push_u16(b, channels);
    push_u32(b, rate);
    push_u32(b, rate * channels * bits / 8);
    push_u16(b, static_cast<std::uint16_t>(channels * bits / 8));
    push_u16(b, bits);
    const char* data = "data";
    b.insert(b.end(), data, data + 4);
    push_u32(b, static_cast<std::uint32_t>(payload.size()));
    b.insert(b.end(), payload.begin(), payload.end());
    return b;
}

}  // namespace

TEST_CASE("dc signal concentrates in bin zero") {
    AudioClip clip;
    clip.samples.assign(64, 1.0);
    const auto spectral = stft_frames(clip, 64);
    REQUIRE(spectral.num_frames == 1);
    REQUIRE(spectral.num_bins == 33);
    CHECK(spectral.frame(0)[0].real() == doctest::Approx(64.0).epsilon(1e-12));
    CHECK(spectral.frame(0)[0].imag() == doctest::Approx(0.0).epsilon(1e-12));
    for (std::size_t f = 1; f < spectral.num_bins; ++f) {
        CHECK(std::abs(spectral.frame(0)[f]) < 1e-9);
    }
}

TEST_CASE("frame count discards the trailing partial frame") {
    const auto clip = random_clip(100, 1);
    CHECK(stft_frames(clip, 32, 16).num_frames == 5);
    CHECK(stft_frames(clip, 32).num_frames == 3);       // hop defaults to nfft
    CHECK(stft_frames(clip, 100).num_frames == 1);
    CHECK_THROWS_AS(stft_frames(random_clip(31, 2), 32), std::invalid_argument);
}

TEST_CASE("bin count is nfft/2 + 1 for the experiment size") {
    AudioClip clip;
    clip.samples.assign(8192, 0.0);
    const auto spectral = stft_frames(clip, 8192);
    CHECK(spectral.num_bins == 4097);
}

TEST_CASE("stft matches a naive dft") {
    const auto clip = random_clip(3 * 128, 3);
    const auto spectral = stft_frames(clip, 128);
    REQUIRE(spectral.num_frames == 3);
    for (std::size_t t = 0; t < 3; ++t) {
        const auto oracle =
            naive_dft({clip.samples.data() + t * 128, 128}, spectral.num_bins);
        for (std::size_t f = 0; f < spectral.num_bins; ++f) {
            CHECK(spectral.frame(t)[f].real() ==
                  doctest::Approx(oracle[f].real()).epsilon(1e-9).scale(128.0));
            CHECK(spectral.frame(t)[f].imag() ==
                  doctest::Approx(oracle[f].imag()).epsilon(1e-9).scale(128.0));
        }
    }
}

TEST_CASE("pure tone at an exact bin frequency concentrates there") {
    const std::size_t nfft = 256;
    const std::size_t bin = 5;
    AudioClip clip;
    clip.samples.resize(nfft);
    for (std::size_t i = 0; i < nfft; ++i) {
        clip.samples[i] = std::sin(2.0 * std::numbers::pi * static_cast<double>(bin) *
                                   static_cast<double>(i) / static_cast<double>(nfft));
    }
    const auto spectral = stft_frames(clip, nfft);
    CHECK(std::abs(spectral.frame(0)[bin]) == doctest::Approx(nfft / 2.0).epsilon(1e-9));
    for (std::size_t f = 0; f < spectral.num_bins; ++f) {
        if (f != bin) CHECK(std::abs(spectral.frame(0)[f]) < 1e-8);
    }
}

TEST_CASE("db scaling hits the reference, decade and floor anchors") {
    SpectralFrames spectral;
    spectral.nfft = 4;
    spectral.hop = 4;
    spectral.num_frames = 1;
    spectral.num_bins = 3;
    spectral.frames = {{2.5, 0.0}, {0.0, 25.0}, {0.0, 0.0}};
    apply_db_scaling(spectral, 2.5);
    CHECK(spectral.magnitudes_db[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(spectral.magnitudes_db[1] == doctest::Approx(20.0).epsilon(1e-12));
    CHECK(spectral.magnitudes_db[2] == kDbFloor);

    CHECK_THROWS_AS(apply_db_scaling(spectral, 0.0), std::invalid_argument);
}

TEST_CASE("db magnitudes are invariant to a global phase rotation") {
    const auto clip = random_clip(4 * 64, 5);
    auto spectral = stft_frames(clip, 64);
    const double ref = max_magnitude(spectral);
    apply_db_scaling(spectral, ref);

    auto rotated = spectral;
    const std::complex<double> phase = std::polar(1.0, 0.7);
    for (auto& x : rotated.frames) x *= phase;
    apply_db_scaling(rotated, ref);

    for (std::size_t i = 0; i < spectral.magnitudes_db.size(); ++i) {
        CHECK(rotated.magnitudes_db[i] ==
              doctest::Approx(spectral.magnitudes_db[i]).epsilon(1e-9));
    }
}

TEST_CASE("magnitude bank carries one row per frame") {
    const auto clip = random_clip(5 * 32, 6);
    auto spectral = stft_frames(clip, 32);
    apply_db_scaling(spectral, max_magnitude(spectral));
    const auto bank = magnitude_bank(spectral);
    CHECK(bank.rows() == 5);
    CHECK(bank.dim() == 17);
    CHECK(bank.modality() == Modality::kAudioMagnitude);
    for (std::size_t t = 0; t < 5; ++t) {
        for (std::size_t f = 0; f < 17; ++f) {
            CHECK(bank.row(t)[f] ==
                  static_cast<float>(spectral.magnitudes_db[t * 17 + f]));
        }
    }

    SpectralFrames unscaled = stft_frames(clip, 32);
    CHECK_THROWS_AS(magnitude_bank(unscaled), std::invalid_argument);
}

TEST_CASE("topk ranks a self-match first and agrees with a full sort") {
    const auto bank = test::random_bank(10, 6, 7, 5.0);

    std::vector<double> target(6);
    for (std::size_t d = 0; d < 6; ++d) target[d] = bank.row(4)[d];
    const auto ranked = topk_candidates(target, bank, 3, 0.0);
    REQUIRE(ranked.size() == 3);
    CHECK(ranked[0] == 4);

    // full-sort oracle on explicit cosine distances
    Rng rng(8);
    std::vector<double> probe(6);
    for (auto& v : probe) v = rng.uniform_double() + 0.1;
    std::vector<std::pair<double, std::uint32_t>> scored;
    for (std::uint32_t r = 0; r < 10; ++r) {
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (std::size_t d = 0; d < 6; ++d) {
            dot += probe[d] * bank.row(r)[d];
            na += probe[d] * probe[d];
            nb += static_cast<double>(bank.row(r)[d]) * bank.row(r)[d];
        }
        scored.emplace_back(1.0 - dot / std::sqrt(na * nb), r);
    }
    std::sort(scored.begin(), scored.end());
    const auto got = topk_candidates(probe, bank, 3, 0.0);
    for (std::size_t i = 0; i < 3; ++i) CHECK(got[i] == scored[i].second);
}

TEST_CASE("topk is scale invariant, caps at the bank size and breaks ties low") {
    const auto bank = test::random_bank(8, 5, 9, 2.0);
    std::vector<double> target(5);
    Rng rng(10);
    for (auto& v : target) v = rng.uniform_double() + 0.05;

    const auto base = topk_candidates(target, bank, 4, 0.0);
    std::vector<double> scaled(target);
    for (auto& v : scaled) v *= 2.5;
    CHECK(topk_candidates(scaled, bank, 4, 0.0) == base);

    CHECK(topk_candidates(target, bank, 50, 0.0).size() == 8);

    // identical rows: the lower index must win
    std::vector<float> dup = {1.0f, 2.0f, 1.0f, 2.0f, 1.0f, 2.0f};
    FragmentBank dup_bank(3, 2, std::move(dup), {2}, Modality::kRaw);
    std::vector<double> t2 = {1.0, 2.0};
    const auto order = topk_candidates(t2, dup_bank, 3, 0.0);
    CHECK(order == std::vector<std::uint32_t>{0, 1, 2});
}

TEST_CASE("topk flags zero-norm targets and rows") {
    const auto bank = test::random_bank(5, 3, 11, 1.0);
    std::vector<double> zeros(3, 0.0);
    const auto fallback = topk_candidates(zeros, bank, 2, 0.0);
    CHECK(fallback == std::vector<std::uint32_t>{0, 1});

    // a zero row ranks last even though its dot with anything is zero
    std::vector<float> data = {0.0f, 0.0f, 3.0f, 1.0f, 2.0f, 2.0f};
    FragmentBank mixed(3, 2, std::move(data), {2}, Modality::kRaw);
    std::vector<double> probe = {3.0, 1.0};
    const auto ranked = topk_candidates(probe, mixed, 3, 0.0);
    CHECK(ranked[0] == 1);
    CHECK(ranked[2] == 0);
}

TEST_CASE("rectangular self-reconstruction is an identity") {
    const auto clip = random_clip(3 * 64, 12);
    const auto spectral = stft_frames(clip, 64);
    std::vector<Selection> identity;
    for (std::uint32_t t = 0; t < 3; ++t) identity.push_back(Selection{{t}});
    const auto rebuilt = reconstruct_audio(identity, spectral, clip.sample_rate);
    REQUIRE(rebuilt.samples.size() == clip.samples.size());
    for (std::size_t i = 0; i < clip.samples.size(); ++i) {
        CHECK(rebuilt.samples[i] == doctest::Approx(clip.samples[i]).epsilon(1e-9));
    }
}

TEST_CASE("hann half-overlap self-reconstruction is an identity off the edges") {
    const auto clip = random_clip(4 * 64, 13);
    const auto spectral = stft_frames(clip, 64, 32, WindowKind::kHann);
    std::vector<Selection> identity;
    for (std::uint32_t t = 0; t < spectral.num_frames; ++t) identity.push_back(Selection{{t}});
    const auto rebuilt = reconstruct_audio(identity, spectral, clip.sample_rate);
    // sample 0 has zero accumulated window (hann(0) = 0); everything else
    // divides the window sum back out exactly
    for (std::size_t i = 1; i < rebuilt.samples.size(); ++i) {
        CHECK(rebuilt.samples[i] == doctest::Approx(clip.samples[i]).epsilon(1e-9));
    }
}

TEST_CASE("averaging two identical frames equals the single-frame mosaic") {
    const auto clip = random_clip(2 * 32, 14);
    const auto spectral = stft_frames(clip, 32);
    const auto one = reconstruct_audio({Selection{{1}}, Selection{{0}}}, spectral, 22050);
    const auto two =
        reconstruct_audio({Selection{{1, 1}}, Selection{{0, 0}}}, spectral, 22050);
    REQUIRE(one.samples.size() == two.samples.size());
    for (std::size_t i = 0; i < one.samples.size(); ++i) {
        CHECK(two.samples[i] == doctest::Approx(one.samples[i]).epsilon(1e-12));
    }
}

TEST_CASE("random mosaics match a naive inverse-transform oracle") {
    const auto source = random_clip(4 * 16, 15);
    const auto spectral = stft_frames(source, 16);
    Rng rng(16);
    std::vector<Selection> selections;
    for (int t = 0; t < 3; ++t) {
        Selection sel;
        for (int c = 0; c < 3; ++c) {
            sel.slots.push_back(static_cast<std::uint32_t>(rng.uniform_index(4)));
        }
        selections.push_back(sel);
    }

    const auto rebuilt = reconstruct_audio(selections, spectral, 22050);
    REQUIRE(rebuilt.samples.size() == 3 * 16);

    for (std::size_t t = 0; t < 3; ++t) {
        std::vector<std::complex<double>> avg(spectral.num_bins, 0.0);
        for (std::uint32_t s : selections[t].slots) {
            for (std::size_t f = 0; f < spectral.num_bins; ++f) {
                avg[f] += spectral.frame(s)[f];
            }
        }
        for (auto& x : avg) x /= 3.0;
        const auto frame = naive_idft(avg, 16);
        for (std::size_t i = 0; i < 16; ++i) {
            CHECK(rebuilt.samples[t * 16 + i] ==
                  doctest::Approx(std::clamp(frame[i], -1.0, 1.0)).epsilon(1e-6));
        }
    }
}

TEST_CASE("reconstruction rejects out-of-store selections") {
    const auto clip = random_clip(2 * 32, 17);
    const auto spectral = stft_frames(clip, 32);
    CHECK_THROWS_WITH_AS(reconstruct_audio({Selection{{7}}}, spectral, 22050),
                         doctest::Contains("missing"), std::invalid_argument);
}

TEST_CASE("wav round-trip: silence is exact, full-scale sine within one lsb") {
    AudioClip silence;
    silence.samples.assign(100, 0.0);
    const auto silence_path = temp_file("mosaic_silence.wav");
    write_wav(silence_path.string(), silence);
    const auto silence_back = load_wav(silence_path.string());
    REQUIRE(silence_back.samples.size() == 100);
    for (double v : silence_back.samples) CHECK(v == 0.0);
    std::filesystem::remove(silence_path);

    AudioClip sine;
    sine.sample_rate = 22050;
    sine.samples.resize(500);
    for (std::size_t i = 0; i < sine.samples.size(); ++i) {
        sine.samples[i] = std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / 50.0);
    }
    const auto sine_path = temp_file("mosaic_sine.wav");
    write_wav(sine_path.string(), sine);
    const auto sine_back = load_wav(sine_path.string());
    REQUIRE(sine_back.samples.size() == sine.samples.size());
    CHECK(sine_back.sample_rate == 22050);
    for (std::size_t i = 0; i < sine.samples.size(); ++i) {
        CHECK(std::abs(sine_back.samples[i] - sine.samples[i]) <= 1.0 / 32768.0);
    }
    std::filesystem::remove(sine_path);
}

TEST_CASE("float32 wav input and stereo downmix") {
    std::vector<unsigned char> payload;
    const std::vector<std::pair<float, float>> frames = {
        {0.5f, -0.5f}, {0.25f, 0.75f}, {-1.0f, -1.0f}};
    for (const auto& [l, r] : frames) {
        push_u32(payload, std::bit_cast<std::uint32_t>(l));
        push_u32(payload, std::bit_cast<std::uint32_t>(r));
    }
    const auto path = temp_file("mosaic_stereo.wav");
    write_bytes(path, build_wav(3, 2, 22050, 32, payload));

    const auto clip = load_wav(path.string());
    REQUIRE(clip.samples.size() == 3);
    CHECK(clip.samples[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(clip.samples[1] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(clip.samples[2] == doctest::Approx(-1.0).epsilon(1e-12));
    std::filesystem::remove(path);
}

TEST_CASE("mismatched sample rates resample by linear interpolation") {
    std::vector<unsigned char> payload;
    std::vector<double> ramp(41);
    for (std::size_t i = 0; i < ramp.size(); ++i) {
        ramp[i] = static_cast<double>(i) / 100.0;
        push_u16(payload,
                 static_cast<std::uint16_t>(static_cast<std::int16_t>(
                     std::lround(ramp[i] * 32768.0))));
    }
    const auto path = temp_file("mosaic_44k.wav");
    write_bytes(path, build_wav(1, 1, 44100, 16, payload));

    const auto clip = load_wav(path.string(), 22050);
    CHECK(clip.sample_rate == 22050);
    REQUIRE(clip.samples.size() == 21);  // floor(40/2) + 1
    for (std::size_t i = 0; i < clip.samples.size(); ++i) {
        CHECK(clip.samples[i] ==
              doctest::Approx(std::round(ramp[2 * i] * 32768.0) / 32768.0).epsilon(1e-12));
    }
    std::filesystem::remove(path);
}

TEST_CASE("malformed and unsupported wav files are rejected") {
    CHECK_THROWS_AS(load_wav("/nonexistent/audio.wav"), std::runtime_error);

    const auto garbage_path = temp_file("mosaic_garbage.wav");
    write_bytes(garbage_path, {0x00, 0x01, 0x02, 0x03});
    CHECK_THROWS_WITH_AS(load_wav(garbage_path.string()), doctest::Contains("malformed"),
                         std::runtime_error);
    std::filesystem::remove(garbage_path);

    const auto eight_bit_path = temp_file("mosaic_8bit.wav");
    write_bytes(eight_bit_path, build_wav(1, 1, 22050, 8, {0x80, 0x80}));
    CHECK_THROWS_WITH_AS(load_wav(eight_bit_path.string()), doctest::Contains("unsupported"),
                         std::runtime_error);
    std::filesystem::remove(eight_bit_path);
}
