#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "mosaic/audio.hpp"

namespace mosaic {

namespace {

std::uint16_t read_u16(const std::vector<unsigned char>& b, std::size_t at) {
    return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

std::uint32_t read_u32(const std::vector<unsigned char>& b, std::size_t at) {
    return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
           (static_cast<std::uint32_t>(b[at + 2]) << 16) |
           (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

void append_u16(std::vector<unsigned char>& b, std::uint16_t v) {
    b.push_back(static_cast<unsigned char>(v & 0xFF));
    b.push_back(static_cast<unsigned char>(v >> 8));
}

void append_u32(std::vector<unsigned char>& b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

bool chunk_is(const std::vector<unsigned char>& b, std::size_t at, const char* id) {
    return std::memcmp(b.data() + at, id, 4) == 0;
}

// Mean-downmix interleaved multi-channel samples to mono.
std::vector<double> downmix(const std::vector<double>& interleaved, std::size_t channels) {
    if (channels == 1) return interleaved;
    std::vector<double> mono(interleaved.size() / channels);
    for (std::size_t i = 0; i < mono.size(); ++i) {
        double sum = 0.0;
        for (std::size_t c = 0; c < channels; ++c) sum += interleaved[i * channels + c];
        mono[i] = sum / static_cast<double>(channels);
    }
    return mono;
}

// Linear-interpolation resampler.
std::vector<double> resample_linear(const std::vector<double>& in, std::uint32_t in_rate,
                                    std::uint32_t out_rate) {
    if (in_rate == out_rate || in.size() < 2) return in;
    const double ratio = static_cast<double>(in_rate) / static_cast<double>(out_rate);
    const std::size_t out_len = static_cast<std::size_t>(
                                    std::floor(static_cast<double>(in.size() - 1) / ratio)) +
                                1;
    std::vector<double> out(out_len);
    for (std::size_t i = 0; i < out_len; ++i) {
        const double pos = static_cast<double>(i) * ratio;
        const std::size_t i0 = static_cast<std::size_t>(pos);
        const std::size_t i1 = std::min(i0 + 1, in.size() - 1);
        const double frac = pos - static_cast<double>(i0);
        out[i] = in[i0] * (1.0 - frac) + in[i1] * frac;
    }
    return out;
}

}  // namespace

AudioClip load_wav(const std::string& path, std::uint32_t project_rate) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("cannot open WAV file: " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(file)),
                                     std::istreambuf_iterator<char>());

    if (bytes.size() < 44 || !chunk_is(bytes, 0, "RIFF") || !chunk_is(bytes, 8, "WAVE")) {
        throw std::runtime_error("malformed WAV file (missing RIFF/WAVE header): " + path);
    }

    std::uint16_t format = 0;
    std::uint16_t channels = 0;
    std::uint32_t sample_rate = 0;
    std::uint16_t bits = 0;
    std::size_t data_at = 0;
    std::size_t data_size = 0;
    bool have_fmt = false;

    std::size_t at = 12;
    while (at + 8 <= bytes.size()) {
        const std::uint32_t size = read_u32(bytes, at + 4);
        const std::size_t payload = at + 8;
        if (payload + size > bytes.size()) {
            throw std::runtime_error("malformed WAV file (truncated chunk): " + path);
        }
        if (chunk_is(bytes, at, "fmt ")) {
            if (size < 16) throw std::runtime_error("malformed WAV file (short fmt): " + path);
            format = read_u16(bytes, payload);
            channels = read_u16(bytes, payload + 2);
            sample_rate = read_u32(bytes, payload + 4);
            bits = read_u16(bytes, payload + 14);
            // WAVE_FORMAT_EXTENSIBLE wraps the effective format in a GUID.
            if (format == 0xFFFE && size >= 40) format = read_u16(bytes, payload + 24);
            have_fmt = true;
        } else if (chunk_is(bytes, at, "data")) {
            data_at = payload;
            data_size = size;
        }
        at = payload + size + (size % 2);  // chunks are word-aligned
    }

    if (!have_fmt || data_at == 0) {
        throw std::runtime_error("malformed WAV file (missing fmt or data chunk): " + path);
    }
    if (channels == 0 || sample_rate == 0) {
        throw std::runtime_error("malformed WAV file (zero channels or rate): " + path);
    }

    std::vector<double> interleaved;
    if (format == 1 && bits == 16) {
        const std::size_t count = data_size / 2;
        interleaved.resize(count);
        for (std::size_t i = 0; i < count; ++i) {
            const auto raw = static_cast<std::int16_t>(read_u16(bytes, data_at + 2 * i));
            interleaved[i] = static_cast<double>(raw) / 32768.0;
        }
    } else if (format == 3 && bits == 32) {
        const std::size_t count = data_size / 4;
        interleaved.resize(count);
        for (std::size_t i = 0; i < count; ++i) {
            const std::uint32_t raw = read_u32(bytes, data_at + 4 * i);
            interleaved[i] = static_cast<double>(std::bit_cast<float>(raw));
        }
    } else {
        throw std::runtime_error("unsupported WAV encoding (format " + std::to_string(format) +
                                 ", " + std::to_string(bits) + "-bit) in " + path +
                                 "; PCM16 and float32 are supported");
    }

    AudioClip clip;
    clip.samples = resample_linear(downmix(interleaved, channels), sample_rate, project_rate);
    clip.sample_rate = project_rate;
    for (double& v : clip.samples) {
        if (!std::isfinite(v)) throw std::runtime_error("non-finite sample in " + path);
        v = std::clamp(v, -1.0, 1.0);
    }
    return clip;
}

void write_wav(const std::string& path, const AudioClip& clip) {
    const std::uint32_t data_size = static_cast<std::uint32_t>(clip.samples.size() * 2);

    std::vector<unsigned char> bytes;
    bytes.reserve(44 + data_size);
    const char* riff = "RIFF";
    bytes.insert(bytes.end(), riff, riff + 4);
    append_u32(bytes, 36 + data_size);
    const char* wavefmt = "WAVEfmt ";
    bytes.insert(bytes.end(), wavefmt, wavefmt + 8);
    append_u32(bytes, 16);                       // fmt chunk size
    append_u16(bytes, 1);                        // PCM
    append_u16(bytes, 1);                        // mono
    append_u32(bytes, clip.sample_rate);
    append_u32(bytes, clip.sample_rate * 2);     // byte rate
    append_u16(bytes, 2);                        // block align
    append_u16(bytes, 16);                       // bits per sample
    const char* data = "data";
    bytes.insert(bytes.end(), data, data + 4);
    append_u32(bytes, data_size);
    for (double v : clip.samples) {
        // Symmetric 32768 scale keeps the load(write(x)) error within
        // 1/32768 per sample; +1.0 saturates to 32767.
        const double scaled = std::clamp(std::round(v * 32768.0), -32768.0, 32767.0);
        append_u16(bytes, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
    }

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw std::runtime_error("cannot open output file: " + path);
    file.write(reinterpret_cast<const char*>(bytes.data()),
               static_cast<std::streamsize>(bytes.size()));
    if (!file) throw std::runtime_error("failed to write WAV file: " + path);
}

}  // namespace mosaic
