#include "mosaic/fragment_bank.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

namespace mosaic {

FragmentBank::FragmentBank(std::size_t rows, std::size_t dim, std::vector<float> data,
                           std::vector<std::size_t> fragment_shape, Modality modality)
    : rows_(rows),
      dim_(dim),
      data_(std::move(data)),
      fragment_shape_(std::move(fragment_shape)),
      modality_(modality) {
    if (rows_ < 1 || dim_ < 1) {
        throw std::invalid_argument("fragment bank needs at least one row and one column");
    }
    if (data_.size() != rows_ * dim_) {
        throw std::invalid_argument("fragment bank data size " + std::to_string(data_.size()) +
                                    " does not match " + std::to_string(rows_) + "x" +
                                    std::to_string(dim_));
    }
    std::size_t shape_product = 1;
    for (std::size_t s : fragment_shape_) shape_product *= s;
    if (fragment_shape_.empty() || shape_product != dim_) {
        throw std::invalid_argument("fragment shape does not multiply out to row dimension");
    }
    for (float v : data_) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument("fragment bank contains non-finite values");
        }
    }
}

std::uint64_t FragmentBank::fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix_bytes = [&h](const void* p, std::size_t n) {
        const auto* bytes = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 0x100000001b3ULL;
        }
    };
    const std::uint64_t rows64 = rows_;
    const std::uint64_t dim64 = dim_;
    const std::uint64_t tag = static_cast<std::uint64_t>(modality_);
    mix_bytes(&rows64, sizeof rows64);
    mix_bytes(&dim64, sizeof dim64);
    mix_bytes(&tag, sizeof tag);
    for (std::size_t s : fragment_shape_) {
        const std::uint64_t s64 = s;
        mix_bytes(&s64, sizeof s64);
    }
    mix_bytes(data_.data(), data_.size() * sizeof(float));
    return h;
}

}  // namespace mosaic
