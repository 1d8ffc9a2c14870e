#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace mosaic {

enum class Modality { kImage, kAudioMagnitude, kRaw };

// Immutable S x D matrix of flattened source fragments. Storage is 32-bit
// float; likelihood arithmetic promotes to double on read. Shared read-only
// across chains and workers.
class FragmentBank {
public:
    FragmentBank(std::size_t rows, std::size_t dim, std::vector<float> data,
                 std::vector<std::size_t> fragment_shape, Modality modality);

    std::size_t rows() const { return rows_; }
    std::size_t dim() const { return dim_; }

    std::span<const float> row(std::size_t i) const {
        return {data_.data() + i * dim_, dim_};
    }

    const std::vector<std::size_t>& fragment_shape() const { return fragment_shape_; }
    Modality modality() const { return modality_; }

    // FNV-1a over shape, modality and row data; identifies the corpus an
    // artifact was built against.
    std::uint64_t fingerprint() const;

private:
    std::size_t rows_;
    std::size_t dim_;
    std::vector<float> data_;
    std::vector<std::size_t> fragment_shape_;
    Modality modality_;
};

}  // namespace mosaic
