#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "mosaic/fragment_bank.hpp"
#include "mosaic/model.hpp"

namespace mosaic {

// Dense height x width x channels raster, row-major (row, col, channel),
// values normalized to [0,1]. channels is 1 (gray) or 3 (RGB).
struct ImageTensor {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    std::vector<double> data;

    double& at(std::size_t row, std::size_t col, std::size_t ch) {
        return data[(row * width + col) * channels + ch];
    }
    double at(std::size_t row, std::size_t col, std::size_t ch) const {
        return data[(row * width + col) * channels + ch];
    }

    // Checks shape/data consistency, channel count and [0,1] range.
    void validate() const;
};

// Placement of square tiles over an image: every (row, col) offset on the
// stride lattice whose window fits entirely inside, row-major order.
struct TileGrid {
    std::size_t image_height = 0;
    std::size_t image_width = 0;
    std::size_t channels = 0;
    std::size_t window = 0;
    std::size_t stride = 0;
    std::vector<std::pair<std::size_t, std::size_t>> tiles;  // (row_offset, col_offset)
};

TileGrid make_tile_grid(std::size_t height, std::size_t width, std::size_t channels,
                        std::size_t window, std::size_t stride);

// Cuts the image into the grid's tiles, each flattened row-major
// (row, col, channel) into a length window*window*channels fragment.
std::pair<TileGrid, std::vector<std::vector<double>>> tile_image(const ImageTensor& image,
                                                                 std::size_t window,
                                                                 std::size_t stride);

// Bank for one tile position: row i is the window at the identical offset in
// source image i. Every source must contain the window.
FragmentBank build_inplace_bank(const std::vector<ImageTensor>& sources, std::size_t row_offset,
                                std::size_t col_offset, std::size_t window);

// Exact box-filter downscale of a square image whose side out_side divides;
// each output pixel is the unweighted mean of its source block, so the global
// mean is preserved exactly.
ImageTensor downscale_box(const ImageTensor& image, std::size_t out_side);

// Bilinear resampling to an arbitrary size; the inexact fallback used where
// the box filter's divisibility precondition does not hold, and for
// enlargement.
ImageTensor resize_bilinear(const ImageTensor& image, std::size_t out_height,
                            std::size_t out_width);

// Largest centered square crop.
ImageTensor center_crop_square(const ImageTensor& image);

// Resizes to side x side: center-crops to square, then box-downscales when
// the side divides evenly, bilinear otherwise.
ImageTensor resize_to_square(const ImageTensor& image, std::size_t side);

// Bank shared by every cell: row i = source i center-cropped to square and
// downscaled to cell_side.
FragmentBank build_photographic_bank(const std::vector<ImageTensor>& sources,
                                     std::size_t cell_side);

// Places one flattened tile per grid position; overlapping contributions are
// averaged per pixel (accumulate, then divide by coverage count), and the
// result is clamped to [0,1].
ImageTensor stitch_tiles(const TileGrid& grid, const std::vector<std::vector<double>>& tiles);

// stitch_tiles over each tile's averaged clip from a shared bank.
ImageTensor render_mosaic(const TileGrid& grid, const std::vector<Selection>& per_tile_selection,
                          const FragmentBank& bank);

}  // namespace mosaic
