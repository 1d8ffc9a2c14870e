#include "mosaic/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mosaic {

void ImageTensor::validate() const {
    if (channels != 1 && channels != 3) {
        throw std::invalid_argument("image must have 1 or 3 channels, got " +
                                    std::to_string(channels));
    }
    if (height == 0 || width == 0) throw std::invalid_argument("image has empty dimensions");
    if (data.size() != height * width * channels) {
        throw std::invalid_argument("image data size " + std::to_string(data.size()) +
                                    " does not match " + std::to_string(height) + "x" +
                                    std::to_string(width) + "x" + std::to_string(channels));
    }
    for (double v : data) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
            throw std::invalid_argument("image values must be finite and within [0,1]");
        }
    }
}

TileGrid make_tile_grid(std::size_t height, std::size_t width, std::size_t channels,
                        std::size_t window, std::size_t stride) {
    if (window == 0 || window > std::min(height, width)) {
        throw std::invalid_argument("window " + std::to_string(window) +
                                    " does not fit a " + std::to_string(height) + "x" +
                                    std::to_string(width) + " image");
    }
    if (stride == 0 || stride > window) {
        throw std::invalid_argument("stride " + std::to_string(stride) +
                                    " must be in [1, window]");
    }

    TileGrid grid;
    grid.image_height = height;
    grid.image_width = width;
    grid.channels = channels;
    grid.window = window;
    grid.stride = stride;
    for (std::size_t r = 0; r + window <= height; r += stride) {
        for (std::size_t c = 0; c + window <= width; c += stride) {
            grid.tiles.emplace_back(r, c);
        }
    }
    return grid;
}

std::pair<TileGrid, std::vector<std::vector<double>>> tile_image(const ImageTensor& image,
                                                                 std::size_t window,
                                                                 std::size_t stride) {
    image.validate();
    TileGrid grid = make_tile_grid(image.height, image.width, image.channels, window, stride);

    std::vector<std::vector<double>> fragments;
    fragments.reserve(grid.tiles.size());
    for (const auto& [row_off, col_off] : grid.tiles) {
        std::vector<double> frag;
        frag.reserve(window * window * image.channels);
        for (std::size_t r = 0; r < window; ++r) {
            for (std::size_t c = 0; c < window; ++c) {
                for (std::size_t ch = 0; ch < image.channels; ++ch) {
                    frag.push_back(image.at(row_off + r, col_off + c, ch));
                }
            }
        }
        fragments.push_back(std::move(frag));
    }
    return {std::move(grid), std::move(fragments)};
}

FragmentBank build_inplace_bank(const std::vector<ImageTensor>& sources, std::size_t row_offset,
                                std::size_t col_offset, std::size_t window) {
    if (sources.empty()) throw std::invalid_argument("source image list is empty");

    const std::size_t channels = sources.front().channels;
    const std::size_t dim = window * window * channels;
    std::vector<float> data;
    data.reserve(sources.size() * dim);

    for (std::size_t i = 0; i < sources.size(); ++i) {
        const ImageTensor& src = sources[i];
        if (src.channels != channels) {
            throw std::invalid_argument("source image " + std::to_string(i) +
                                        " has mismatched channel count");
        }
        if (row_offset + window > src.height || col_offset + window > src.width) {
            throw std::invalid_argument(
                "source image " + std::to_string(i) + " (" + std::to_string(src.height) + "x" +
                std::to_string(src.width) + ") does not contain a " + std::to_string(window) +
                "-pixel window at offset (" + std::to_string(row_offset) + ", " +
                std::to_string(col_offset) + ")");
        }
        for (std::size_t r = 0; r < window; ++r) {
            for (std::size_t c = 0; c < window; ++c) {
                for (std::size_t ch = 0; ch < channels; ++ch) {
                    data.push_back(
                        static_cast<float>(src.at(row_offset + r, col_offset + c, ch)));
                }
            }
        }
    }
    return FragmentBank(sources.size(), dim, std::move(data), {window, window, channels},
                        Modality::kImage);
}

ImageTensor downscale_box(const ImageTensor& image, std::size_t out_side) {
    image.validate();
    if (image.height != image.width) {
        throw std::invalid_argument("box downscale requires a square image, got " +
                                    std::to_string(image.height) + "x" +
                                    std::to_string(image.width));
    }
    if (out_side == 0 || image.height % out_side != 0) {
        throw std::invalid_argument("output side " + std::to_string(out_side) +
                                    " must divide the input side " +
                                    std::to_string(image.height));
    }

    const std::size_t block = image.height / out_side;
    ImageTensor out;
    out.height = out_side;
    out.width = out_side;
    out.channels = image.channels;
    out.data.assign(out_side * out_side * image.channels, 0.0);

    const double norm = 1.0 / static_cast<double>(block * block);
    for (std::size_t r = 0; r < out_side; ++r) {
        for (std::size_t c = 0; c < out_side; ++c) {
            for (std::size_t ch = 0; ch < image.channels; ++ch) {
                double sum = 0.0;
                for (std::size_t br = 0; br < block; ++br) {
                    for (std::size_t bc = 0; bc < block; ++bc) {
                        sum += image.at(r * block + br, c * block + bc, ch);
                    }
                }
                out.at(r, c, ch) = sum * norm;
            }
        }
    }
    return out;
}

ImageTensor resize_bilinear(const ImageTensor& image, std::size_t out_height,
                            std::size_t out_width) {
    image.validate();
    if (out_height == 0 || out_width == 0) {
        throw std::invalid_argument("bilinear resize target must be nonempty");
    }

    ImageTensor out;
    out.height = out_height;
    out.width = out_width;
    out.channels = image.channels;
    out.data.resize(out_height * out_width * image.channels);

    // Align pixel centers: source position = (i + 0.5) * scale - 0.5.
    const double scale_r = static_cast<double>(image.height) / out_height;
    const double scale_c = static_cast<double>(image.width) / out_width;
    for (std::size_t r = 0; r < out_height; ++r) {
        const double sr = std::clamp((r + 0.5) * scale_r - 0.5, 0.0,
                                     static_cast<double>(image.height - 1));
        const std::size_t r0 = static_cast<std::size_t>(sr);
        const std::size_t r1 = std::min(r0 + 1, image.height - 1);
        const double fr = sr - static_cast<double>(r0);
        for (std::size_t c = 0; c < out_width; ++c) {
            const double sc = std::clamp((c + 0.5) * scale_c - 0.5, 0.0,
                                         static_cast<double>(image.width - 1));
            const std::size_t c0 = static_cast<std::size_t>(sc);
            const std::size_t c1 = std::min(c0 + 1, image.width - 1);
            const double fc = sc - static_cast<double>(c0);
            for (std::size_t ch = 0; ch < image.channels; ++ch) {
                const double top = image.at(r0, c0, ch) * (1.0 - fc) + image.at(r0, c1, ch) * fc;
                const double bot = image.at(r1, c0, ch) * (1.0 - fc) + image.at(r1, c1, ch) * fc;
                out.at(r, c, ch) = std::clamp(top * (1.0 - fr) + bot * fr, 0.0, 1.0);
            }
        }
    }
    return out;
}

ImageTensor center_crop_square(const ImageTensor& image) {
    image.validate();
    const std::size_t side = std::min(image.height, image.width);
    if (side == image.height && side == image.width) return image;

    const std::size_t row_off = (image.height - side) / 2;
    const std::size_t col_off = (image.width - side) / 2;
    ImageTensor out;
    out.height = side;
    out.width = side;
    out.channels = image.channels;
    out.data.reserve(side * side * image.channels);
    for (std::size_t r = 0; r < side; ++r) {
        for (std::size_t c = 0; c < side; ++c) {
            for (std::size_t ch = 0; ch < image.channels; ++ch) {
                out.data.push_back(image.at(row_off + r, col_off + c, ch));
            }
        }
    }
    return out;
}

ImageTensor resize_to_square(const ImageTensor& image, std::size_t side) {
    const ImageTensor square = center_crop_square(image);
    if (square.height == side) return square;
    if (square.height > side && square.height % side == 0) return downscale_box(square, side);
    return resize_bilinear(square, side, side);
}

FragmentBank build_photographic_bank(const std::vector<ImageTensor>& sources,
                                     std::size_t cell_side) {
    if (sources.empty()) throw std::invalid_argument("source image list is empty");

    const std::size_t channels = sources.front().channels;
    const std::size_t dim = cell_side * cell_side * channels;
    std::vector<float> data;
    data.reserve(sources.size() * dim);

    for (std::size_t i = 0; i < sources.size(); ++i) {
        if (sources[i].channels != channels) {
            throw std::invalid_argument("source image " + std::to_string(i) +
                                        " has mismatched channel count");
        }
        const ImageTensor cell = resize_to_square(sources[i], cell_side);
        for (double v : cell.data) data.push_back(static_cast<float>(v));
    }
    return FragmentBank(sources.size(), dim, std::move(data), {cell_side, cell_side, channels},
                        Modality::kImage);
}

ImageTensor stitch_tiles(const TileGrid& grid, const std::vector<std::vector<double>>& tiles) {
    if (tiles.size() != grid.tiles.size()) {
        throw std::invalid_argument("tile count " + std::to_string(tiles.size()) +
                                    " does not match grid position count " +
                                    std::to_string(grid.tiles.size()));
    }
    const std::size_t dim = grid.window * grid.window * grid.channels;

    std::vector<double> accum(grid.image_height * grid.image_width * grid.channels, 0.0);
    std::vector<std::uint32_t> coverage(grid.image_height * grid.image_width, 0);

    for (std::size_t t = 0; t < grid.tiles.size(); ++t) {
        const std::vector<double>& tile = tiles[t];
        if (tile.size() != dim) {
            throw std::invalid_argument("tile " + std::to_string(t) + " has " +
                                        std::to_string(tile.size()) + " values, expected " +
                                        std::to_string(dim));
        }
        const auto [row_off, col_off] = grid.tiles[t];
        std::size_t i = 0;
        for (std::size_t r = 0; r < grid.window; ++r) {
            for (std::size_t c = 0; c < grid.window; ++c) {
                const std::size_t pixel = (row_off + r) * grid.image_width + (col_off + c);
                for (std::size_t ch = 0; ch < grid.channels; ++ch) {
                    accum[pixel * grid.channels + ch] += tile[i++];
                }
                coverage[pixel]++;
            }
        }
    }

    ImageTensor out;
    out.height = grid.image_height;
    out.width = grid.image_width;
    out.channels = grid.channels;
    out.data.resize(accum.size(), 0.0);
    for (std::size_t pixel = 0; pixel < coverage.size(); ++pixel) {
        if (coverage[pixel] == 0) continue;  // uncovered margin stays black
        const double norm = 1.0 / coverage[pixel];
        for (std::size_t ch = 0; ch < grid.channels; ++ch) {
            out.data[pixel * grid.channels + ch] =
                std::clamp(accum[pixel * grid.channels + ch] * norm, 0.0, 1.0);
        }
    }
    return out;
}

ImageTensor render_mosaic(const TileGrid& grid, const std::vector<Selection>& per_tile_selection,
                          const FragmentBank& bank) {
    if (per_tile_selection.size() != grid.tiles.size()) {
        throw std::invalid_argument("selection count " +
                                    std::to_string(per_tile_selection.size()) +
                                    " does not match tile count " +
                                    std::to_string(grid.tiles.size()));
    }
    if (bank.dim() != grid.window * grid.window * grid.channels) {
        throw std::invalid_argument("bank row dimension " + std::to_string(bank.dim()) +
                                    " does not match tile dimension " +
                                    std::to_string(grid.window * grid.window * grid.channels));
    }

    std::vector<std::vector<double>> tiles;
    tiles.reserve(per_tile_selection.size());
    for (const auto& sel : per_tile_selection) tiles.push_back(average_clips(sel, bank));
    return stitch_tiles(grid, tiles);
}

}  // namespace mosaic
