#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <jpeglib.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>

#include "mosaic/image.hpp"
#include "mosaic/image_io.hpp"
#include "mosaic/rng.hpp"
#include "test_support.hpp"

using namespace mosaic;

namespace {

ImageTensor random_image(std::size_t height, std::size_t width, std::size_t channels,
                         std::uint64_t seed) {
    ImageTensor image;
    image.height = height;
    image.width = width;
    image.channels = channels;
    image.data.resize(height * width * channels);
    Rng rng(seed);
    for (auto& v : image.data) v = rng.uniform_double();
    return image;
}

ImageTensor constant_image(std::size_t side, std::size_t channels, double value) {
    ImageTensor image;
    image.height = side;
    image.width = side;
    image.channels = channels;
    image.data.assign(side * side * channels, value);
    return image;
}

double image_mean(const ImageTensor& image) {
    return std::accumulate(image.data.begin(), image.data.end(), 0.0) / image.data.size();
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

// Encodes a JPEG with the canonical encoder so the decode path is tested
// against an independent implementation.
void write_reference_jpeg(const std::filesystem::path& path, const ImageTensor& image,
                          int quality) {
    jpeg_compress_struct cinfo;
    jpeg_error_mgr jerr;
    cinfo.err = jpeg_std_error(&jerr);
    jpeg_create_compress(&cinfo);

    std::FILE* fp = std::fopen(path.string().c_str(), "wb");
    REQUIRE(fp != nullptr);
    jpeg_stdio_dest(&cinfo, fp);

    cinfo.image_width = static_cast<JDIMENSION>(image.width);
    cinfo.image_height = static_cast<JDIMENSION>(image.height);
    cinfo.input_components = static_cast<int>(image.channels);
    cinfo.in_color_space = image.channels == 1 ? JCS_GRAYSCALE : JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);

    std::vector<unsigned char> row(image.width * image.channels);
    while (cinfo.next_scanline < cinfo.image_height) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            row[i] = static_cast<unsigned char>(
                std::lround(image.data[cinfo.next_scanline * row.size() + i] * 255.0));
        }
        unsigned char* rp = row.data();
        jpeg_write_scanlines(&cinfo, &rp, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
    std::fclose(fp);
}

}  // namespace

TEST_CASE("tile grid enumerates offsets row-major") {
    const auto grid = make_tile_grid(4, 4, 1, 2, 1);
    REQUIRE(grid.tiles.size() == 9);
    const std::vector<std::pair<std::size_t, std::size_t>> expected = {
        {0, 0}, {0, 1}, {0, 2}, {1, 0}, {1, 1}, {1, 2}, {2, 0}, {2, 1}, {2, 2}};
    CHECK(grid.tiles == expected);
}

TEST_CASE("tile grid rejects bad geometry") {
    CHECK_THROWS_AS(make_tile_grid(4, 4, 1, 5, 1), std::invalid_argument);
    CHECK_THROWS_AS(make_tile_grid(4, 4, 1, 0, 1), std::invalid_argument);
    CHECK_THROWS_AS(make_tile_grid(4, 4, 1, 2, 3), std::invalid_argument);
    CHECK_THROWS_AS(make_tile_grid(4, 4, 1, 2, 0), std::invalid_argument);
}

TEST_CASE("non-overlapping tile count is floor(H/window) * floor(W/window)") {
    CHECK(make_tile_grid(256, 256, 3, 64, 64).tiles.size() == 16);
    CHECK(make_tile_grid(65, 130, 3, 64, 64).tiles.size() == 2);
    CHECK(make_tile_grid(63, 64, 1, 32, 32).tiles.size() == 2);
}

TEST_CASE("tile_image on the experiment geometry") {
    const auto image = random_image(256, 256, 3, 1);
    const auto [grid, fragments] = tile_image(image, 64, 64);
    REQUIRE(fragments.size() == 16);
    for (const auto& f : fragments) CHECK(f.size() == 12288);
}

TEST_CASE("whole-image tile is an identity flatten") {
    const auto image = random_image(6, 6, 3, 2);
    const auto [grid, fragments] = tile_image(image, 6, 6);
    REQUIRE(fragments.size() == 1);
    CHECK(fragments[0] == image.data);
}

TEST_CASE("tile contents match direct pixel indexing") {
    const auto image = random_image(5, 7, 3, 3);
    const auto [grid, fragments] = tile_image(image, 2, 2);
    REQUIRE(grid.tiles.size() == 2 * 3);
    for (std::size_t t = 0; t < grid.tiles.size(); ++t) {
        const auto [ro, co] = grid.tiles[t];
        std::size_t i = 0;
        for (std::size_t r = 0; r < 2; ++r) {
            for (std::size_t c = 0; c < 2; ++c) {
                for (std::size_t ch = 0; ch < 3; ++ch) {
                    CHECK(fragments[t][i++] == image.at(ro + r, co + c, ch));
                }
            }
        }
    }
}

TEST_CASE("in-place bank rows equal independent crops") {
    std::vector<ImageTensor> sources = {random_image(8, 8, 3, 11), random_image(8, 8, 3, 12),
                                        random_image(8, 8, 3, 13)};
    const auto bank = build_inplace_bank(sources, 2, 4, 3);
    REQUIRE(bank.rows() == 3);
    REQUIRE(bank.dim() == 27);
    for (std::size_t i = 0; i < sources.size(); ++i) {
        std::size_t j = 0;
        for (std::size_t r = 0; r < 3; ++r) {
            for (std::size_t c = 0; c < 3; ++c) {
                for (std::size_t ch = 0; ch < 3; ++ch) {
                    CHECK(bank.row(i)[j++] ==
                          static_cast<float>(sources[i].at(2 + r, 4 + c, ch)));
                }
            }
        }
    }
}

TEST_CASE("in-place bank names the offending undersized source") {
    std::vector<ImageTensor> sources = {random_image(8, 8, 1, 14), random_image(4, 8, 1, 15)};
    CHECK_THROWS_WITH_AS(build_inplace_bank(sources, 2, 2, 4),
                         doctest::Contains("source image 1"), std::invalid_argument);
}

TEST_CASE("self-sourced bank contains the target fragment exactly") {
    const auto target = random_image(8, 8, 1, 16);
    const auto [grid, fragments] = tile_image(target, 4, 4);
    for (std::size_t t = 0; t < grid.tiles.size(); ++t) {
        const auto bank = build_inplace_bank({target}, grid.tiles[t].first,
                                             grid.tiles[t].second, 4);
        for (std::size_t d = 0; d < bank.dim(); ++d) {
            CHECK(static_cast<double>(bank.row(0)[d]) ==
                  doctest::Approx(fragments[t][d]).epsilon(1e-7));
        }
    }
}

TEST_CASE("box downscale of a constant image is constant") {
    const auto out = downscale_box(constant_image(8, 3, 0.37), 2);
    CHECK(out.height == 2);
    for (double v : out.data) CHECK(v == doctest::Approx(0.37).epsilon(1e-12));
}

TEST_CASE("box downscale averages symmetric blocks to one half") {
    ImageTensor image;
    image.height = 2;
    image.width = 2;
    image.channels = 1;
    image.data = {0.0, 1.0, 1.0, 0.0};
    const auto out = downscale_box(image, 1);
    REQUIRE(out.data.size() == 1);
    CHECK(out.data[0] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("box downscale preserves the global mean") {
    const auto image = random_image(32, 32, 3, 21);
    const auto out = downscale_box(image, 8);
    CHECK(image_mean(out) == doctest::Approx(image_mean(image)).epsilon(1e-12));

    const auto experiment = downscale_box(random_image(256, 256, 3, 22), 16);
    CHECK(experiment.height == 16);
    CHECK(experiment.width == 16);
}

TEST_CASE("box downscale enforces divisibility and squareness") {
    CHECK_THROWS_AS(downscale_box(random_image(6, 6, 1, 23), 4), std::invalid_argument);
    CHECK_THROWS_AS(downscale_box(random_image(6, 8, 1, 24), 2), std::invalid_argument);
}

TEST_CASE("center crop takes the middle square") {
    const auto image = random_image(4, 8, 1, 25);
    const auto out = center_crop_square(image);
    REQUIRE(out.height == 4);
    REQUIRE(out.width == 4);
    for (std::size_t r = 0; r < 4; ++r) {
        for (std::size_t c = 0; c < 4; ++c) {
            CHECK(out.at(r, c, 0) == image.at(r, c + 2, 0));
        }
    }
}

TEST_CASE("bilinear resize is exact on constants and enlarges") {
    const auto out = resize_bilinear(constant_image(3, 3, 0.6), 7, 5);
    CHECK(out.height == 7);
    CHECK(out.width == 5);
    for (double v : out.data) CHECK(v == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("photographic bank equals per-image downscale") {
    std::vector<ImageTensor> sources;
    for (int i = 0; i < 10; ++i) sources.push_back(random_image(32, 32, 3, 30 + i));
    const auto bank = build_photographic_bank(sources, 16);
    REQUIRE(bank.rows() == 10);
    REQUIRE(bank.dim() == 768);
    for (std::size_t i = 0; i < sources.size(); ++i) {
        const auto cell = downscale_box(sources[i], 16);
        for (std::size_t d = 0; d < bank.dim(); ++d) {
            CHECK(bank.row(i)[d] == static_cast<float>(cell.data[d]));
        }
    }
}

TEST_CASE("singleton photographic bank renders as tiled repetition") {
    std::vector<ImageTensor> sources = {random_image(8, 8, 1, 40)};
    const auto bank = build_photographic_bank(sources, 4);
    const auto grid = make_tile_grid(8, 8, 1, 4, 4);
    const std::vector<Selection> selections(4, Selection{{0}});
    const auto mosaic = render_mosaic(grid, selections, bank);

    const auto cell = downscale_box(sources[0], 4);
    for (const auto& [ro, co] : grid.tiles) {
        for (std::size_t r = 0; r < 4; ++r) {
            for (std::size_t c = 0; c < 4; ++c) {
                CHECK(mosaic.at(ro + r, co + c, 0) ==
                      doctest::Approx(cell.at(r, c, 0)).epsilon(1e-7));
            }
        }
    }
}

TEST_CASE("non-overlapping render places per-tile averages exactly") {
    const auto bank = test::random_bank(5, 4 * 1, 41);  // window 2, gray
    const auto grid = make_tile_grid(4, 4, 1, 2, 2);
    std::vector<Selection> selections = {Selection{{0, 1}}, Selection{{2, 2}},
                                         Selection{{3, 4}}, Selection{{1, 3}}};
    const auto mosaic = render_mosaic(grid, selections, bank);

    for (std::size_t t = 0; t < grid.tiles.size(); ++t) {
        const auto tile = average_clips(selections[t], bank);
        const auto [ro, co] = grid.tiles[t];
        std::size_t i = 0;
        for (std::size_t r = 0; r < 2; ++r) {
            for (std::size_t c = 0; c < 2; ++c) {
                CHECK(mosaic.at(ro + r, co + c, 0) ==
                      doctest::Approx(std::clamp(tile[i++], 0.0, 1.0)).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("overlapping render matches a hand accumulation oracle") {
    const auto target = random_image(4, 4, 1, 42);
    const auto [grid, fragments] = tile_image(target, 2, 1);
    REQUIRE(grid.tiles.size() == 9);

    // bank row t = fragment t, selections pick their own tile
    std::vector<float> data;
    for (const auto& f : fragments)
        for (double v : f) data.push_back(static_cast<float>(v));
    FragmentBank bank(fragments.size(), 4, std::move(data), {2, 2, 1}, Modality::kImage);
    std::vector<Selection> selections;
    for (std::uint32_t t = 0; t < 9; ++t) selections.push_back(Selection{{t}});

    const auto mosaic = render_mosaic(grid, selections, bank);

    // independent accumulation over the same grid
    std::vector<double> accum(16, 0.0);
    std::vector<int> count(16, 0);
    for (std::size_t t = 0; t < 9; ++t) {
        const auto [ro, co] = grid.tiles[t];
        for (std::size_t r = 0; r < 2; ++r) {
            for (std::size_t c = 0; c < 2; ++c) {
                accum[(ro + r) * 4 + (co + c)] +=
                    static_cast<double>(bank.row(t)[r * 2 + c]);
                count[(ro + r) * 4 + (co + c)]++;
            }
        }
    }
    for (std::size_t p = 0; p < 16; ++p) {
        CHECK(mosaic.data[p] == doctest::Approx(accum[p] / count[p]).epsilon(1e-12));
    }
    // center pixels blend 4 contributions
    CHECK(count[1 * 4 + 1] == 4);
    CHECK(count[1 * 4 + 2] == 4);
}

TEST_CASE("identity selections reproduce the target") {
    const auto target = random_image(8, 8, 3, 43);

    // non-overlapping: exact within float32 storage
    {
        const auto [grid, fragments] = tile_image(target, 4, 4);
        std::vector<float> data;
        for (const auto& f : fragments)
            for (double v : f) data.push_back(static_cast<float>(v));
        FragmentBank bank(fragments.size(), 48, std::move(data), {4, 4, 3}, Modality::kImage);
        std::vector<Selection> selections;
        for (std::uint32_t t = 0; t < fragments.size(); ++t)
            selections.push_back(Selection{{t}});
        const auto mosaic = render_mosaic(grid, selections, bank);
        for (std::size_t i = 0; i < target.data.size(); ++i) {
            CHECK(mosaic.data[i] == static_cast<double>(static_cast<float>(target.data[i])));
        }
    }

    // overlapping: averaging identical contributions, within 1e-6
    {
        const auto [grid, fragments] = tile_image(target, 4, 2);
        std::vector<float> data;
        for (const auto& f : fragments)
            for (double v : f) data.push_back(static_cast<float>(v));
        FragmentBank bank(fragments.size(), 48, std::move(data), {4, 4, 3}, Modality::kImage);
        std::vector<Selection> selections;
        for (std::uint32_t t = 0; t < fragments.size(); ++t)
            selections.push_back(Selection{{t}});
        const auto mosaic = render_mosaic(grid, selections, bank);
        for (std::size_t i = 0; i < target.data.size(); ++i) {
            CHECK(mosaic.data[i] == doctest::Approx(target.data[i]).epsilon(1e-6));
        }
    }
}

TEST_CASE("render output is clamped to [0,1]") {
    FragmentBank bank(2, 4, {2.0f, 2.0f, 2.0f, 2.0f, -1.0f, -1.0f, -1.0f, -1.0f}, {2, 2, 1},
                      Modality::kRaw);
    const auto grid = make_tile_grid(2, 4, 1, 2, 2);
    const auto mosaic = render_mosaic(grid, {Selection{{0}}, Selection{{1}}}, bank);
    for (std::size_t c = 0; c < 2; ++c) {
        CHECK(mosaic.at(0, c, 0) == 1.0);
        CHECK(mosaic.at(0, 2 + c, 0) == 0.0);
    }
}

TEST_CASE("render rejects mismatched selections and banks") {
    const auto bank = test::random_bank(3, 4, 44);
    const auto grid = make_tile_grid(4, 4, 1, 2, 2);
    CHECK_THROWS_AS(render_mosaic(grid, {Selection{{0}}}, bank), std::invalid_argument);
    const auto wrong_dim = test::random_bank(3, 5, 45);
    const std::vector<Selection> sels(4, Selection{{0}});
    CHECK_THROWS_AS(render_mosaic(grid, sels, wrong_dim), std::invalid_argument);
}

TEST_CASE("png round-trip preserves quantized values") {
    for (std::size_t channels : {std::size_t{1}, std::size_t{3}}) {
        const auto image = random_image(9, 7, channels, 50 + channels);
        const auto path = temp_file("mosaic_roundtrip_" + std::to_string(channels) + ".png");
        write_png(path.string(), image);
        const auto loaded = load_image(path.string());
        REQUIRE(loaded.height == 9);
        REQUIRE(loaded.width == 7);
        REQUIRE(loaded.channels == channels);
        for (std::size_t i = 0; i < image.data.size(); ++i) {
            CHECK(loaded.data[i] == std::round(image.data[i] * 255.0) / 255.0);
        }
        std::filesystem::remove(path);
    }
}

TEST_CASE("black and white images map to zeros and ones") {
    const auto black_path = temp_file("mosaic_black.png");
    write_png(black_path.string(), constant_image(4, 3, 0.0));
    for (double v : load_image(black_path.string()).data) CHECK(v == 0.0);
    std::filesystem::remove(black_path);

    const auto white_path = temp_file("mosaic_white.png");
    write_png(white_path.string(), constant_image(4, 1, 1.0));
    for (double v : load_image(white_path.string()).data) CHECK(v == 1.0);
    std::filesystem::remove(white_path);
}

TEST_CASE("jpeg decoding approximates the encoded image") {
    const auto image = constant_image(16, 3, 118.0 / 255.0);
    const auto path = temp_file("mosaic_const.jpg");
    write_reference_jpeg(path, image, 95);
    const auto loaded = load_image(path.string());
    REQUIRE(loaded.channels == 3);
    REQUIRE(loaded.height == 16);
    for (std::size_t i = 0; i < loaded.data.size(); ++i) {
        CHECK(loaded.data[i] == doctest::Approx(image.data[i]).epsilon(0.03));
    }
    std::filesystem::remove(path);

    const auto gray = random_image(12, 12, 1, 60);
    const auto gray_path = temp_file("mosaic_gray.jpg");
    write_reference_jpeg(gray_path, gray, 100);
    const auto gray_loaded = load_image(gray_path.string());
    CHECK(gray_loaded.channels == 1);
    double max_err = 0.0;
    for (std::size_t i = 0; i < gray.data.size(); ++i) {
        max_err = std::max(max_err, std::abs(gray_loaded.data[i] - gray.data[i]));
    }
    CHECK(max_err < 0.05);
    std::filesystem::remove(gray_path);
}

TEST_CASE("loading failures carry the path") {
    CHECK_THROWS_WITH_AS(load_image("/nonexistent/file.png"),
                         doctest::Contains("/nonexistent/file.png"), std::runtime_error);

    const auto path = temp_file("mosaic_garbage.bin");
    {
        std::FILE* fp = std::fopen(path.string().c_str(), "wb");
        REQUIRE(fp != nullptr);
        std::fputs("not an image at all", fp);
        std::fclose(fp);
    }
    CHECK_THROWS_WITH_AS(load_image(path.string()), doctest::Contains("not a PNG or JPEG"),
                         std::runtime_error);
    std::filesystem::remove(path);
}

TEST_CASE("load_and_normalize resizes to a square side") {
    const auto image = random_image(32, 32, 3, 70);
    const auto path = temp_file("mosaic_resize.png");
    write_png(path.string(), image);

    const auto resized = load_and_normalize(path.string(), 8);
    CHECK(resized.height == 8);
    CHECK(resized.width == 8);
    CHECK(resized.channels == 3);

    // box filter path: equals downscaling the quantized original
    const auto quantized = load_image(path.string());
    const auto expected = downscale_box(quantized, 8);
    for (std::size_t i = 0; i < resized.data.size(); ++i) {
        CHECK(resized.data[i] == doctest::Approx(expected.data[i]).epsilon(1e-12));
    }

    const auto enlarged = load_and_normalize(path.string(), 48);
    CHECK(enlarged.height == 48);
    std::filesystem::remove(path);
}
