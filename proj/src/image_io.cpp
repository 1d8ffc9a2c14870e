#include "mosaic/image_io.hpp"

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>
#include <stdexcept>

namespace mosaic {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

ImageTensor from_bytes(std::size_t height, std::size_t width, std::size_t channels,
                       const std::vector<unsigned char>& bytes) {
    ImageTensor image;
    image.height = height;
    image.width = width;
    image.channels = channels;
    image.data.resize(bytes.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) image.data[i] = bytes[i] / 255.0;
    return image;
}

ImageTensor load_png(std::FILE* fp, const std::string& path) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("failed to initialize the PNG decoder");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("failed to initialize the PNG decoder");
    }

    std::vector<unsigned char> bytes;
    std::vector<png_bytep> row_ptrs;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("failed to decode PNG file: " + path);
    }

    png_init_io(png, fp);
    png_read_info(png, info);

    // Outside libpng callbacks here, so unsupported formats can throw
    // normally after releasing the decoder.
    const png_byte color_type = png_get_color_type(png, info);
    if ((color_type & PNG_COLOR_MASK_ALPHA) != 0 ||
        png_get_valid(png, info, PNG_INFO_tRNS) != 0) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("unsupported image format (alpha channel) in " + path);
    }
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) {
        png_set_expand_gray_1_2_4_to_8(png);
    }
    if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
    png_read_update_info(png, info);

    const std::size_t height = png_get_image_height(png, info);
    const std::size_t width = png_get_image_width(png, info);
    const std::size_t channels = png_get_channels(png, info);
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("unsupported image format (" + std::to_string(channels) +
                                 " channels) in " + path);
    }

    bytes.resize(height * width * channels);
    row_ptrs.resize(height);
    for (std::size_t r = 0; r < height; ++r) row_ptrs[r] = bytes.data() + r * width * channels;
    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    return from_bytes(height, width, channels, bytes);
}

struct JpegErrorMgr {
    jpeg_error_mgr pub;
    std::jmp_buf setjmp_buffer;
};

void jpeg_error_exit(j_common_ptr cinfo) {
    longjmp(reinterpret_cast<JpegErrorMgr*>(cinfo->err)->setjmp_buffer, 1);
}

ImageTensor load_jpeg(std::FILE* fp, const std::string& path) {
    jpeg_decompress_struct cinfo;
    JpegErrorMgr jerr;
    cinfo.err = jpeg_std_error(&jerr.pub);
    jerr.pub.error_exit = jpeg_error_exit;
    if (setjmp(jerr.setjmp_buffer)) {
        jpeg_destroy_decompress(&cinfo);
        throw std::runtime_error("failed to decode JPEG file: " + path);
    }

    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, fp);
    jpeg_read_header(&cinfo, TRUE);

    if (cinfo.num_components != 1 && cinfo.num_components != 3) {
        jpeg_destroy_decompress(&cinfo);
        throw std::runtime_error("unsupported image format (" +
                                 std::to_string(cinfo.num_components) + " components) in " +
                                 path);
    }
    cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
    jpeg_start_decompress(&cinfo);

    const std::size_t height = cinfo.output_height;
    const std::size_t width = cinfo.output_width;
    const std::size_t channels = cinfo.output_components;
    std::vector<unsigned char> bytes(height * width * channels);
    while (cinfo.output_scanline < cinfo.output_height) {
        unsigned char* row = bytes.data() + cinfo.output_scanline * width * channels;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);

    return from_bytes(height, width, channels, bytes);
}

}  // namespace

ImageTensor load_image(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("cannot open image file: " + path);

    unsigned char magic[8] = {};
    const std::size_t got = std::fread(magic, 1, sizeof(magic), fp.get());
    std::rewind(fp.get());

    if (got >= 8 && png_sig_cmp(magic, 0, 8) == 0) return load_png(fp.get(), path);
    if (got >= 2 && magic[0] == 0xFF && magic[1] == 0xD8) return load_jpeg(fp.get(), path);
    throw std::runtime_error("not a PNG or JPEG file: " + path);
}

ImageTensor load_and_normalize(const std::string& path, std::size_t resize_side) {
    ImageTensor image = load_image(path);
    if (resize_side > 0) image = resize_to_square(image, resize_side);
    return image;
}

void write_png(const std::string& path, const ImageTensor& image) {
    image.validate();

    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("cannot open output file: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("failed to initialize the PNG encoder");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("failed to initialize the PNG encoder");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("failed to encode PNG file: " + path);
    }

    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
                 static_cast<png_uint_32>(image.height), 8,
                 image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<unsigned char> row(image.width * image.channels);
    for (std::size_t r = 0; r < image.height; ++r) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            const double v = std::round(image.data[r * row.size() + i] * 255.0);
            row[i] = static_cast<unsigned char>(std::clamp(v, 0.0, 255.0));
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, info);
    png_destroy_write_struct(&png, &info);
}

}  // namespace mosaic
