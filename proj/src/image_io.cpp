#include "pod/image_io.hpp"

#include "pod/errors.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <vector>

namespace pod {

namespace {

using FilePtr = std::unique_ptr<std::FILE, decltype(&std::fclose)>;

FilePtr open_file(const std::filesystem::path& path, const char* mode)
{
    FilePtr f(std::fopen(path.c_str(), mode), &std::fclose);
    if (!f)
        throw LoadError("cannot open " + path.string());
    return f;
}

std::uint8_t to_byte(double v)
{
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

Image read_png(const std::filesystem::path& path)
{
    FilePtr f = open_file(path, "rb");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png)
        throw LoadError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw LoadError("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw LoadError("corrupt PNG " + path.string());
    }
    png_init_io(png, f.get());
    png_read_info(png, info);

    const auto color = png_get_color_type(png, info);
    const auto depth = png_get_bit_depth(png, info);
    if (depth == 16)
        png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE)
        png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8)
        png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA)
        png_set_strip_alpha(png);
    if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE)
        png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    png_read_update_info(png, info);

    const int width = static_cast<int>(png_get_image_width(png, info));
    const int height = static_cast<int>(png_get_image_height(png, info));
    const auto rowbytes = png_get_rowbytes(png, info);
    std::vector<png_byte> buffer(rowbytes * height);
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y)
        rows[y] = buffer.data() + y * rowbytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Image img(height, width);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            img.at(y, x) = rows[y][x] / 255.0;
    return img;
}

Image read_pgm(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw LoadError("cannot open " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "P5" && magic != "P2")
        throw LoadError("not a PGM file: " + path.string());

    auto next_int = [&]() {
        for (;;) {
            in >> std::ws;
            if (in.peek() == '#') {
                std::string comment;
                std::getline(in, comment);
                continue;
            }
            int v = 0;
            if (!(in >> v))
                throw LoadError("truncated PGM header: " + path.string());
            return v;
        }
    };
    const int width = next_int();
    const int height = next_int();
    const int maxval = next_int();
    if (width < 1 || height < 1 || maxval < 1 || maxval > 255)
        throw LoadError("unsupported PGM geometry in " + path.string());

    Image img(height, width);
    if (magic == "P5") {
        in.get();
        std::vector<unsigned char> data(static_cast<std::size_t>(width) * height);
        in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
        if (in.gcount() != static_cast<std::streamsize>(data.size()))
            throw LoadError("truncated PGM data: " + path.string());
        for (std::size_t i = 0; i < data.size(); ++i)
            img.pixels()[i] = static_cast<double>(data[i]) / maxval;
    } else {
        for (auto& p : img.pixels())
            p = static_cast<double>(next_int()) / maxval;
    }
    return img;
}

} // namespace

Image read_image(const std::filesystem::path& path)
{
    std::ifstream probe(path, std::ios::binary);
    if (!probe)
        throw LoadError("cannot open " + path.string());
    char sig[8] = {};
    probe.read(sig, 8);
    if (probe.gcount() >= 8 && png_sig_cmp(reinterpret_cast<png_const_bytep>(sig), 0, 8) == 0)
        return read_png(path);
    if (sig[0] == 'P' && (sig[1] == '5' || sig[1] == '2'))
        return read_pgm(path);
    throw LoadError("unrecognized image format: " + path.string());
}

void write_png(const std::filesystem::path& path, const Image& image)
{
    FilePtr f = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw LoadError("libpng init failed");
    }
    std::vector<png_byte> buffer(static_cast<std::size_t>(image.width()) * image.height());
    for (std::size_t i = 0; i < buffer.size(); ++i)
        buffer[i] = to_byte(image.pixels()[i]);
    std::vector<png_bytep> rows(image.height());
    for (int y = 0; y < image.height(); ++y)
        rows[y] = buffer.data() + static_cast<std::size_t>(y) * image.width();

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw LoadError("failed writing PNG " + path.string());
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, image.width(), image.height(), 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

void write_pgm(const std::filesystem::path& path, const Image& image)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw LoadError("cannot open " + path.string());
    out << "P5\n" << image.width() << ' ' << image.height() << "\n255\n";
    for (double v : image.pixels())
        out.put(static_cast<char>(to_byte(v)));
}

Image quantize_8bit(const Image& image)
{
    Image out = image;
    for (auto& v : out.pixels())
        v = to_byte(v) / 255.0;
    return out;
}

} // namespace pod
