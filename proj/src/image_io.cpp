#include "ldt/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <vector>

namespace ldt {

namespace {

std::string lower_ext(const std::string& path) {
    std::string ext = std::filesystem::path(path).extension().string();
    for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return ext;
}

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg) {
    (void)png;
    raise(ErrorKind::Format, "png: corrupt stream: ", msg);
}
void png_warn_fn(png_structp, png_const_charp) {}

Tensor load_png(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    require(f != nullptr, ErrorKind::Data, "load_image: cannot open '", path, "'");

    unsigned char sig[8];
    require(std::fread(sig, 1, 8, f.get()) == 8 && !png_sig_cmp(sig, 0, 8),
            ErrorKind::Format, "load_image: '", path, "' is not a PNG stream");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                             png_error_fn, png_warn_fn);
    require(png != nullptr, ErrorKind::Data, "png: allocation failure");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        raise(ErrorKind::Data, "png: allocation failure");
    }

    Tensor out;
    try {
        png_init_io(png, f.get());
        png_set_sig_bytes(png, 8);
        png_read_info(png, info);

        const png_uint_32 width = png_get_image_width(png, info);
        const png_uint_32 height = png_get_image_height(png, info);
        const int bit_depth = png_get_bit_depth(png, info);
        const int color_type = png_get_color_type(png, info);

        require(color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_RGB,
                ErrorKind::Domain, "load_image: '", path,
                "' has an unsupported channel layout (only grayscale and RGB)");
        require(bit_depth == 8 || bit_depth == 16, ErrorKind::Domain, "load_image: '",
                path, "' has unsupported bit depth ", bit_depth);

        if (bit_depth == 16) png_set_swap(png);  // wire format is big-endian
        png_read_update_info(png, info);

        const int64_t channels = color_type == PNG_COLOR_TYPE_RGB ? 3 : 1;
        const float denom = bit_depth == 16 ? 65535.0f : 255.0f;
        out = Tensor(Shape{1, static_cast<int64_t>(height),
                           static_cast<int64_t>(width), channels});

        const size_t row_bytes = png_get_rowbytes(png, info);
        std::vector<unsigned char> row(row_bytes);
        for (png_uint_32 y = 0; y < height; ++y) {
            png_read_row(png, row.data(), nullptr);
            float* dst = out.pixel(0, static_cast<int64_t>(y), 0);
            const int64_t samples = static_cast<int64_t>(width) * channels;
            if (bit_depth == 16) {
                const auto* src = reinterpret_cast<const uint16_t*>(row.data());
                for (int64_t i = 0; i < samples; ++i) dst[i] = src[i] / denom;
            } else {
                for (int64_t i = 0; i < samples; ++i) dst[i] = row[i] / denom;
            }
        }
        png_read_end(png, nullptr);
    } catch (...) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw;
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

void save_png(const Tensor& image, const std::string& path, int bit_depth) {
    const Shape& s = image.shape();
    FilePtr f(std::fopen(path.c_str(), "wb"));
    require(f != nullptr, ErrorKind::Data, "save_image: cannot open '", path, "'");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                              png_error_fn, png_warn_fn);
    require(png != nullptr, ErrorKind::Data, "png: allocation failure");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        raise(ErrorKind::Data, "png: allocation failure");
    }

    try {
        png_init_io(png, f.get());
        // Fixed encoder settings keep output byte-identical run to run.
        png_set_compression_level(png, 6);
        png_set_filter(png, 0, PNG_FILTER_NONE);
        png_set_IHDR(png, info, static_cast<png_uint_32>(s.w),
                     static_cast<png_uint_32>(s.h), bit_depth,
                     s.c == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                     PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                     PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        if (bit_depth == 16) png_set_swap(png);

        const float scale = bit_depth == 16 ? 65535.0f : 255.0f;
        const int64_t samples = s.w * s.c;
        std::vector<unsigned char> row8;
        std::vector<uint16_t> row16;
        for (int64_t y = 0; y < s.h; ++y) {
            const float* src = image.pixel(0, y, 0);
            if (bit_depth == 16) {
                row16.resize(static_cast<size_t>(samples));
                for (int64_t i = 0; i < samples; ++i)
                    row16[static_cast<size_t>(i)] =
                        static_cast<uint16_t>(std::floor(src[i] * scale + 0.5f));
                png_write_row(png, reinterpret_cast<png_bytep>(row16.data()));
            } else {
                row8.resize(static_cast<size_t>(samples));
                for (int64_t i = 0; i < samples; ++i)
                    row8[static_cast<size_t>(i)] =
                        static_cast<unsigned char>(std::floor(src[i] * scale + 0.5f));
                png_write_row(png, row8.data());
            }
        }
        png_write_end(png, info);
    } catch (...) {
        png_destroy_write_struct(&png, &info);
        throw;
    }
    png_destroy_write_struct(&png, &info);
}

Tensor load_pnm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    require(f.good(), ErrorKind::Data, "load_image: cannot open '", path, "'");

    auto next_token = [&]() -> std::string {
        std::string tok;
        int ch;
        while ((ch = f.get()) != EOF) {
            if (ch == '#') {
                while ((ch = f.get()) != EOF && ch != '\n') {
                }
                continue;
            }
            if (std::isspace(ch)) {
                if (!tok.empty()) break;
                continue;
            }
            tok.push_back(static_cast<char>(ch));
        }
        require(!tok.empty(), ErrorKind::Format, "load_image: '", path,
                "' has a truncated PNM header");
        return tok;
    };

    const std::string magic = next_token();
    require(magic == "P5" || magic == "P6", ErrorKind::Format, "load_image: '", path,
            "' is not a binary PGM/PPM file (magic '", magic, "')");
    const int64_t channels = magic == "P6" ? 3 : 1;
    const int64_t width = std::stoll(next_token());
    const int64_t height = std::stoll(next_token());
    const int64_t maxval = std::stoll(next_token());
    require(width >= 1 && height >= 1, ErrorKind::Format, "load_image: '", path,
            "' has degenerate extents");
    require(maxval == 255, ErrorKind::Domain, "load_image: '", path,
            "' maxval ", maxval, " unsupported (only 8-bit PNM)");

    const int64_t n = width * height * channels;
    std::vector<unsigned char> raw(static_cast<size_t>(n));
    f.read(reinterpret_cast<char*>(raw.data()), n);
    require(f.gcount() == n, ErrorKind::Format, "load_image: '", path,
            "' pixel data truncated");

    Tensor out(Shape{1, height, width, channels});
    float* dst = out.data();
    for (int64_t i = 0; i < n; ++i) dst[i] = raw[static_cast<size_t>(i)] / 255.0f;
    return out;
}

void save_pnm(const Tensor& image, const std::string& path) {
    const Shape& s = image.shape();
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    require(f.good(), ErrorKind::Data, "save_image: cannot open '", path, "'");
    f << (s.c == 3 ? "P6" : "P5") << "\n" << s.w << " " << s.h << "\n255\n";
    std::vector<unsigned char> raw(static_cast<size_t>(s.h * s.w * s.c));
    const float* src = image.data();
    for (size_t i = 0; i < raw.size(); ++i)
        raw[i] = static_cast<unsigned char>(std::floor(src[i] * 255.0f + 0.5f));
    f.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
    require(f.good(), ErrorKind::Data, "save_image: write to '", path, "' failed");
}

}  // namespace

Tensor load_image(const std::string& path) {
    const std::string ext = lower_ext(path);
    if (ext == ".png") return load_png(path);
    if (ext == ".pgm" || ext == ".ppm") return load_pnm(path);
    raise(ErrorKind::Domain, "load_image: unsupported format '", ext, "' for '",
          path, "'");
}

void save_image(const Tensor& image, const std::string& path, int bit_depth) {
    const Shape& s = image.shape();
    require(s.b == 1, ErrorKind::Shape, "save_image: batch extent must be 1, got ",
            s.str());
    require(s.c == 1 || s.c == 3, ErrorKind::Shape,
            "save_image: only 1- or 3-channel images, got ", s.str());
    require(s.h >= 1 && s.w >= 1, ErrorKind::Shape, "save_image: empty image ",
            s.str());
    require(bit_depth == 8 || bit_depth == 16, ErrorKind::Domain,
            "save_image: bit depth must be 8 or 16, got ", bit_depth);
    require(all_in_range(image, 0.0f, 1.0f), ErrorKind::Domain,
            "save_image: values must lie in [0,1]; clamp before saving");

    const std::string ext = lower_ext(path);
    if (ext == ".png") {
        save_png(image, path, bit_depth);
        return;
    }
    if (ext == ".pgm" || ext == ".ppm") {
        require((ext == ".pgm") == (s.c == 1), ErrorKind::Domain, "save_image: ", ext,
                " requires ", ext == ".pgm" ? 1 : 3, " channels, image has ", s.c);
        require(bit_depth == 8, ErrorKind::Domain, "save_image: PNM output is 8-bit only");
        save_pnm(image, path);
        return;
    }
    raise(ErrorKind::Domain, "save_image: unsupported format '", ext, "' for '",
          path, "'");
}

}  // namespace ldt
