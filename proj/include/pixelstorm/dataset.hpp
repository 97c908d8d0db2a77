#pragma once

// Dataset ingestion: CIFAR-10 binary batches, 8-bit PNG files and
// "<path>,<true_class>" manifests of PNG corpora.

#include <png.h>

#include <array>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>
#include <vector>

#include "pixelstorm/error.hpp"
#include "pixelstorm/image.hpp"

namespace pixelstorm {

namespace cifar10 {

inline constexpr std::size_t kSide = 32;
inline constexpr std::size_t kPlane = kSide * kSide;
inline constexpr std::size_t kRecordBytes = 1 + 3 * kPlane;
inline constexpr std::size_t kNumClasses = 10;

inline const std::array<std::string, kNumClasses> kLabels = {
    "airplane", "automobile", "bird", "cat", "deer",
    "dog", "frog", "horse", "ship", "truck"};

/// Decodes planar CIFAR-10 records into channel-last images.
/// Ids are "<prefix>-<record index>" with a zero-padded index.
inline std::vector<LabeledImage> decode_batch(std::span<const std::uint8_t> bytes,
                                              const std::string& id_prefix = "cifar") {
    if (bytes.size() % kRecordBytes != 0)
        throw FormatError("CIFAR-10 batch of " + std::to_string(bytes.size()) +
                          " bytes is not a multiple of 3073 (truncated file?)");
    const std::size_t n = bytes.size() / kRecordBytes;
    std::vector<LabeledImage> out;
    out.reserve(n);
    for (std::size_t r = 0; r < n; ++r) {
        const std::uint8_t* rec = bytes.data() + r * kRecordBytes;
        if (rec[0] >= kNumClasses)
            throw FormatError("CIFAR-10 record " + std::to_string(r) + " has label byte " +
                              std::to_string(rec[0]));
        std::vector<std::uint8_t> data(3 * kPlane);
        for (std::size_t i = 0; i < kPlane; ++i)
            for (std::size_t c = 0; c < 3; ++c)
                data[i * 3 + c] = rec[1 + c * kPlane + i];
        char idx[24];
        std::snprintf(idx, sizeof idx, "%05zu", r);
        out.push_back({ImageTensor(kSide, kSide, 3, std::move(data)), rec[0],
                       id_prefix + "-" + idx});
    }
    return out;
}

/// Inverse of decode_batch.
inline std::vector<std::uint8_t> encode_batch(std::span<const LabeledImage> images) {
    std::vector<std::uint8_t> out;
    out.reserve(images.size() * kRecordBytes);
    for (const auto& li : images) {
        const auto& img = li.image;
        if (img.width() != kSide || img.height() != kSide || img.channels() != 3)
            throw UsageError("CIFAR-10 records must be 32x32x3");
        if (li.true_class >= kNumClasses)
            throw UsageError("CIFAR-10 label out of range");
        out.push_back(static_cast<std::uint8_t>(li.true_class));
        auto d = img.data();
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t i = 0; i < kPlane; ++i)
                out.push_back(d[i * 3 + c]);
    }
    return out;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw FormatError("cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

inline std::vector<LabeledImage> load_batch(const std::filesystem::path& path) {
    auto bytes = read_file_bytes(path);
    return decode_batch(bytes, path.stem().string());
}

inline void save_batch(const std::filesystem::path& path, std::span<const LabeledImage> images) {
    auto bytes = encode_batch(images);
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw FormatError("cannot write " + path.string());
}

} // namespace cifar10

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const noexcept { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] inline void png_error_fn(png_structp png, png_const_charp msg) {
    auto* slot = static_cast<std::string*>(png_get_error_ptr(png));
    if (slot)
        *slot = msg;
    png_longjmp(png, 1);
}

inline void png_warning_fn(png_structp, png_const_charp) {}

} // namespace detail

/// Loads an 8-bit grayscale or RGB PNG. Palette, alpha and 16-bit images
/// are rejected rather than converted, so the pixel data stays exactly
/// what was stored.
inline ImageTensor load_png(const std::filesystem::path& path) {
    detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp)
        throw FormatError("cannot open " + path.string());
    std::string err;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err,
                                             detail::png_error_fn, detail::png_warning_fn);
    if (!png)
        throw FormatError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    std::size_t width = 0, height = 0, channels = 0;
    std::vector<std::uint8_t> data;
    std::string unsupported;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError(path.string() + ": " + err);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    width = png_get_image_width(png, info);
    height = png_get_image_height(png, info);
    const int depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);
    if (depth != 8)
        unsupported = "bit depth " + std::to_string(depth);
    else if (color == PNG_COLOR_TYPE_GRAY)
        channels = 1;
    else if (color == PNG_COLOR_TYPE_RGB)
        channels = 3;
    else
        unsupported = "color type " + std::to_string(color);
    if (unsupported.empty()) {
        if (png_get_interlace_type(png, info) != PNG_INTERLACE_NONE)
            png_set_interlace_handling(png);
        png_read_update_info(png, info);
        data.resize(width * height * channels);
        std::vector<png_bytep> rows(height);
        for (std::size_t y = 0; y < height; ++y)
            rows[y] = data.data() + y * width * channels;
        png_read_image(png, rows.data());
        png_read_end(png, nullptr);
    }
    png_destroy_read_struct(&png, &info, nullptr);
    if (!unsupported.empty())
        throw FormatError(path.string() + ": unsupported PNG " + unsupported +
                          " (need 8-bit RGB or grayscale)");
    return ImageTensor(width, height, channels, std::move(data));
}

inline void save_png(const std::filesystem::path& path, const ImageTensor& image) {
    detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp)
        throw FormatError("cannot create " + path.string());
    std::string err;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err,
                                              detail::png_error_fn, detail::png_warning_fn);
    if (!png)
        throw FormatError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw FormatError(path.string() + ": " + err);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width()),
                 static_cast<png_uint_32>(image.height()), 8,
                 image.channels() == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t stride = image.width() * image.channels();
    for (std::size_t y = 0; y < image.height(); ++y)
        png_write_row(png, const_cast<png_bytep>(image.data().data() + y * stride));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

/// Reads a manifest of "<path>,<true_class>" lines. Relative paths resolve
/// against the manifest's directory; blank lines and '#' comments are skipped.
/// Ids are the line's image stem prefixed with its entry number.
inline std::vector<LabeledImage> load_manifest(const std::filesystem::path& manifest) {
    std::ifstream in(manifest);
    if (!in)
        throw FormatError("cannot open manifest " + manifest.string());
    std::vector<LabeledImage> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line.front() == '#')
            continue;
        const auto comma = line.rfind(',');
        if (comma == std::string::npos)
            throw FormatError(manifest.string() + ":" + std::to_string(lineno) +
                              ": expected <path>,<true_class>");
        std::filesystem::path p = line.substr(0, comma);
        const std::string cls = line.substr(comma + 1);
        std::size_t label = 0;
        auto [ptr, ec] = std::from_chars(cls.data(), cls.data() + cls.size(), label);
        if (ec != std::errc{} || ptr != cls.data() + cls.size())
            throw FormatError(manifest.string() + ":" + std::to_string(lineno) +
                              ": bad class index '" + cls + "'");
        if (p.is_relative())
            p = manifest.parent_path() / p;
        char idx[24];
        std::snprintf(idx, sizeof idx, "%05zu", out.size());
        out.push_back({load_png(p), label, std::string("m") + idx + "-" + p.stem().string()});
    }
    return out;
}

} // namespace pixelstorm
