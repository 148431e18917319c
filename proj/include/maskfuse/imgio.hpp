#pragma once

#include <png.h>

#include <bit>
#include <cerrno>
#include <charconv>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "core.hpp"

namespace maskfuse {

namespace detail {

struct FileHandle {
    std::FILE* fp = nullptr;
    FileHandle(const std::string& path, const char* mode) {
        fp = std::fopen(path.c_str(), mode);
        if (!fp)
            throw std::runtime_error(path + ": cannot open: " + std::strerror(errno));
    }
    ~FileHandle() {
        if (fp) std::fclose(fp);
    }
    FileHandle(const FileHandle&) = delete;
    FileHandle& operator=(const FileHandle&) = delete;
};

struct PngErrorCtx {
    std::string msg;
};

inline void png_error_fn(png_structp p, png_const_charp m) {
    auto* ctx = static_cast<PngErrorCtx*>(png_get_error_ptr(p));
    if (ctx) ctx->msg = m ? m : "unknown libpng error";
    std::longjmp(png_jmpbuf(p), 1);
}

inline void png_warning_fn(png_structp, png_const_charp) {}

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline bool parse_i64(const std::string& tok, long long& out) {
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    auto [p, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && p == last;
}

inline bool parse_u64(const std::string& tok, unsigned long long& out) {
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    auto [p, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && p == last;
}

inline bool parse_f64(const std::string& tok, double& out) {
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    auto [p, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && p == last;
}

}  // namespace detail

/// Load an 8-bit PNG as RGB. Grayscale is replicated across channels and any
/// alpha channel is dropped; 16-bit and palette files are rejected.
inline RgbImage read_image_png(const std::string& path) {
    detail::FileHandle file(path, "rb");

    unsigned char sig[8];
    if (std::fread(sig, 1, 8, file.fp) != 8 || png_sig_cmp(sig, 0, 8))
        throw std::runtime_error(path + ": not a PNG file");

    detail::PngErrorCtx ctx;
    png_structp png =
        png_create_read_struct(PNG_LIBPNG_VER_STRING, &ctx, detail::png_error_fn, detail::png_warning_fn);
    if (!png) throw std::runtime_error("libpng: failed to allocate read struct");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("libpng: failed to allocate info struct");
    }

    RgbImage img;
    std::vector<unsigned char> buf;
    std::vector<png_bytep> rows;

    if (setjmp(png_jmpbuf(png))) {
        std::string msg = ctx.msg.empty() ? "corrupt PNG" : ctx.msg;
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error(path + ": " + msg);
    }

    png_init_io(png, file.fp);
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int depth = png_get_bit_depth(png, info);
    const int color_type = png_get_color_type(png, info);

    if (depth != 8) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error(path + ": unsupported PNG bit depth " + std::to_string(depth) +
                                 " (only 8-bit images are supported)");
    }
    if (color_type == PNG_COLOR_TYPE_PALETTE) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error(path + ": unsupported PNG color type (palette)");
    }
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);

    png_read_update_info(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    if (rowbytes != static_cast<std::size_t>(w) * 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error(path + ": unexpected PNG row layout");
    }

    img = RgbImage(static_cast<int>(w), static_cast<int>(h));
    buf.resize(rowbytes * h);
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = buf.data() + static_cast<std::size_t>(y) * rowbytes;

    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    for (std::size_t i = 0; i < img.pixel_count(); ++i)
        img.data[i] = Rgb{buf[3 * i], buf[3 * i + 1], buf[3 * i + 2]};
    return img;
}

/// Load a PNG as a binary mask: a pixel is foreground iff any color channel
/// is >= 128 (alpha, if present, is dropped first).
inline BinaryMask read_mask_png(const std::string& path) {
    const RgbImage img = read_image_png(path);
    BinaryMask mask(img.width, img.height);
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        const Rgb& c = img.data[i];
        mask.data[i] = (c.r >= 128 || c.g >= 128 || c.b >= 128) ? 1 : 0;
    }
    return mask;
}

/// Write a mask as 8-bit grayscale PNG, foreground as 255.
inline void write_mask_png(const BinaryMask& mask, const std::string& path) {
    mask.validate();
    detail::FileHandle file(path, "wb");

    detail::PngErrorCtx ctx;
    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, &ctx, detail::png_error_fn, detail::png_warning_fn);
    if (!png) throw std::runtime_error("libpng: failed to allocate write struct");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("libpng: failed to allocate info struct");
    }

    std::vector<unsigned char> row(static_cast<std::size_t>(mask.width));

    if (setjmp(png_jmpbuf(png))) {
        std::string msg = ctx.msg.empty() ? "PNG write failed" : ctx.msg;
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error(path + ": " + msg);
    }

    png_init_io(png, file.fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(mask.width), static_cast<png_uint_32>(mask.height), 8,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_BASE, PNG_FILTER_TYPE_BASE);
    png_write_info(png, info);
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) row[x] = mask.at(x, y) ? 255 : 0;
        png_write_row(png, row.data());
    }
    png_write_end(png, info);
    png_destroy_write_struct(&png, &info);
}

/// Write an RGB image as 8-bit PNG.
inline void write_image_png(const RgbImage& img, const std::string& path) {
    if (img.width < 1 || img.height < 1) throw std::invalid_argument("RgbImage: dimensions must be >= 1");
    detail::FileHandle file(path, "wb");

    detail::PngErrorCtx ctx;
    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, &ctx, detail::png_error_fn, detail::png_warning_fn);
    if (!png) throw std::runtime_error("libpng: failed to allocate write struct");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("libpng: failed to allocate info struct");
    }

    std::vector<unsigned char> row(static_cast<std::size_t>(img.width) * 3);

    if (setjmp(png_jmpbuf(png))) {
        std::string msg = ctx.msg.empty() ? "PNG write failed" : ctx.msg;
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error(path + ": " + msg);
    }

    png_init_io(png, file.fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_BASE, PNG_FILTER_TYPE_BASE);
    png_write_info(png, info);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const Rgb& c = img.at(x, y);
            row[3 * x] = c.r;
            row[3 * x + 1] = c.g;
            row[3 * x + 2] = c.b;
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, info);
    png_destroy_write_struct(&png, &info);
}

/// Read a grayscale little-endian PFM into a probability map. Values must be
/// finite and within 1e-6 of [0,1]; anything in the slack band is clamped.
inline ProbMap read_prob_pfm(const std::string& path) {
    static_assert(std::endian::native == std::endian::little, "PFM reader assumes a little-endian host");
    static_assert(sizeof(float) == 4);

    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path + ": cannot open: " + std::strerror(errno));
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    std::size_t pos = 0;
    auto is_ws = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
    auto next_token = [&]() -> std::string {
        while (pos < bytes.size() && is_ws(bytes[pos])) ++pos;
        std::size_t start = pos;
        while (pos < bytes.size() && !is_ws(bytes[pos])) ++pos;
        if (start == pos) throw std::runtime_error(path + ": malformed PFM header");
        return bytes.substr(start, pos - start);
    };

    const std::string magic = next_token();
    if (magic != "Pf") {
        if (magic == "PF") throw std::runtime_error(path + ": color PFM not supported (expected grayscale 'Pf')");
        throw std::runtime_error(path + ": not a PFM file");
    }
    long long w = 0, h = 0;
    double scale = 0.0;
    if (!detail::parse_i64(next_token(), w) || !detail::parse_i64(next_token(), h) ||
        !detail::parse_f64(next_token(), scale))
        throw std::runtime_error(path + ": malformed PFM header");
    if (w < 1 || h < 1) throw std::runtime_error(path + ": invalid PFM dimensions");
    if (scale >= 0.0) throw std::runtime_error(path + ": big-endian PFM not supported");
    if (scale != -1.0) throw std::runtime_error(path + ": unsupported PFM scale " + std::to_string(scale));

    // Exactly one whitespace byte separates the header from the payload.
    if (pos >= bytes.size() || !is_ws(bytes[pos])) throw std::runtime_error(path + ": malformed PFM header");
    ++pos;

    const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 4;
    if (bytes.size() - pos < need) throw std::runtime_error(path + ": truncated PFM payload");
    if (bytes.size() - pos > need) throw std::runtime_error(path + ": unexpected trailing bytes after PFM payload");

    ProbMap map(static_cast<int>(w), static_cast<int>(h));
    // PFM stores rows bottom-to-top.
    for (long long r = 0; r < h; ++r) {
        const long long y = h - 1 - r;
        for (long long x = 0; x < w; ++x) {
            float v;
            std::memcpy(&v, bytes.data() + pos, 4);
            pos += 4;
            if (std::isnan(v)) throw std::runtime_error(path + ": PFM contains NaN");
            if (!std::isfinite(v)) throw std::runtime_error(path + ": PFM contains a non-finite value");
            if (v < -1e-6f || v > 1.0f + 1e-6f)
                throw std::runtime_error(path + ": PFM probability out of range: " + std::to_string(v));
            if (v < 0.0f) v = 0.0f;
            if (v > 1.0f) v = 1.0f;
            map.at(static_cast<int>(x), static_cast<int>(y)) = v;
        }
    }
    return map;
}

/// Write a probability map as grayscale little-endian PFM (scale -1.0).
inline void write_prob_pfm(const ProbMap& map, const std::string& path) {
    static_assert(std::endian::native == std::endian::little, "PFM writer assumes a little-endian host");
    if (map.width < 1 || map.height < 1) throw std::invalid_argument("ProbMap: dimensions must be >= 1");
    for (float v : map.data)
        if (!(v >= 0.0f && v <= 1.0f))
            throw std::invalid_argument("ProbMap: values must be finite and within [0,1]");

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open: " + std::strerror(errno));
    out << "Pf\n" << map.width << " " << map.height << "\n-1.0\n";
    for (int r = 0; r < map.height; ++r) {
        const int y = map.height - 1 - r;
        out.write(reinterpret_cast<const char*>(map.data.data() + map.index(0, y)),
                  static_cast<std::streamsize>(map.width) * 4);
    }
    if (!out.good()) throw std::runtime_error(path + ": PFM write failed");
}

/// Read a box list: one "x_min y_min x_max y_max" per line, '#' comments and
/// blank lines allowed. Min-inclusive, max-exclusive.
inline BBoxList read_boxes(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open: " + std::strerror(errno));

    BBoxList out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string body = detail::trim(line);
        if (body.empty() || body[0] == '#') continue;

        std::istringstream iss(body);
        long long x0, y0, x1, y1;
        std::string extra;
        if (!(iss >> x0 >> y0 >> x1 >> y1) || (iss >> extra))
            throw std::runtime_error(path + ": malformed box at line " + std::to_string(lineno));
        if (x0 < 0 || y0 < 0 || x1 < 0 || y1 < 0)
            throw std::runtime_error(path + ": malformed box at line " + std::to_string(lineno) +
                                     ": negative coordinate");
        if (x0 >= x1 || y0 >= y1)
            throw std::runtime_error(path + ": empty box at line " + std::to_string(lineno));
        out.push_back(BBox{static_cast<int>(x0), static_cast<int>(y0), static_cast<int>(x1), static_cast<int>(y1)});
    }
    return out;
}

/// Write a box list in the same format read_boxes accepts.
inline void write_boxes(const BBoxList& boxes, const std::string& path) {
    for (const BBox& b : boxes)
        if (b.x_min < 0 || b.y_min < 0 || b.x_min >= b.x_max || b.y_min >= b.y_max)
            throw std::invalid_argument("box list contains an invalid box");
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open: " + std::strerror(errno));
    for (const BBox& b : boxes)
        out << b.x_min << " " << b.y_min << " " << b.x_max << " " << b.y_max << "\n";
    if (!out.good()) throw std::runtime_error(path + ": write failed");
}

/// Overlay key=value settings from a config file onto cfg. Keys mirror the
/// PipelineConfig fields; unknown keys are an error.
inline void apply_config_file(const std::string& path, PipelineConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open: " + std::strerror(errno));

    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string body = detail::trim(line);
        if (body.empty() || body[0] == '#') continue;

        const std::size_t eq = body.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path + ": expected key=value at line " + std::to_string(lineno));
        const std::string key = detail::trim(body.substr(0, eq));
        const std::string value = detail::trim(body.substr(eq + 1));
        if (key.empty() || value.empty())
            throw std::runtime_error(path + ": expected key=value at line " + std::to_string(lineno));

        auto bad_value = [&]() {
            return std::runtime_error(path + ": invalid value for '" + key + "' at line " +
                                      std::to_string(lineno));
        };

        if (key == "components" || key == "split") {
            long long v;
            if (!detail::parse_i64(value, v)) throw bad_value();
            (key == "components" ? cfg.components : cfg.split) = static_cast<int>(v);
        } else if (key == "theta" || key == "lambda" || key == "clip") {
            double v;
            if (!detail::parse_f64(value, v)) throw bad_value();
            if (key == "theta")
                cfg.theta = v;
            else if (key == "lambda")
                cfg.lambda = v;
            else
                cfg.clip = v;
        } else if (key == "seed") {
            unsigned long long v;
            if (!detail::parse_u64(value, v)) throw bad_value();
            cfg.seed = v;
        } else if (key == "solver") {
            if (value == "graphcut")
                cfg.solver = SolverKind::graphcut;
            else if (value == "bruteforce")
                cfg.solver = SolverKind::bruteforce;
            else
                throw bad_value();
        } else {
            throw std::runtime_error(path + ": unknown config key '" + key + "' at line " +
                                     std::to_string(lineno));
        }
    }
}

}  // namespace maskfuse
