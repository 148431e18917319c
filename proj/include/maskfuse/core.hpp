#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace maskfuse {

/// One 8-bit RGB pixel.
struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;

    bool operator==(const Rgb&) const = default;
};

/// Dense row-major H x W grid of 3-channel 8-bit intensities.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<Rgb> data;

    RgbImage() = default;
    RgbImage(int w, int h, Rgb fill = {})
        : width(w), height(h), data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {
        if (w < 1 || h < 1) throw std::invalid_argument("RgbImage: dimensions must be >= 1");
    }

    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
    Rgb& at(int x, int y) { return data[index(x, y)]; }
    const Rgb& at(int x, int y) const { return data[index(x, y)]; }
    std::size_t pixel_count() const { return data.size(); }
};

/// Dense row-major grid of {0,1} labels.
struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    BinaryMask() = default;
    BinaryMask(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {
        if (w < 1 || h < 1) throw std::invalid_argument("BinaryMask: dimensions must be >= 1");
        if (fill > 1) throw std::invalid_argument("BinaryMask: labels must be 0 or 1");
    }

    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
    std::uint8_t& at(int x, int y) { return data[index(x, y)]; }
    std::uint8_t at(int x, int y) const { return data[index(x, y)]; }
    std::size_t pixel_count() const { return data.size(); }

    bool operator==(const BinaryMask&) const = default;

    void validate() const {
        if (width < 1 || height < 1) throw std::invalid_argument("BinaryMask: dimensions must be >= 1");
        if (data.size() != static_cast<std::size_t>(width) * height)
            throw std::invalid_argument("BinaryMask: data length != width*height");
        for (std::uint8_t v : data)
            if (v > 1) throw std::invalid_argument("BinaryMask: labels must be 0 or 1");
    }
};

/// Dense row-major grid of foreground probabilities in [0,1], stored as
/// 32-bit floats so that PFM serialization round-trips losslessly.
struct ProbMap {
    int width = 0;
    int height = 0;
    std::vector<float> data;

    ProbMap() = default;
    ProbMap(int w, int h, float fill = 0.0f)
        : width(w), height(h), data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {
        if (w < 1 || h < 1) throw std::invalid_argument("ProbMap: dimensions must be >= 1");
    }

    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
    float& at(int x, int y) { return data[index(x, y)]; }
    float at(int x, int y) const { return data[index(x, y)]; }
    std::size_t pixel_count() const { return data.size(); }
};

/// Axis-aligned pixel box; min inclusive, max exclusive.
struct BBox {
    int x_min = 0;
    int y_min = 0;
    int x_max = 0;
    int y_max = 0;

    bool operator==(const BBox&) const = default;

    int width() const { return x_max - x_min; }
    int height() const { return y_max - y_min; }
    bool contains(int x, int y) const { return x >= x_min && x < x_max && y >= y_min && y < y_max; }
};

using BBoxList = std::vector<BBox>;

enum class SolverKind { graphcut, bruteforce };

inline const char* to_string(SolverKind s) {
    return s == SolverKind::graphcut ? "graphcut" : "bruteforce";
}

/// Pipeline hyperparameters. Defaults: 5 mixture components, a 10x10 patch
/// grid, color-similarity temperature 20, smoothing trade-off 2 and
/// log-likelihood clipping at +/-100.
struct PipelineConfig {
    int components = 5;
    int split = 10;
    double theta = 20.0;
    double lambda = 2.0;
    double clip = 100.0;
    std::uint64_t seed = 0;
    SolverKind solver = SolverKind::graphcut;

    void validate() const {
        if (components < 1) throw std::invalid_argument("config: components must be a positive integer");
        if (split < 1) throw std::invalid_argument("config: split must be a positive integer");
        if (!(theta > 0.0)) throw std::invalid_argument("config: theta must be positive");
        if (!(lambda >= 0.0)) throw std::invalid_argument("config: lambda must be nonnegative");
        if (!(clip > 0.0)) throw std::invalid_argument("config: clip must be positive");
    }
};

inline void require_same_size(int wa, int ha, int wb, int hb, const std::string& what_a,
                              const std::string& what_b) {
    if (wa != wb || ha != hb)
        throw std::invalid_argument(what_a + " size " + std::to_string(wa) + "x" + std::to_string(ha) +
                                    " does not match " + what_b + " size " + std::to_string(wb) + "x" +
                                    std::to_string(hb));
}

}  // namespace maskfuse
