#pragma once

// Raster value types. A GrayImage holds normalized intensities in [0,1], a
// MultiLevelMask holds per-pixel cluster means (same range), a BinaryMask holds
// 0/1 bytes. All three are row-major with at(row, col) accessors.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace consenseg {

namespace detail {
inline void check_dims(int width, int height, const char* what) {
    if (width < 1 || height < 1)
        throw std::invalid_argument(std::string(what) + ": width and height must be positive");
}
} // namespace detail

struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<double> values; // row-major, normalized to [0,1]

    GrayImage() = default;
    GrayImage(int w, int h, double fill = 0.0) : width(w), height(h) {
        detail::check_dims(w, h, "GrayImage");
        if (fill < 0.0 || fill > 1.0)
            throw std::invalid_argument("GrayImage: fill value outside [0,1]");
        values.assign(static_cast<std::size_t>(w) * h, fill);
    }

    double& at(int row, int col) { return values[static_cast<std::size_t>(row) * width + col]; }
    double at(int row, int col) const { return values[static_cast<std::size_t>(row) * width + col]; }
    std::size_t size() const { return values.size(); }

    // Call after bulk edits; intensities must stay normalized.
    void validate() const {
        detail::check_dims(width, height, "GrayImage");
        if (values.size() != static_cast<std::size_t>(width) * height)
            throw std::invalid_argument("GrayImage: value count does not match dimensions");
        for (double v : values)
            if (!(v >= 0.0 && v <= 1.0))
                throw std::domain_error("GrayImage: intensity outside [0,1]");
    }
};

struct MultiLevelMask {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    MultiLevelMask() = default;
    MultiLevelMask(int w, int h, double fill = 0.0) : width(w), height(h) {
        detail::check_dims(w, h, "MultiLevelMask");
        values.assign(static_cast<std::size_t>(w) * h, fill);
    }

    double& at(int row, int col) { return values[static_cast<std::size_t>(row) * width + col]; }
    double at(int row, int col) const { return values[static_cast<std::size_t>(row) * width + col]; }
    std::size_t size() const { return values.size(); }
};

struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> values; // 0 background, 1 foreground

    BinaryMask() = default;
    BinaryMask(int w, int h, std::uint8_t fill = 0) : width(w), height(h) {
        detail::check_dims(w, h, "BinaryMask");
        values.assign(static_cast<std::size_t>(w) * h, fill ? std::uint8_t{1} : std::uint8_t{0});
    }

    std::uint8_t& at(int row, int col) { return values[static_cast<std::size_t>(row) * width + col]; }
    std::uint8_t at(int row, int col) const { return values[static_cast<std::size_t>(row) * width + col]; }
    std::size_t size() const { return values.size(); }

    bool operator==(const BinaryMask& other) const {
        return width == other.width && height == other.height && values == other.values;
    }
    bool operator!=(const BinaryMask& other) const { return !(*this == other); }
};

} // namespace consenseg
