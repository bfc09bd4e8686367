#pragma once

// Netpbm I/O. Reads PGM in both ASCII (P2) and binary (P5) encodings with
// maxval 255 or 65535 (16-bit samples big-endian), normalizing to [0,1].
// Writes 8-bit binary PGM; binary masks become {0, 255} and round-trip
// losslessly. Snapshot frames go out as binary PPM (P6).

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "image.hpp"
#include "particles.hpp"

namespace consenseg {

class io_error : public std::runtime_error {
public:
    explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {

// Skips whitespace and '#' comments (comment runs to end of line).
inline void skip_pnm_space(std::istream& in) {
    for (;;) {
        const int ch = in.peek();
        if (ch == '#') {
            std::string line;
            std::getline(in, line);
        } else if (ch == ' ' || ch == '\t' || ch == '\r' || ch == '\n' || ch == '\v' || ch == '\f') {
            in.get();
        } else {
            return;
        }
    }
}

inline long read_pnm_int(std::istream& in, const char* path, const char* what) {
    skip_pnm_space(in);
    long value = 0;
    bool any = false;
    for (;;) {
        const int ch = in.peek();
        if (ch < '0' || ch > '9')
            break;
        in.get();
        any = true;
        value = value * 10 + (ch - '0');
        if (value > 1000000000L)
            throw io_error(std::string(path) + ": oversized " + what + " in PGM header");
    }
    if (!any)
        throw io_error(std::string(path) + ": malformed PGM, expected " + what);
    return value;
}

} // namespace detail

inline GrayImage read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw io_error(path + ": cannot open for reading");

    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (!in || m0 != 'P' || (m1 != '2' && m1 != '5'))
        throw io_error(path + ": not a PGM file (expected P2 or P5)");
    const bool binary = m1 == '5';

    const long width = detail::read_pnm_int(in, path.c_str(), "width");
    const long height = detail::read_pnm_int(in, path.c_str(), "height");
    const long maxval = detail::read_pnm_int(in, path.c_str(), "maxval");
    if (width < 1 || height < 1)
        throw io_error(path + ": bad PGM dimensions");
    if (maxval != 255 && maxval != 65535)
        throw io_error(path + ": unsupported maxval " + std::to_string(maxval) +
                       " (supported: 255, 65535)");

    GrayImage img(static_cast<int>(width), static_cast<int>(height), 0.0);
    const std::size_t n = img.size();

    if (binary) {
        // exactly one whitespace byte separates the header from the raster
        const int sep = in.get();
        if (sep != ' ' && sep != '\t' && sep != '\r' && sep != '\n')
            throw io_error(path + ": malformed PGM, missing raster separator");
        const std::size_t bytes_per_sample = maxval > 255 ? 2 : 1;
        std::vector<unsigned char> raw(n * bytes_per_sample);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (static_cast<std::size_t>(in.gcount()) != raw.size())
            throw io_error(path + ": truncated PGM raster");
        if (bytes_per_sample == 1) {
            for (std::size_t i = 0; i < n; ++i)
                img.values[i] = raw[i] / 255.0;
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                const unsigned value = (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1];
                img.values[i] = value / 65535.0;
            }
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            long v;
            try {
                v = detail::read_pnm_int(in, path.c_str(), "sample");
            } catch (const io_error&) {
                throw io_error(path + ": truncated or malformed P2 raster");
            }
            if (v > maxval)
                throw io_error(path + ": P2 sample exceeds maxval");
            img.values[i] = static_cast<double>(v) / static_cast<double>(maxval);
        }
    }
    return img;
}

// Reads a PGM and thresholds at 0.5 (mask files are {0, 255}, but any gray
// input is accepted).
inline BinaryMask read_mask_pgm(const std::string& path) {
    const GrayImage img = read_pgm(path);
    BinaryMask mask(img.width, img.height, 0);
    for (std::size_t i = 0; i < img.values.size(); ++i)
        mask.values[i] = img.values[i] >= 0.5 ? 1 : 0;
    return mask;
}

namespace detail {

inline void write_pgm_bytes(const std::string& path, int width, int height,
                            const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw io_error(path + ": cannot open for writing");
    out << "P5\n" << width << " " << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw io_error(path + ": write failed");
}

} // namespace detail

inline void write_pgm(const BinaryMask& mask, const std::string& path) {
    std::vector<std::uint8_t> bytes(mask.values.size());
    for (std::size_t i = 0; i < bytes.size(); ++i)
        bytes[i] = mask.values[i] ? 255 : 0;
    detail::write_pgm_bytes(path, mask.width, mask.height, bytes);
}

inline void write_pgm(const GrayImage& img, const std::string& path) {
    std::vector<std::uint8_t> bytes(img.values.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        const double v = std::min(1.0, std::max(0.0, img.values[i]));
        bytes[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    detail::write_pgm_bytes(path, img.width, img.height, bytes);
}

inline void write_pgm(const MultiLevelMask& mlm, const std::string& path) {
    std::vector<std::uint8_t> bytes(mlm.values.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        const double v = std::min(1.0, std::max(0.0, mlm.values[i]));
        bytes[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    detail::write_pgm_bytes(path, mlm.width, mlm.height, bytes);
}

// Rasterizes particle positions over [-1,1]^2 onto a square canvas as black
// points on white; out-of-domain particles are dropped, not clamped.
inline void write_ppm_frame(const std::vector<Vec2>& positions, const std::string& path,
                            int canvas = 512) {
    if (canvas < 1)
        throw std::invalid_argument("write_ppm_frame: canvas must be positive");
    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(canvas) * canvas * 3, 255);
    const double scale = (canvas - 1) / 2.0;
    for (const Vec2& p : positions) {
        if (p.x < -1.0 || p.x > 1.0 || p.y < -1.0 || p.y > 1.0)
            continue;
        const int col = static_cast<int>(std::lround((p.x + 1.0) * scale));
        const int row = static_cast<int>(std::lround((p.y + 1.0) * scale));
        auto* px = &rgb[(static_cast<std::size_t>(row) * canvas + col) * 3];
        px[0] = px[1] = px[2] = 0;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw io_error(path + ": cannot open for writing");
    out << "P6\n" << canvas << " " << canvas << "\n255\n";
    out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
    if (!out)
        throw io_error(path + ": write failed");
}

} // namespace consenseg
