#pragma once

// Middlebury .flo reader/writer, the standard 55-bin flow color wheel, and
// binary P6 PPM output. Readers preserve float bit patterns exactly; pixels
// whose components exceed 1e9 in magnitude (or are NaN) are treated as
// unknown and masked invalid.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flowagg/errors.hpp"
#include "flowagg/flow_field.hpp"

namespace flowagg {

inline constexpr float kUnknownFlowThresh = 1e9f;
inline constexpr float kUnknownFlowSentinel = 1e10f;

namespace detail {

inline void put_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xFF));
    out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xFF));
}

inline std::uint32_t get_u32le(const std::vector<std::uint8_t>& bytes,
                               std::size_t off) {
    return static_cast<std::uint32_t>(bytes[off]) |
           (static_cast<std::uint32_t>(bytes[off + 1]) << 8) |
           (static_cast<std::uint32_t>(bytes[off + 2]) << 16) |
           (static_cast<std::uint32_t>(bytes[off + 3]) << 24);
}

inline bool flow_component_unknown(float x) {
    return std::isnan(x) || std::fabs(x) > kUnknownFlowThresh;
}

inline bool flow_pixel_unknown(float u, float v) {
    return flow_component_unknown(u) || flow_component_unknown(v);
}

}  // namespace detail

// Layout: "PIEH", width (int32 LE), height (int32 LE), then h*w*2 floats
// (u,v interleaved, row-major, LE).
inline FlowField read_flo(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 12) {
        throw FormatError("io_formats", "flow file shorter than its header");
    }
    if (bytes[0] != 'P' || bytes[1] != 'I' || bytes[2] != 'E' ||
        bytes[3] != 'H') {
        throw FormatError("io_formats", "flow file magic is not PIEH");
    }
    const std::int32_t w = std::bit_cast<std::int32_t>(detail::get_u32le(bytes, 4));
    const std::int32_t h = std::bit_cast<std::int32_t>(detail::get_u32le(bytes, 8));
    if (w < 1 || h < 1 || w > 1000000 || h > 1000000) {
        throw FormatError("io_formats", "flow file dims out of range: " +
                                            std::to_string(w) + "x" +
                                            std::to_string(h));
    }
    const std::size_t want =
        12 + static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * 8;
    if (bytes.size() != want) {
        throw FormatError("io_formats",
                          "flow file body is " + std::to_string(bytes.size() - 12) +
                              " bytes, header implies " + std::to_string(want - 12));
    }
    FlowField flow = FlowField::make(h, w);
    std::size_t off = 12;
    for (std::int64_t i = 0; i < h; ++i) {
        for (std::int64_t j = 0; j < w; ++j) {
            const float u = std::bit_cast<float>(detail::get_u32le(bytes, off));
            const float v = std::bit_cast<float>(detail::get_u32le(bytes, off + 4));
            off += 8;
            flow.uv.data[(i * w + j) * 2 + 0] = u;
            flow.uv.data[(i * w + j) * 2 + 1] = v;
            flow.set_valid(i, j, !detail::flow_pixel_unknown(u, v));
        }
    }
    return flow;
}

// Valid pixels keep their exact bits. Invalid pixels keep their bits when the
// stored values already read back as unknown (so write∘read is byte-exact);
// otherwise the conventional sentinel is substituted.
inline std::vector<std::uint8_t> write_flo(const FlowField& flow) {
    std::vector<std::uint8_t> out;
    out.reserve(12 + static_cast<std::size_t>(flow.h) * flow.w * 8);
    out.push_back('P');
    out.push_back('I');
    out.push_back('E');
    out.push_back('H');
    detail::put_u32le(out, std::bit_cast<std::uint32_t>(
                               static_cast<std::int32_t>(flow.w)));
    detail::put_u32le(out, std::bit_cast<std::uint32_t>(
                               static_cast<std::int32_t>(flow.h)));
    for (std::int64_t i = 0; i < flow.h; ++i) {
        for (std::int64_t j = 0; j < flow.w; ++j) {
            float u = flow.u(i, j);
            float v = flow.v(i, j);
            if (!flow.is_valid(i, j) && !detail::flow_pixel_unknown(u, v)) {
                u = kUnknownFlowSentinel;
                v = kUnknownFlowSentinel;
            }
            detail::put_u32le(out, std::bit_cast<std::uint32_t>(u));
            detail::put_u32le(out, std::bit_cast<std::uint32_t>(v));
        }
    }
    return out;
}

struct RgbImage {
    std::int64_t h = 0, w = 0;
    std::vector<std::uint8_t> rgb;  // h*w*3, row-major

    static RgbImage make(std::int64_t h_, std::int64_t w_) {
        RgbImage img;
        img.h = h_;
        img.w = w_;
        img.rgb.assign(static_cast<std::size_t>(h_ * w_ * 3), 0);
        return img;
    }
};

// 55-entry wheel over six hue transitions (RY 15, YG 6, GC 4, CB 11, BM 13,
// MR 6), the standard optical-flow palette.
inline const std::array<std::array<int, 3>, 55>& flow_color_wheel() {
    static const std::array<std::array<int, 3>, 55> wheel = [] {
        std::array<std::array<int, 3>, 55> w{};
        constexpr int RY = 15, YG = 6, GC = 4, CB = 11, BM = 13, MR = 6;
        int col = 0;
        for (int i = 0; i < RY; ++i) w[col++] = {255, 255 * i / RY, 0};
        for (int i = 0; i < YG; ++i) w[col++] = {255 - 255 * i / YG, 255, 0};
        for (int i = 0; i < GC; ++i) w[col++] = {0, 255, 255 * i / GC};
        for (int i = 0; i < CB; ++i) w[col++] = {0, 255 - 255 * i / CB, 255};
        for (int i = 0; i < BM; ++i) w[col++] = {255 * i / BM, 0, 255};
        for (int i = 0; i < MR; ++i) w[col++] = {255, 0, 255 - 255 * i / MR};
        return w;
    }();
    return wheel;
}

// Hue from atan2, saturation from magnitude over max_norm (per-image max of
// the valid pixels when not supplied). Zero flow renders white, invalid
// pixels black.
inline RgbImage flow_to_color(const FlowField& flow,
                              std::optional<double> max_norm = {}) {
    const auto& wheel = flow_color_wheel();
    const int ncols = static_cast<int>(wheel.size());

    double maxrad = 0.0;
    if (max_norm) {
        maxrad = *max_norm;
    } else {
        for (std::int64_t i = 0; i < flow.h; ++i) {
            for (std::int64_t j = 0; j < flow.w; ++j) {
                if (!flow.is_valid(i, j)) continue;
                const double u = flow.u(i, j), v = flow.v(i, j);
                maxrad = std::max(maxrad, std::sqrt(u * u + v * v));
            }
        }
    }
    if (!(maxrad > 0.0)) maxrad = 1.0;

    RgbImage img = RgbImage::make(flow.h, flow.w);
    for (std::int64_t i = 0; i < flow.h; ++i) {
        for (std::int64_t j = 0; j < flow.w; ++j) {
            std::uint8_t* px = img.rgb.data() + (i * flow.w + j) * 3;
            if (!flow.is_valid(i, j)) {
                px[0] = px[1] = px[2] = 0;
                continue;
            }
            const double u = flow.u(i, j) / maxrad;
            const double v = flow.v(i, j) / maxrad;
            const double rad = std::sqrt(u * u + v * v);
            const double a = std::atan2(-v, -u) / 3.14159265358979323846;
            const double fk = (a + 1.0) / 2.0 * (ncols - 1);
            const int k0 = static_cast<int>(std::floor(fk));
            const int k1 = (k0 + 1) % ncols;
            const double f = fk - k0;
            for (int ch = 0; ch < 3; ++ch) {
                const double col0 = wheel[static_cast<std::size_t>(k0)][ch] / 255.0;
                const double col1 = wheel[static_cast<std::size_t>(k1)][ch] / 255.0;
                double col = (1.0 - f) * col0 + f * col1;
                if (rad <= 1.0) {
                    col = 1.0 - rad * (1.0 - col);
                } else {
                    col *= 0.75;
                }
                px[ch] = static_cast<std::uint8_t>(
                    static_cast<int>(255.0 * col));
            }
        }
    }
    return img;
}

inline std::vector<std::uint8_t> write_ppm(const RgbImage& img) {
    const std::string header = "P6\n" + std::to_string(img.w) + " " +
                               std::to_string(img.h) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.rgb.begin(), img.rgb.end());
    return out;
}

}  // namespace flowagg
