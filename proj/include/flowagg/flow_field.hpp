#pragma once

// Dense 2D displacement field. u is horizontal (columns), v is vertical
// (rows), both in pixels. The valid mask marks pixels where ground truth
// (or a decoded estimate) is defined.

#include <cstdint>
#include <vector>

#include "flowagg/tensor.hpp"

namespace flowagg {

struct FlowField {
    std::int64_t h = 0;
    std::int64_t w = 0;
    DenseTensor<float> uv;             // [h, w, 2], (u, v) interleaved
    std::vector<std::uint8_t> valid;   // [h*w], 1 = defined

    static FlowField make(std::int64_t h, std::int64_t w) {
        FlowField f;
        f.h = h;
        f.w = w;
        f.uv = zeros<float>(Shape{h, w, 2});
        f.valid.assign(static_cast<std::size_t>(h * w), 1);
        return f;
    }

    float& u(std::int64_t i, std::int64_t j) { return uv.data[idx(i, j)]; }
    float& v(std::int64_t i, std::int64_t j) { return uv.data[idx(i, j) + 1]; }
    float u(std::int64_t i, std::int64_t j) const { return uv.data[idx(i, j)]; }
    float v(std::int64_t i, std::int64_t j) const { return uv.data[idx(i, j) + 1]; }

    bool is_valid(std::int64_t i, std::int64_t j) const {
        return valid[static_cast<std::size_t>(i * w + j)] != 0;
    }
    void set_valid(std::int64_t i, std::int64_t j, bool on) {
        valid[static_cast<std::size_t>(i * w + j)] = on ? 1 : 0;
    }

private:
    std::size_t idx(std::int64_t i, std::int64_t j) const {
        return static_cast<std::size_t>((i * w + j) * 2);
    }
};

}  // namespace flowagg
