#pragma once

// All-pairs 4D cost volume, its average-pooled multi-scale pyramid, and the
// windowed bilinear lookup that turns partial correlation values into
// correlation features.
//
// Conventions:
//   volume[i,j,m,n] = scale * <f1(i,j), f2(m,n)>        (i,j frame 1; m,n frame 2)
//   pyramid level L pools the last two dims by 2^L (ceil at odd borders,
//   averaging valid cells only)
//   lookup samples level L of pixel (i,j)'s cost map at
//   ((j+u)/2^L + dx, (i+v)/2^L + dy), dx,dy in [-r, r]; out of range reads 0.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flowagg/errors.hpp"
#include "flowagg/flow_field.hpp"
#include "flowagg/tensor.hpp"

namespace flowagg {

template <typename T>
struct FeatureMap {
    std::int64_t h = 0, w = 0, c = 0;
    DenseTensor<T> data;  // [h, w, c]

    static FeatureMap make(std::int64_t h, std::int64_t w, std::int64_t c) {
        return FeatureMap{h, w, c, zeros<T>(Shape{h, w, c})};
    }

    static FeatureMap seeded(std::int64_t h, std::int64_t w, std::int64_t c,
                             Rng& rng, double lo = -1.0, double hi = 1.0) {
        return FeatureMap{h, w, c, uniform<T>(Shape{h, w, c}, rng, lo, hi)};
    }

    std::span<T> at(std::int64_t i, std::int64_t j) {
        return {data.data.data() + (i * w + j) * c, static_cast<std::size_t>(c)};
    }
    std::span<const T> at(std::int64_t i, std::int64_t j) const {
        return {data.data.data() + (i * w + j) * c, static_cast<std::size_t>(c)};
    }
};

template <typename T>
struct CostVolume4D {
    std::int64_t h1 = 0, w1 = 0, h2 = 0, w2 = 0;
    DenseTensor<T> data;  // [h1, w1, h2, w2]
    std::optional<T> scale_applied;

    static CostVolume4D make(std::int64_t h1, std::int64_t w1, std::int64_t h2,
                             std::int64_t w2) {
        return CostVolume4D{h1, w1, h2, w2, zeros<T>(Shape{h1, w1, h2, w2}), {}};
    }

    T& at(std::int64_t i, std::int64_t j, std::int64_t m, std::int64_t n) {
        return data.data[((i * w1 + j) * h2 + m) * w2 + n];
    }
    T at(std::int64_t i, std::int64_t j, std::int64_t m, std::int64_t n) const {
        return data.data[((i * w1 + j) * h2 + m) * w2 + n];
    }

    // CostMap view: one frame-1 pixel's correlation against all of frame 2.
    std::span<T> cost_map(std::int64_t i, std::int64_t j) {
        return {data.data.data() + (i * w1 + j) * h2 * w2,
                static_cast<std::size_t>(h2 * w2)};
    }
    std::span<const T> cost_map(std::int64_t i, std::int64_t j) const {
        return {data.data.data() + (i * w1 + j) * h2 * w2,
                static_cast<std::size_t>(h2 * w2)};
    }
};

template <typename T>
struct CostPyramid {
    std::vector<CostVolume4D<T>> levels;  // level 0 is unpooled

    std::size_t num_levels() const { return levels.size(); }
};

namespace detail {

template <typename T>
void require_same_hwc(const FeatureMap<T>& a, const FeatureMap<T>& b,
                      const char* component, const char* what) {
    if (a.h != b.h || a.w != b.w || a.c != b.c) {
        throw ShapeError(component, std::string(what) + ": feature maps differ (" +
                                        std::to_string(a.h) + "x" + std::to_string(a.w) +
                                        "x" + std::to_string(a.c) + " vs " +
                                        std::to_string(b.h) + "x" + std::to_string(b.w) +
                                        "x" + std::to_string(b.c) + ")");
    }
}

}  // namespace detail

// out[i,j,m,n] = scale * <f1(i,j), f2(m,n)>. scale defaults to 1; pass
// 1/sqrt(C) if downstream softmax magnitudes need taming.
template <typename T>
CostVolume4D<T> build_cost_volume(const FeatureMap<T>& f1, const FeatureMap<T>& f2,
                                  std::optional<T> scale = {}, int threads = 1) {
    detail::require_same_hwc(f1, f2, "cost_volume", "build_cost_volume");
    const T s = scale.value_or(T(1));
    CostVolume4D<T> out = CostVolume4D<T>::make(f1.h, f1.w, f2.h, f2.w);
    out.scale_applied = s;
    parallel_for(f1.h, threads, [&](std::int64_t i) {
        for (std::int64_t j = 0; j < f1.w; ++j) {
            T* map = out.data.data.data() + (i * f1.w + j) * f2.h * f2.w;
            const std::span<const T> a = f1.at(i, j);
            for (std::int64_t m = 0; m < f2.h; ++m) {
                for (std::int64_t n = 0; n < f2.w; ++n) {
                    map[m * f2.w + n] = s * dot(a, f2.at(m, n));
                }
            }
        }
    });
    return out;
}

// 2x2 average pooling over the last two dims, ceil semantics at odd borders
// (partial windows average their valid cells only).
template <typename T>
CostPyramid<T> build_pyramid(const CostVolume4D<T>& cv, int num_levels) {
    if (num_levels < 1) {
        throw RangeError("cost_volume", "build_pyramid: num_levels must be >= 1");
    }
    int max_levels = 1;
    for (std::int64_t m = std::min(cv.h2, cv.w2); m >= 2; m /= 2) ++max_levels;
    if (num_levels > max_levels) {
        throw RangeError("cost_volume",
                         "build_pyramid: num_levels " + std::to_string(num_levels) +
                             " exceeds log2(min(H2,W2))+1 = " +
                             std::to_string(max_levels));
    }

    CostPyramid<T> pyr;
    pyr.levels.push_back(cv);
    for (int level = 1; level < num_levels; ++level) {
        const CostVolume4D<T>& prev = pyr.levels.back();
        const std::int64_t ph = (prev.h2 + 1) / 2;
        const std::int64_t pw = (prev.w2 + 1) / 2;
        CostVolume4D<T> next = CostVolume4D<T>::make(prev.h1, prev.w1, ph, pw);
        next.scale_applied = prev.scale_applied;
        for (std::int64_t i = 0; i < prev.h1; ++i) {
            for (std::int64_t j = 0; j < prev.w1; ++j) {
                const std::span<const T> src = prev.cost_map(i, j);
                T* dst = next.data.data.data() + (i * prev.w1 + j) * ph * pw;
                for (std::int64_t m = 0; m < ph; ++m) {
                    for (std::int64_t n = 0; n < pw; ++n) {
                        double sum = 0.0;
                        int cnt = 0;
                        for (std::int64_t dm = 0; dm < 2; ++dm) {
                            for (std::int64_t dn = 0; dn < 2; ++dn) {
                                const std::int64_t sm = 2 * m + dm;
                                const std::int64_t sn = 2 * n + dn;
                                if (sm < prev.h2 && sn < prev.w2) {
                                    sum += static_cast<double>(src[sm * prev.w2 + sn]);
                                    ++cnt;
                                }
                            }
                        }
                        dst[m * pw + n] = static_cast<T>(sum / cnt);
                    }
                }
            }
        }
        pyr.levels.push_back(std::move(next));
    }
    return pyr;
}

namespace detail {

// Bilinear sample of a 2D map with zero outside [0,w-1]x[0,h-1].
template <typename T>
double bilinear_zero(std::span<const T> map, std::int64_t h, std::int64_t w,
                     double y, double x) {
    const auto y0 = static_cast<std::int64_t>(std::floor(y));
    const auto x0 = static_cast<std::int64_t>(std::floor(x));
    const double fy = y - static_cast<double>(y0);
    const double fx = x - static_cast<double>(x0);
    double acc = 0.0;
    for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
            const std::int64_t yy = y0 + dy;
            const std::int64_t xx = x0 + dx;
            if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
            const double wgt = (dy ? fy : 1.0 - fy) * (dx ? fx : 1.0 - fx);
            acc += wgt * static_cast<double>(map[yy * w + xx]);
        }
    }
    return acc;
}

}  // namespace detail

// Correlation features: for each pixel and level, a (2r+1)^2 grid of bilinear
// samples around the flow target. Output is [H, W, L*(2r+1)^2] with channels
// ordered level-major, then dy, then dx.
template <typename T>
DenseTensor<T> lookup(const CostPyramid<T>& pyr, const FlowField& flow,
                      int radius, int threads = 1) {
    if (pyr.levels.empty()) {
        throw ContractError("cost_volume", "lookup: empty pyramid");
    }
    const CostVolume4D<T>& base = pyr.levels.front();
    if (flow.h != base.h1 || flow.w != base.w1) {
        throw ShapeError("cost_volume", "lookup: flow dims do not match volume");
    }
    if (radius < 0) {
        throw RangeError("cost_volume", "lookup: radius must be >= 0");
    }
    const std::int64_t side = 2 * static_cast<std::int64_t>(radius) + 1;
    const std::int64_t per_level = side * side;
    const auto num_levels = static_cast<std::int64_t>(pyr.levels.size());
    DenseTensor<T> out = zeros<T>(Shape{base.h1, base.w1, num_levels * per_level});

    parallel_for(base.h1, threads, [&](std::int64_t i) {
        for (std::int64_t j = 0; j < base.w1; ++j) {
            T* dst = out.data.data() +
                     (i * base.w1 + j) * num_levels * per_level;
            const double u = flow.u(i, j);
            const double v = flow.v(i, j);
            for (std::int64_t level = 0; level < num_levels; ++level) {
                const CostVolume4D<T>& cv = pyr.levels[level];
                const std::span<const T> map = cv.cost_map(i, j);
                const double inv = 1.0 / static_cast<double>(std::int64_t{1} << level);
                const double cx = (static_cast<double>(j) + u) * inv;
                const double cy = (static_cast<double>(i) + v) * inv;
                for (std::int64_t dy = -radius; dy <= radius; ++dy) {
                    for (std::int64_t dx = -radius; dx <= radius; ++dx) {
                        const std::int64_t ch =
                            level * per_level + (dy + radius) * side + (dx + radius);
                        dst[ch] = static_cast<T>(detail::bilinear_zero(
                            map, cv.h2, cv.w2, cy + static_cast<double>(dy),
                            cx + static_cast<double>(dx)));
                    }
                }
            }
        }
    });
    return out;
}

}  // namespace flowagg
