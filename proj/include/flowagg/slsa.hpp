#pragma once

// Shifted local similarity aggregation: each frame-1 pixel's cost map is
// blended with the cost maps of its k x k frame-1 neighbors, and each
// neighbor's map is shifted by that neighbor's relative position rp so that
// under locally constant flow the matching peaks line up:
//
//   C''(i,j,m,n) = C'(i,j,m,n)
//                + alpha * sum_{(dy,dx)} W(i,j,dy,dx)
//                        * <rho(F1(i+dy,j+dx)), F2a(m+di, n+dj)>
//
// with (di,dj) the shift assigned to window offset (dy,dx) — by default the
// offset itself — and out-of-range shifted reads contributing zero. Weights
// are masked only by window validity, never renormalized against shift
// clipping. With all shifts forced to (0,0) the operator collapses to plain
// feature-space aggregation of F1.

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "flowagg/cost_volume.hpp"
#include "flowagg/errors.hpp"
#include "flowagg/local_attention.hpp"
#include "flowagg/lsa.hpp"
#include "flowagg/tensor.hpp"

namespace flowagg {

// Relative position (di, dj): reading a shifted map means
// Shift(t, rp)(m, n) = t(m + di, n + dj).
struct ShiftOffset {
    int di = 0;
    int dj = 0;
};

template <typename T>
struct SlsaConfig {
    LocalRegion lr{3};
    ProjectionParams<T> params;  // independent of any other operator's params
    bool residual = true;
    // Shift per window offset, row-major over (dy, dx); default rp = (dy, dx).
    std::vector<ShiftOffset> shift_table;

    static SlsaConfig make(LocalRegion lr_, ProjectionParams<T> params_,
                           bool residual_ = true) {
        SlsaConfig cfg;
        cfg.lr = lr_;
        cfg.params = std::move(params_);
        cfg.residual = residual_;
        const int r = lr_.radius();
        cfg.shift_table.reserve(static_cast<std::size_t>(lr_.k) * lr_.k);
        for (int dy = -r; dy <= r; ++dy) {
            for (int dx = -r; dx <= r; ++dx) {
                cfg.shift_table.push_back(ShiftOffset{dy, dx});
            }
        }
        return cfg;
    }

    ShiftOffset shift_at(int dy, int dx) const {
        const int r = lr.radius();
        return shift_table[static_cast<std::size_t>(dy + r) * lr.k + (dx + r)];
    }

    // Projection parameters plus the k x k table of 2-component offsets.
    std::uint64_t parameter_count() const {
        return params.parameter_count() +
               2ull * static_cast<std::uint64_t>(lr.k) * lr.k;
    }
};

namespace detail {

template <typename T>
void check_shift_table(const SlsaConfig<T>& cfg) {
    const std::size_t want =
        static_cast<std::size_t>(cfg.lr.k) * static_cast<std::size_t>(cfg.lr.k);
    if (cfg.shift_table.size() != want) {
        throw ShapeError("slsa_op",
                         "shift table holds " +
                             std::to_string(cfg.shift_table.size()) +
                             " offsets, window needs " + std::to_string(want));
    }
    const int r = cfg.lr.radius();
    for (const ShiftOffset& rp : cfg.shift_table) {
        if (rp.di < -r || rp.di > r || rp.dj < -r || rp.dj > r) {
            throw RangeError("slsa_op", "shift offset exceeds window radius");
        }
    }
}

}  // namespace detail

// Shift a 2D map: out(m,n) = t(m+di, n+dj) where in range, else 0.
template <typename T>
DenseTensor<T> shift_map(const DenseTensor<T>& t, ShiftOffset rp) {
    if (t.shape.rank() != 2) {
        throw ShapeError("slsa_op", "shift_map expects a 2D map");
    }
    const std::int64_t h = t.shape.dims[0];
    const std::int64_t w = t.shape.dims[1];
    DenseTensor<T> out = zeros<T>(t.shape);
    for (std::int64_t m = 0; m < h; ++m) {
        const std::int64_t sm = m + rp.di;
        if (sm < 0 || sm >= h) continue;
        for (std::int64_t n = 0; n < w; ++n) {
            const std::int64_t sn = n + rp.dj;
            if (sn < 0 || sn >= w) continue;
            out.data[m * w + n] = t.data[sm * w + sn];
        }
    }
    return out;
}

// Same, over every channel of a feature map.
template <typename T>
FeatureMap<T> shift_map(const FeatureMap<T>& t, ShiftOffset rp) {
    FeatureMap<T> out = FeatureMap<T>::make(t.h, t.w, t.c);
    for (std::int64_t m = 0; m < t.h; ++m) {
        const std::int64_t sm = m + rp.di;
        if (sm < 0 || sm >= t.h) continue;
        for (std::int64_t n = 0; n < t.w; ++n) {
            const std::int64_t sn = n + rp.dj;
            if (sn < 0 || sn >= t.w) continue;
            const std::span<const T> src = t.at(sm, sn);
            const std::span<T> dst = out.at(m, n);
            for (std::int64_t ch = 0; ch < t.c; ++ch) dst[ch] = src[ch];
        }
    }
    return out;
}

// Fast-path materializer: per offset, the weighted frame-1 neighbor features
// feed one shifted correlation pass — no k^2-sized intermediate volume.
// apply_shift=false forces every rp to (0,0), the degenerate identity.
template <typename T>
CostVolume4D<T> slsa_aggregate(const FeatureMap<T>& f1,
                               const FeatureMap<T>& f2_agg,
                               const FeatureMap<T>& fc,
                               const SlsaConfig<T>& cfg, bool apply_shift = true,
                               int threads = 1) {
    if (f1.h != f2_agg.h || f1.w != f2_agg.w || f1.c != f2_agg.c) {
        throw ShapeError("slsa_op", "aggregate: f1 and f2 dims differ");
    }
    if (f1.h != fc.h || f1.w != fc.w) {
        throw ShapeError("slsa_op", "aggregate: f1 and context dims differ");
    }
    if (f1.c != cfg.params.value_channels()) {
        throw ShapeError("slsa_op", "aggregate: f1 channels do not match value projection");
    }
    detail::check_shift_table(cfg);

    const AttentionWeights<T> weights =
        similarity_weights(fc, cfg.params, cfg.lr, threads);
    const FeatureMap<T> rho_f1 =
        project(f1, cfg.params.w_rho, std::span<const T>(cfg.params.b_rho));
    const int r = cfg.lr.radius();
    const double alpha = static_cast<double>(cfg.params.alpha);
    const std::int64_t h = f1.h, w = f1.w;

    CostVolume4D<T> out = CostVolume4D<T>::make(h, w, h, w);
    parallel_for(h, threads, [&](std::int64_t i) {
        std::vector<double> acc(static_cast<std::size_t>(h * w));
        for (std::int64_t j = 0; j < w; ++j) {
            const std::span<const T> center = f1.at(i, j);
            if (cfg.residual) {
                for (std::int64_t m = 0; m < h; ++m) {
                    for (std::int64_t n = 0; n < w; ++n) {
                        acc[m * w + n] = dot(center, f2_agg.at(m, n));
                    }
                }
            } else {
                std::fill(acc.begin(), acc.end(), 0.0);
            }
            for (int dy = -r; dy <= r; ++dy) {
                for (int dx = -r; dx <= r; ++dx) {
                    if (!weights.is_valid(i, j, dy, dx)) continue;
                    const double wgt =
                        alpha *
                        static_cast<double>(weights.weight(i, j, dy, dx));
                    const std::span<const T> nb = rho_f1.at(i + dy, j + dx);
                    const ShiftOffset rp =
                        apply_shift ? cfg.shift_at(dy, dx) : ShiftOffset{0, 0};
                    for (std::int64_t m = 0; m < h; ++m) {
                        const std::int64_t sm = m + rp.di;
                        if (sm < 0 || sm >= h) continue;
                        for (std::int64_t n = 0; n < w; ++n) {
                            const std::int64_t sn = n + rp.dj;
                            if (sn < 0 || sn >= w) continue;
                            acc[m * w + n] += wgt * dot(nb, f2_agg.at(sm, sn));
                        }
                    }
                }
            }
            T* dst = out.data.data.data() + (i * w + j) * h * w;
            for (std::int64_t t = 0; t < h * w; ++t) {
                dst[t] = static_cast<T>(acc[t]);
            }
        }
    });
    return out;
}

// Linear core of the brute-force form: the weighted sum of shifted neighbor
// cost maps of an arbitrary volume (no residual, no projection). Linear in cv
// for fixed weights.
template <typename T>
CostVolume4D<T> slsa_shift_sum(const CostVolume4D<T>& cv, const FeatureMap<T>& fc,
                               const SlsaConfig<T>& cfg, bool apply_shift = true,
                               int threads = 1) {
    if (cv.h1 != fc.h || cv.w1 != fc.w) {
        throw ShapeError("slsa_op", "shift_sum: volume and context dims differ");
    }
    detail::check_shift_table(cfg);
    const AttentionWeights<T> weights =
        similarity_weights(fc, cfg.params, cfg.lr, threads);
    const int r = cfg.lr.radius();
    const double alpha = static_cast<double>(cfg.params.alpha);
    const std::int64_t h2 = cv.h2, w2 = cv.w2;

    CostVolume4D<T> out = CostVolume4D<T>::make(cv.h1, cv.w1, h2, w2);
    parallel_for(cv.h1, threads, [&](std::int64_t i) {
        std::vector<double> acc(static_cast<std::size_t>(h2 * w2));
        for (std::int64_t j = 0; j < cv.w1; ++j) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (int dy = -r; dy <= r; ++dy) {
                for (int dx = -r; dx <= r; ++dx) {
                    if (!weights.is_valid(i, j, dy, dx)) continue;
                    const double wgt =
                        alpha *
                        static_cast<double>(weights.weight(i, j, dy, dx));
                    const std::span<const T> src = cv.cost_map(i + dy, j + dx);
                    const ShiftOffset rp =
                        apply_shift ? cfg.shift_at(dy, dx) : ShiftOffset{0, 0};
                    for (std::int64_t m = 0; m < h2; ++m) {
                        const std::int64_t sm = m + rp.di;
                        if (sm < 0 || sm >= h2) continue;
                        for (std::int64_t n = 0; n < w2; ++n) {
                            const std::int64_t sn = n + rp.dj;
                            if (sn < 0 || sn >= w2) continue;
                            acc[m * w2 + n] +=
                                wgt * static_cast<double>(src[sm * w2 + sn]);
                        }
                    }
                }
            }
            T* dst = out.data.data.data() + (i * cv.w1 + j) * h2 * w2;
            for (std::int64_t t = 0; t < h2 * w2; ++t) {
                dst[t] = static_cast<T>(acc[t]);
            }
        }
    });
    return out;
}

// Brute-force oracle: residual volume plus the shifted weighted sum of whole
// cost maps of the value-projected frame-1 features against f2_agg. Built out
// of literal shift_map calls so it shares nothing with the fast path beyond
// the weight field.
template <typename T>
CostVolume4D<T> slsa_costvol_oracle(const CostVolume4D<T>& cv_prime,
                                    const FeatureMap<T>& f1,
                                    const FeatureMap<T>& f2_agg,
                                    const FeatureMap<T>& fc,
                                    const SlsaConfig<T>& cfg,
                                    bool apply_shift = true, int threads = 1) {
    if (cv_prime.h1 != f1.h || cv_prime.w1 != f1.w || cv_prime.h2 != f2_agg.h ||
        cv_prime.w2 != f2_agg.w) {
        throw ShapeError("slsa_op", "oracle: volume dims do not match features");
    }
    if (cv_prime.scale_applied && *cv_prime.scale_applied != T(1)) {
        throw ContractError("slsa_op", "oracle: volume must carry scale 1");
    }
    detail::check_shift_table(cfg);
    const AttentionWeights<T> weights =
        similarity_weights(fc, cfg.params, cfg.lr, threads);
    const FeatureMap<T> rho_f1 =
        project(f1, cfg.params.w_rho, std::span<const T>(cfg.params.b_rho));
    const CostVolume4D<T> projected =
        build_cost_volume(rho_f1, f2_agg, {}, threads);
    const int r = cfg.lr.radius();
    const double alpha = static_cast<double>(cfg.params.alpha);
    const std::int64_t h2 = cv_prime.h2, w2 = cv_prime.w2;

    CostVolume4D<T> out = CostVolume4D<T>::make(cv_prime.h1, cv_prime.w1, h2, w2);
    out.scale_applied = cv_prime.scale_applied;
    parallel_for(cv_prime.h1, threads, [&](std::int64_t i) {
        DenseTensor<T> nb_map = zeros<T>(Shape{h2, w2});
        std::vector<double> acc(static_cast<std::size_t>(h2 * w2));
        for (std::int64_t j = 0; j < cv_prime.w1; ++j) {
            if (cfg.residual) {
                const std::span<const T> base = cv_prime.cost_map(i, j);
                for (std::int64_t t = 0; t < h2 * w2; ++t) {
                    acc[t] = static_cast<double>(base[t]);
                }
            } else {
                std::fill(acc.begin(), acc.end(), 0.0);
            }
            for (int dy = -r; dy <= r; ++dy) {
                for (int dx = -r; dx <= r; ++dx) {
                    if (!weights.is_valid(i, j, dy, dx)) continue;
                    const double wgt =
                        alpha *
                        static_cast<double>(weights.weight(i, j, dy, dx));
                    const std::span<const T> src =
                        projected.cost_map(i + dy, j + dx);
                    std::copy(src.begin(), src.end(), nb_map.data.begin());
                    const DenseTensor<T> shifted = shift_map(
                        nb_map,
                        apply_shift ? cfg.shift_at(dy, dx) : ShiftOffset{0, 0});
                    for (std::int64_t t = 0; t < h2 * w2; ++t) {
                        acc[t] += wgt * static_cast<double>(shifted.data[t]);
                    }
                }
            }
            T* dst = out.data.data.data() + (i * cv_prime.w1 + j) * h2 * w2;
            for (std::int64_t t = 0; t < h2 * w2; ++t) {
                dst[t] = static_cast<T>(acc[t]);
            }
        }
    });
    return out;
}

// Degenerate identity: with every shift at (0,0) the operator is exactly
// feature-space aggregation of frame 1, so this runs that code path.
template <typename T>
FeatureMap<T> slsa_no_shift(const FeatureMap<T>& f1, const FeatureMap<T>& fc,
                            const SlsaConfig<T>& cfg, int threads = 1) {
    LsaConfig<T> flat{cfg.lr, cfg.params, cfg.residual};
    return lsa_aggregate_features(f1, fc, flat, threads);
}

// Production form: stream one weighted-feature buffer per offset. For offset
// (dy,dx) the buffer holds alpha * W(i,j,dy,dx) * rho(F1(i+dy,j+dx)) (zero
// where the neighbor leaves the frame); correlating it against the rp-shifted
// F2 side and summing over offsets — plus the residual correlation — equals
// the materialized volume. Peak extra allocation: one H*W*C map.
template <typename T, typename Fn>
void slsa_offset_pass(const FeatureMap<T>& f1, const FeatureMap<T>& fc,
                      const SlsaConfig<T>& cfg, int threads, Fn&& consume) {
    if (f1.h != fc.h || f1.w != fc.w) {
        throw ShapeError("slsa_op", "offset pass: f1 and context dims differ");
    }
    if (f1.c != cfg.params.value_channels()) {
        throw ShapeError("slsa_op", "offset pass: f1 channels do not match value projection");
    }
    detail::check_shift_table(cfg);
    const AttentionWeights<T> weights =
        similarity_weights(fc, cfg.params, cfg.lr, threads);
    const FeatureMap<T> rho_f1 =
        project(f1, cfg.params.w_rho, std::span<const T>(cfg.params.b_rho));
    const int r = cfg.lr.radius();
    const double alpha = static_cast<double>(cfg.params.alpha);

    FeatureMap<T> buf = FeatureMap<T>::make(f1.h, f1.w, f1.c);
    int index = 0;
    for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx, ++index) {
            parallel_for(f1.h, threads, [&](std::int64_t i) {
                for (std::int64_t j = 0; j < f1.w; ++j) {
                    const std::span<T> dst = buf.at(i, j);
                    if (!weights.is_valid(i, j, dy, dx)) {
                        std::fill(dst.begin(), dst.end(), T(0));
                        continue;
                    }
                    const double wgt =
                        alpha *
                        static_cast<double>(weights.weight(i, j, dy, dx));
                    const std::span<const T> nb = rho_f1.at(i + dy, j + dx);
                    for (std::int64_t ch = 0; ch < f1.c; ++ch) {
                        dst[ch] =
                            static_cast<T>(wgt * static_cast<double>(nb[ch]));
                    }
                }
            });
            consume(index, cfg.shift_at(dy, dx),
                    static_cast<const FeatureMap<T>&>(buf));
        }
    }
}

// Materialized convenience form of the same factorization.
template <typename T>
struct SlsaFactored {
    std::vector<ShiftOffset> offsets;
    std::vector<FeatureMap<T>> terms;
};

template <typename T>
SlsaFactored<T> slsa_factored(const FeatureMap<T>& f1, const FeatureMap<T>& fc,
                              const SlsaConfig<T>& cfg, int threads = 1) {
    SlsaFactored<T> out;
    out.offsets.reserve(cfg.shift_table.size());
    out.terms.reserve(cfg.shift_table.size());
    slsa_offset_pass(f1, fc, cfg, threads,
                     [&](int, ShiftOffset rp, const FeatureMap<T>& buf) {
                         out.offsets.push_back(rp);
                         out.terms.push_back(buf);
                     });
    return out;
}

// Parameter twin of lsa_param_count: adds the k x k shift bookkeeping table
// (two stored components per window offset).
inline std::uint64_t slsa_param_count(std::int64_t c, std::int64_t cc,
                                      std::int64_t d, bool bias, int k) {
    if (k < 1 || k % 2 == 0) {
        throw RangeError("slsa_op", "param_count: k must be odd and positive");
    }
    return lsa_param_count(c, cc, d, bias) +
           2ull * static_cast<std::uint64_t>(k) * static_cast<std::uint64_t>(k);
}

}  // namespace flowagg
