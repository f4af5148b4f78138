#pragma once

// Synthetic optical-flow harness. Scenes are deterministic texture functions
// over unbounded integer coordinates, so frame 2 can be synthesized by
// sampling the same function at backward-warped positions (f2(x) = tex(x -
// flow)) with no border special-casing; ground truth lives on frame-1 pixels.
// Textureless patches overwrite the texture on a frame-1 rectangle, which
// makes them appear at the flow-displaced location in frame 2. Matching is
// decoded by cost-volume argmax — deliberately the dumbest decoder, so the
// metrics isolate what aggregation does to the volume.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "flowagg/cost_volume.hpp"
#include "flowagg/errors.hpp"
#include "flowagg/flow_field.hpp"
#include "flowagg/local_attention.hpp"
#include "flowagg/lsa.hpp"
#include "flowagg/slsa.hpp"
#include "flowagg/tensor.hpp"

namespace flowagg {

struct TextureSpec {
    enum class Kind { checker, noise, gradient };
    Kind kind = Kind::noise;
    std::int64_t period = 4;  // checker cell size
    std::uint64_t seed = 0;   // noise
    double amplitude = 1.0;   // noise
};

struct FlowSpec {
    enum class Kind { constant, affine };
    Kind kind = Kind::constant;
    double u = 0.0, v = 0.0;  // constant value, or the affine term at (0,0)
    double du_dx = 0.0, du_dy = 0.0, dv_dx = 0.0, dv_dy = 0.0;
};

struct TexturelessPatch {
    std::int64_t y = 0, x = 0, h = 0, w = 0;
    double value = 0.0;
};

struct SceneSpec {
    std::int64_t h = 0, w = 0;
    TextureSpec texture;
    FlowSpec flow;
    std::vector<TexturelessPatch> patches;

    void validate() const {
        if (h < 1 || w < 1) {
            throw ContractError("flow_harness", "scene dims must be positive");
        }
        if (texture.kind == TextureSpec::Kind::checker && texture.period < 1) {
            throw ContractError("flow_harness", "checker period must be positive");
        }
        for (const TexturelessPatch& p : patches) {
            if (p.h < 1 || p.w < 1 || p.y < 0 || p.x < 0 || p.y + p.h > h ||
                p.x + p.w > w) {
                throw ContractError(
                    "flow_harness",
                    "patch (" + std::to_string(p.y) + "," + std::to_string(p.x) +
                        ")+" + std::to_string(p.h) + "x" + std::to_string(p.w) +
                        " leaves the " + std::to_string(h) + "x" +
                        std::to_string(w) + " canvas");
            }
        }
    }
};

namespace detail {

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

}  // namespace detail

// Texture value at any integer coordinate, patches applied in frame-1
// canvas coordinates.
inline double texture_value(const SceneSpec& spec, std::int64_t y,
                            std::int64_t x, std::int64_t ch,
                            std::uint64_t noise_seed) {
    for (const TexturelessPatch& p : spec.patches) {
        if (y >= p.y && y < p.y + p.h && x >= p.x && x < p.x + p.w) {
            return p.value;
        }
    }
    switch (spec.texture.kind) {
        case TextureSpec::Kind::checker: {
            const std::int64_t parity =
                (detail::floor_div(y, spec.texture.period) +
                 detail::floor_div(x, spec.texture.period)) &
                1;
            return parity ? 1.0 : -1.0;
        }
        case TextureSpec::Kind::noise:
            return spec.texture.amplitude *
                   (2.0 * hash3_unit(noise_seed, y, x, ch) - 1.0);
        case TextureSpec::Kind::gradient:
            return 0.05 * static_cast<double>(y) +
                   0.03 * static_cast<double>(x) +
                   0.1 * static_cast<double>(ch);
    }
    return 0.0;
}

// Ground-truth flow (u horizontal, v vertical) at real coordinates.
inline std::pair<double, double> flow_at(const SceneSpec& spec, double y,
                                         double x) {
    if (spec.flow.kind == FlowSpec::Kind::constant) {
        return {spec.flow.u, spec.flow.v};
    }
    return {spec.flow.u + spec.flow.du_dx * x + spec.flow.du_dy * y,
            spec.flow.v + spec.flow.dv_dx * x + spec.flow.dv_dy * y};
}

// Context features: per-pixel channel-mean intensity reduced to a 3x3
// in-frame local mean and population variance (two channels).
template <typename T>
FeatureMap<T> context_features(const FeatureMap<T>& f1) {
    std::vector<double> g(static_cast<std::size_t>(f1.h * f1.w));
    for (std::int64_t i = 0; i < f1.h; ++i) {
        for (std::int64_t j = 0; j < f1.w; ++j) {
            const std::span<const T> px = f1.at(i, j);
            double s = 0.0;
            for (std::int64_t ch = 0; ch < f1.c; ++ch) {
                s += static_cast<double>(px[ch]);
            }
            g[i * f1.w + j] = s / static_cast<double>(f1.c);
        }
    }
    FeatureMap<T> fc = FeatureMap<T>::make(f1.h, f1.w, 2);
    for (std::int64_t i = 0; i < f1.h; ++i) {
        for (std::int64_t j = 0; j < f1.w; ++j) {
            double sum = 0.0;
            int count = 0;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const std::int64_t y = i + dy, x = j + dx;
                    if (y < 0 || y >= f1.h || x < 0 || x >= f1.w) continue;
                    sum += g[y * f1.w + x];
                    ++count;
                }
            }
            const double mean = sum / count;
            double var = 0.0;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const std::int64_t y = i + dy, x = j + dx;
                    if (y < 0 || y >= f1.h || x < 0 || x >= f1.w) continue;
                    const double d = g[y * f1.w + x] - mean;
                    var += d * d;
                }
            }
            var /= count;
            const std::span<T> dst = fc.at(i, j);
            dst[0] = static_cast<T>(mean);
            dst[1] = static_cast<T>(var);
        }
    }
    return fc;
}

template <typename T>
struct ScenePair {
    FeatureMap<T> f1;
    FeatureMap<T> f2;
    FeatureMap<T> fc;
    FlowField gt;
};

// Renders f1 from the texture, warps backward for f2 (exact index shift for
// integral flows, bilinear otherwise), derives context features from f1, and
// marks ground truth invalid where the target leaves the frame. One value is
// drawn from rng to perturb the noise seed, so a seed sweep varies content.
template <typename T>
ScenePair<T> synthesize_pair(const SceneSpec& spec,
                             std::int64_t feature_channels, Rng& rng) {
    spec.validate();
    if (feature_channels < 1) {
        throw RangeError("flow_harness", "feature channels must be positive");
    }
    const std::uint64_t noise_seed = spec.texture.seed ^ rng.next_u64();
    const std::int64_t h = spec.h, w = spec.w, c = feature_channels;

    ScenePair<T> out;
    out.f1 = FeatureMap<T>::make(h, w, c);
    out.f2 = FeatureMap<T>::make(h, w, c);
    out.gt = FlowField::make(h, w);

    for (std::int64_t i = 0; i < h; ++i) {
        for (std::int64_t j = 0; j < w; ++j) {
            const std::span<T> px = out.f1.at(i, j);
            for (std::int64_t ch = 0; ch < c; ++ch) {
                px[ch] = static_cast<T>(texture_value(spec, i, j, ch, noise_seed));
            }
            const auto [u, v] = flow_at(spec, static_cast<double>(i),
                                        static_cast<double>(j));
            out.gt.uv.data[(i * w + j) * 2 + 0] = static_cast<float>(u);
            out.gt.uv.data[(i * w + j) * 2 + 1] = static_cast<float>(v);
            const double ty = static_cast<double>(i) + v;
            const double tx = static_cast<double>(j) + u;
            out.gt.set_valid(i, j, ty >= 0.0 && ty <= static_cast<double>(h - 1) &&
                                       tx >= 0.0 && tx <= static_cast<double>(w - 1));
        }
    }

    for (std::int64_t m = 0; m < h; ++m) {
        for (std::int64_t n = 0; n < w; ++n) {
            const auto [u, v] = flow_at(spec, static_cast<double>(m),
                                        static_cast<double>(n));
            const double sy = static_cast<double>(m) - v;
            const double sx = static_cast<double>(n) - u;
            const std::span<T> px = out.f2.at(m, n);
            if (std::floor(u) == u && std::floor(v) == v) {
                const std::int64_t iy = static_cast<std::int64_t>(sy);
                const std::int64_t ix = static_cast<std::int64_t>(sx);
                for (std::int64_t ch = 0; ch < c; ++ch) {
                    px[ch] = static_cast<T>(texture_value(spec, iy, ix, ch, noise_seed));
                }
            } else {
                const std::int64_t y0 = static_cast<std::int64_t>(std::floor(sy));
                const std::int64_t x0 = static_cast<std::int64_t>(std::floor(sx));
                const double fy = sy - static_cast<double>(y0);
                const double fx = sx - static_cast<double>(x0);
                for (std::int64_t ch = 0; ch < c; ++ch) {
                    const double v00 = texture_value(spec, y0, x0, ch, noise_seed);
                    const double v01 = texture_value(spec, y0, x0 + 1, ch, noise_seed);
                    const double v10 = texture_value(spec, y0 + 1, x0, ch, noise_seed);
                    const double v11 = texture_value(spec, y0 + 1, x0 + 1, ch, noise_seed);
                    px[ch] = static_cast<T>((1 - fy) * ((1 - fx) * v00 + fx * v01) +
                                            fy * ((1 - fx) * v10 + fx * v11));
                }
            }
        }
    }

    out.fc = context_features(out.f1);
    return out;
}

// Distinctive-feature pair: one-hot frame-1 identity (C = H*W) translated by
// an integer flow, so every correlation is exactly 0 or 1.
template <typename T>
ScenePair<T> make_one_hot_pair(std::int64_t h, std::int64_t w, int u, int v) {
    if (h < 1 || w < 1) {
        throw RangeError("flow_harness", "one-hot pair dims must be positive");
    }
    ScenePair<T> out;
    const std::int64_t c = h * w;
    out.f1 = FeatureMap<T>::make(h, w, c);
    out.f2 = FeatureMap<T>::make(h, w, c);
    out.gt = FlowField::make(h, w);
    for (std::int64_t i = 0; i < h; ++i) {
        for (std::int64_t j = 0; j < w; ++j) {
            out.f1.at(i, j)[i * w + j] = T(1);
            const std::int64_t sy = i - v, sx = j - u;
            if (sy >= 0 && sy < h && sx >= 0 && sx < w) {
                out.f2.at(i, j)[sy * w + sx] = T(1);
            }
            out.gt.uv.data[(i * w + j) * 2 + 0] = static_cast<float>(u);
            out.gt.uv.data[(i * w + j) * 2 + 1] = static_cast<float>(v);
            const std::int64_t ty = i + v, tx = j + u;
            out.gt.set_valid(i, j, ty >= 0 && ty < h && tx >= 0 && tx < w);
        }
    }
    out.fc = context_features(out.f1);
    return out;
}

// Argmax decoding: flow(i,j) = (n*-j, m*-i) for the maximizing (m*,n*); ties
// go to the smallest squared displacement, then to row-major order.
template <typename T>
FlowField argmax_flow(const CostVolume4D<T>& cv) {
    if (cv.h1 != cv.h2 || cv.w1 != cv.w2) {
        throw ShapeError("flow_harness", "argmax needs matching frame dims");
    }
    FlowField flow = FlowField::make(cv.h1, cv.w1);
    for (std::int64_t i = 0; i < cv.h1; ++i) {
        for (std::int64_t j = 0; j < cv.w1; ++j) {
            const std::span<const T> map = cv.cost_map(i, j);
            T best = map[0];
            std::int64_t best_m = 0, best_n = 0;
            std::int64_t best_mag = i * i + j * j;
            for (std::int64_t m = 0; m < cv.h2; ++m) {
                for (std::int64_t n = 0; n < cv.w2; ++n) {
                    const T val = map[m * cv.w2 + n];
                    if (val < best) continue;
                    const std::int64_t mag =
                        (m - i) * (m - i) + (n - j) * (n - j);
                    if (val > best || mag < best_mag) {
                        best = val;
                        best_m = m;
                        best_n = n;
                        best_mag = mag;
                    }
                }
            }
            flow.uv.data[(i * cv.w1 + j) * 2 + 0] =
                static_cast<float>(best_n - j);
            flow.uv.data[(i * cv.w1 + j) * 2 + 1] =
                static_cast<float>(best_m - i);
        }
    }
    return flow;
}

struct EvalReport {
    double epe = 0.0;             // mean endpoint error over valid pixels
    double s40plus = 0.0;         // mean EPE where GT speed exceeds threshold
    double epe_textured = 0.0;
    double epe_textureless = 0.0;
    std::int64_t n_valid = 0, n_s40 = 0, n_textured = 0, n_textureless = 0;
};

// textureless_mask (optional) marks region membership per pixel; without it
// every pixel counts as textured.
inline EvalReport endpoint_error(
    const FlowField& pred, const FlowField& gt,
    std::optional<double> speed_threshold = {},
    const std::vector<std::uint8_t>* textureless_mask = nullptr) {
    if (pred.h != gt.h || pred.w != gt.w) {
        throw ShapeError("flow_harness", "endpoint error: dims differ");
    }
    const double thresh = speed_threshold.value_or(40.0);
    double sum = 0.0, sum_s40 = 0.0, sum_tex = 0.0, sum_flat = 0.0;
    EvalReport rep;
    for (std::int64_t i = 0; i < gt.h; ++i) {
        for (std::int64_t j = 0; j < gt.w; ++j) {
            if (!gt.is_valid(i, j) || !pred.is_valid(i, j)) continue;
            const double du = static_cast<double>(pred.u(i, j)) - gt.u(i, j);
            const double dv = static_cast<double>(pred.v(i, j)) - gt.v(i, j);
            const double e = std::sqrt(du * du + dv * dv);
            sum += e;
            ++rep.n_valid;
            const double gu = gt.u(i, j), gv = gt.v(i, j);
            if (std::sqrt(gu * gu + gv * gv) > thresh) {
                sum_s40 += e;
                ++rep.n_s40;
            }
            const bool flat =
                textureless_mask && (*textureless_mask)[i * gt.w + j] != 0;
            if (flat) {
                sum_flat += e;
                ++rep.n_textureless;
            } else {
                sum_tex += e;
                ++rep.n_textured;
            }
        }
    }
    if (rep.n_valid == 0) {
        throw ContractError("flow_harness", "no valid pixels to score");
    }
    rep.epe = sum / static_cast<double>(rep.n_valid);
    rep.s40plus = rep.n_s40 ? sum_s40 / static_cast<double>(rep.n_s40) : 0.0;
    rep.epe_textured =
        rep.n_textured ? sum_tex / static_cast<double>(rep.n_textured) : 0.0;
    rep.epe_textureless =
        rep.n_textureless ? sum_flat / static_cast<double>(rep.n_textureless)
                          : 0.0;
    return rep;
}

inline std::vector<std::uint8_t> textureless_mask(const SceneSpec& spec) {
    std::vector<std::uint8_t> mask(
        static_cast<std::size_t>(spec.h) * static_cast<std::size_t>(spec.w), 0);
    for (const TexturelessPatch& p : spec.patches) {
        for (std::int64_t i = p.y; i < p.y + p.h; ++i) {
            for (std::int64_t j = p.x; j < p.x + p.w; ++j) {
                mask[i * spec.w + j] = 1;
            }
        }
    }
    return mask;
}

enum class Pipeline { raw, lsa, slsa, lsa_slsa };

inline const char* pipeline_name(Pipeline p) {
    switch (p) {
        case Pipeline::raw: return "raw";
        case Pipeline::lsa: return "lsa";
        case Pipeline::slsa: return "slsa";
        case Pipeline::lsa_slsa: return "lsa+slsa";
    }
    return "?";
}

inline Pipeline pipeline_from_name(const std::string& name) {
    if (name == "raw") return Pipeline::raw;
    if (name == "lsa") return Pipeline::lsa;
    if (name == "slsa") return Pipeline::slsa;
    if (name == "lsa+slsa") return Pipeline::lsa_slsa;
    throw ContractError("flow_harness", "unknown pipeline: " + name);
}

// Identity projections over the harness's two context channels, alpha = 1 —
// weights follow raw context similarity, nothing is tuned per scene.
template <typename T>
LsaConfig<T> designed_lsa_config(std::int64_t c, std::int64_t cc, int k) {
    return LsaConfig<T>{LocalRegion(k), ProjectionParams<T>::designed_identity(c, cc),
                        true};
}

template <typename T>
SlsaConfig<T> designed_slsa_config(std::int64_t c, std::int64_t cc, int k) {
    return SlsaConfig<T>::make(LocalRegion(k),
                               ProjectionParams<T>::designed_identity(c, cc), true);
}

// S40+ threshold scaled from the conventional 40px at 436px frames down to
// desk-scale scenes.
inline double scaled_speed_threshold(std::int64_t h, std::int64_t w) {
    return 40.0 * static_cast<double>(std::min(h, w)) / 436.0;
}

template <typename T>
EvalReport run_experiment(const SceneSpec& spec, Pipeline pipeline,
                          const LsaConfig<T>& lsa_cfg,
                          const SlsaConfig<T>& slsa_cfg,
                          std::int64_t feature_channels, Rng& rng,
                          int threads = 1) {
    const ScenePair<T> sp = synthesize_pair<T>(spec, feature_channels, rng);
    CostVolume4D<T> cv;
    switch (pipeline) {
        case Pipeline::raw:
            cv = build_cost_volume(sp.f1, sp.f2, {}, threads);
            break;
        case Pipeline::lsa: {
            const FeatureMap<T> f2p =
                lsa_aggregate_features(sp.f2, sp.fc, lsa_cfg, threads);
            cv = build_cost_volume(sp.f1, f2p, {}, threads);
            break;
        }
        case Pipeline::slsa:
            cv = slsa_aggregate(sp.f1, sp.f2, sp.fc, slsa_cfg, true, threads);
            break;
        case Pipeline::lsa_slsa: {
            const FeatureMap<T> f2p =
                lsa_aggregate_features(sp.f2, sp.fc, lsa_cfg, threads);
            cv = slsa_aggregate(sp.f1, f2p, sp.fc, slsa_cfg, true, threads);
            break;
        }
    }
    const FlowField flow = argmax_flow(cv);
    const std::vector<std::uint8_t> mask = textureless_mask(spec);
    return endpoint_error(flow, sp.gt, scaled_speed_threshold(spec.h, spec.w),
                          &mask);
}

struct EvalRow {
    std::string pipeline;
    std::uint64_t seed = 0;
    std::int64_t h = 0, w = 0;
    int k = 1;
    EvalReport report;
};

// Rows ordered pipeline-major, seed-minor; seeds are seed0, seed0+1, ...
template <typename T>
std::vector<EvalRow> run_seed_sweep(const SceneSpec& spec,
                                    const std::vector<Pipeline>& pipelines,
                                    const LsaConfig<T>& lsa_cfg,
                                    const SlsaConfig<T>& slsa_cfg,
                                    std::int64_t feature_channels, int n_seeds,
                                    std::uint64_t seed0, int threads = 1) {
    std::vector<EvalRow> rows;
    rows.reserve(pipelines.size() * static_cast<std::size_t>(n_seeds));
    for (const Pipeline p : pipelines) {
        for (int s = 0; s < n_seeds; ++s) {
            const std::uint64_t seed = seed0 + static_cast<std::uint64_t>(s);
            Rng rng(seed);
            EvalRow row;
            row.pipeline = pipeline_name(p);
            row.seed = seed;
            row.h = spec.h;
            row.w = spec.w;
            row.k = lsa_cfg.lr.k;
            row.report = run_experiment(spec, p, lsa_cfg, slsa_cfg,
                                        feature_channels, rng, threads);
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

namespace detail {

inline std::string format_g9(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", x);
    return buf;
}

}  // namespace detail

inline std::string eval_csv(const std::vector<EvalRow>& rows) {
    std::string out = "pipeline,seed,H,W,k,epe,s40plus,epe_textured,epe_textureless\n";
    for (const EvalRow& r : rows) {
        out += r.pipeline;
        out += ',';
        out += std::to_string(r.seed);
        out += ',';
        out += std::to_string(r.h);
        out += ',';
        out += std::to_string(r.w);
        out += ',';
        out += std::to_string(r.k);
        out += ',';
        out += detail::format_g9(r.report.epe);
        out += ',';
        out += detail::format_g9(r.report.s40plus);
        out += ',';
        out += detail::format_g9(r.report.epe_textured);
        out += ',';
        out += detail::format_g9(r.report.epe_textureless);
        out += '\n';
    }
    return out;
}

}  // namespace flowagg
