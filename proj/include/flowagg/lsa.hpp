#pragma once

// Local similarity aggregation: each cost map is smoothed over a k x k
// window of frame-2 positions with similarity-softmax weights. Because the
// cost volume is bilinear in the features, aggregating the volume equals
// aggregating F2 itself — the fast path works entirely in feature space:
//
//   F2'(m,n) = F2(m,n) + alpha * sum_k W(m,n,k) * rho(F2(m_k,n_k))
//
// The brute-force oracle applies the same weighted window sum directly to
// the materialized 4D volume and is used to verify the identity.
//
// Fast path: O(H*W*C*(k^2 + C)) time, O(H*W*C) extra space.
// Oracle:    O(H^2*W^2*k^2) time on top of the materialized volume.

#include <cstdint>
#include <optional>
#include <vector>

#include "flowagg/cost_volume.hpp"
#include "flowagg/errors.hpp"
#include "flowagg/local_attention.hpp"
#include "flowagg/tensor.hpp"

namespace flowagg {

template <typename T>
struct LsaConfig {
    LocalRegion lr{3};
    ProjectionParams<T> params;
    bool residual = true;  // false drops the F2(m,n) term (pure aggregation)
};

// Fast feature-space path.
template <typename T>
FeatureMap<T> lsa_aggregate_features(const FeatureMap<T>& f2,
                                     const FeatureMap<T>& fc,
                                     const LsaConfig<T>& cfg, int threads = 1) {
    if (f2.h != fc.h || f2.w != fc.w) {
        throw ShapeError("lsa_op", "aggregate: f2 and context dims differ");
    }
    if (f2.c != cfg.params.value_channels()) {
        throw ShapeError("lsa_op", "aggregate: f2 channels " +
                                       std::to_string(f2.c) +
                                       " do not match value projection " +
                                       std::to_string(cfg.params.value_channels()));
    }
    const AttentionWeights<T> weights =
        similarity_weights(fc, cfg.params, cfg.lr, threads);
    const FeatureMap<T> rho_f2 =
        project(f2, cfg.params.w_rho, std::span<const T>(cfg.params.b_rho));
    const int r = cfg.lr.radius();
    const double alpha = static_cast<double>(cfg.params.alpha);

    FeatureMap<T> out = FeatureMap<T>::make(f2.h, f2.w, f2.c);
    parallel_for(f2.h, threads, [&](std::int64_t m) {
        std::vector<double> acc(static_cast<std::size_t>(f2.c));
        for (std::int64_t n = 0; n < f2.w; ++n) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (int dy = -r; dy <= r; ++dy) {
                for (int dx = -r; dx <= r; ++dx) {
                    if (!weights.is_valid(m, n, dy, dx)) continue;
                    const double wgt =
                        static_cast<double>(weights.weight(m, n, dy, dx));
                    const std::span<const T> nb = rho_f2.at(m + dy, n + dx);
                    for (std::int64_t ch = 0; ch < f2.c; ++ch) {
                        acc[ch] += wgt * static_cast<double>(nb[ch]);
                    }
                }
            }
            const std::span<const T> center = f2.at(m, n);
            const std::span<T> dst = out.at(m, n);
            for (std::int64_t ch = 0; ch < f2.c; ++ch) {
                const double base =
                    cfg.residual ? static_cast<double>(center[ch]) : 0.0;
                dst[ch] = static_cast<T>(base + alpha * acc[ch]);
            }
        }
    });
    return out;
}

// Brute-force oracle: aggregates each cost map over the window in the last
// two dims. cv must have been built from (f1, f2) with scale 1. The value
// projection acts on the F2 side, so the correlations being averaged are
// <F1(i,j), rho(F2(m_k,n_k))>.
template <typename T>
CostVolume4D<T> lsa_aggregate_costvol_oracle(const CostVolume4D<T>& cv,
                                             const FeatureMap<T>& f1,
                                             const FeatureMap<T>& f2,
                                             const FeatureMap<T>& fc,
                                             const LsaConfig<T>& cfg,
                                             int threads = 1) {
    if (cv.h1 != f1.h || cv.w1 != f1.w || cv.h2 != f2.h || cv.w2 != f2.w) {
        throw ShapeError("lsa_op", "oracle: volume dims do not match features");
    }
    if (cv.scale_applied && *cv.scale_applied != T(1)) {
        throw ContractError("lsa_op", "oracle: volume must be built with scale 1");
    }
    const AttentionWeights<T> weights =
        similarity_weights(fc, cfg.params, cfg.lr, threads);
    const FeatureMap<T> rho_f2 =
        project(f2, cfg.params.w_rho, std::span<const T>(cfg.params.b_rho));
    const CostVolume4D<T> projected = build_cost_volume(f1, rho_f2, {}, threads);
    const int r = cfg.lr.radius();
    const double alpha = static_cast<double>(cfg.params.alpha);

    CostVolume4D<T> out = CostVolume4D<T>::make(cv.h1, cv.w1, cv.h2, cv.w2);
    out.scale_applied = cv.scale_applied;
    parallel_for(cv.h1, threads, [&](std::int64_t i) {
        for (std::int64_t j = 0; j < cv.w1; ++j) {
            const std::span<const T> src = cv.cost_map(i, j);
            const std::span<const T> proj = projected.cost_map(i, j);
            T* dst = out.data.data.data() + (i * cv.w1 + j) * cv.h2 * cv.w2;
            for (std::int64_t m = 0; m < cv.h2; ++m) {
                for (std::int64_t n = 0; n < cv.w2; ++n) {
                    double acc = 0.0;
                    for (int dy = -r; dy <= r; ++dy) {
                        for (int dx = -r; dx <= r; ++dx) {
                            if (!weights.is_valid(m, n, dy, dx)) continue;
                            acc += static_cast<double>(
                                       weights.weight(m, n, dy, dx)) *
                                   static_cast<double>(
                                       proj[(m + dy) * cv.w2 + (n + dx)]);
                        }
                    }
                    const double base =
                        cfg.residual
                            ? static_cast<double>(src[m * cv.w2 + n])
                            : 0.0;
                    dst[m * cv.w2 + n] = static_cast<T>(base + alpha * acc);
                }
            }
        }
    });
    return out;
}

// Gradients of a scalar loss through the fast path, given upstream = dL/dF2'.
// Single-threaded reference implementation so gradcheck is deterministic.
template <typename T>
struct LsaGradients {
    FeatureMap<T> d_f2;
    DenseTensor<T> d_w_theta;
    DenseTensor<T> d_w_phi;
    DenseTensor<T> d_w_rho;
    std::vector<T> d_b_theta;
    std::vector<T> d_b_phi;
    std::vector<T> d_b_rho;
    T d_alpha = T(0);
};

template <typename T>
LsaGradients<T> lsa_backward(const FeatureMap<T>& f2, const FeatureMap<T>& fc,
                             const LsaConfig<T>& cfg,
                             const FeatureMap<T>& upstream) {
    if (upstream.h != f2.h || upstream.w != f2.w || upstream.c != f2.c) {
        throw ShapeError("lsa_op", "backward: upstream dims do not match f2");
    }
    if (f2.h != fc.h || f2.w != fc.w) {
        throw ShapeError("lsa_op", "backward: f2 and context dims differ");
    }
    const ProjectionParams<T>& p = cfg.params;
    const std::int64_t cc = p.context_channels();
    const std::int64_t ed = p.embed_dim();
    const std::int64_t c = p.value_channels();
    const int r = cfg.lr.radius();
    const double alpha = static_cast<double>(p.alpha);

    const AttentionWeights<T> weights = similarity_weights(fc, p, cfg.lr);
    const FeatureMap<T> theta_map =
        project(fc, p.w_theta, std::span<const T>(p.b_theta));
    const FeatureMap<T> phi_map =
        project(fc, p.w_phi, std::span<const T>(p.b_phi));
    const FeatureMap<T> rho_f2 =
        project(f2, p.w_rho, std::span<const T>(p.b_rho));

    const std::size_t hw = static_cast<std::size_t>(f2.h * f2.w);
    std::vector<double> d_rho(hw * static_cast<std::size_t>(c), 0.0);
    std::vector<double> d_theta_map(hw * static_cast<std::size_t>(ed), 0.0);
    std::vector<double> d_phi_map(hw * static_cast<std::size_t>(ed), 0.0);
    double d_alpha = 0.0;

    const int k = cfg.lr.k;
    std::vector<double> dw(static_cast<std::size_t>(k) * k, 0.0);
    for (std::int64_t m = 0; m < f2.h; ++m) {
        for (std::int64_t n = 0; n < f2.w; ++n) {
            const std::span<const T> up = upstream.at(m, n);

            // dL/d(weight) and the alpha channel of the chain rule.
            std::fill(dw.begin(), dw.end(), 0.0);
            double wsum_dot = 0.0;  // sum_k w_k * <U, rho(F2_k)> = <U, A>
            for (int dy = -r; dy <= r; ++dy) {
                for (int dx = -r; dx <= r; ++dx) {
                    if (!weights.is_valid(m, n, dy, dx)) continue;
                    const std::span<const T> nb = rho_f2.at(m + dy, n + dx);
                    double u_dot_nb = 0.0;
                    for (std::int64_t ch = 0; ch < c; ++ch) {
                        u_dot_nb += static_cast<double>(up[ch]) *
                                    static_cast<double>(nb[ch]);
                    }
                    const double wgt =
                        static_cast<double>(weights.weight(m, n, dy, dx));
                    dw[(dy + r) * k + (dx + r)] = alpha * u_dot_nb;
                    wsum_dot += wgt * u_dot_nb;

                    // scatter into the value-projected map
                    double* dr = d_rho.data() +
                                 (static_cast<std::size_t>((m + dy) * f2.w +
                                                           (n + dx))) *
                                     static_cast<std::size_t>(c);
                    for (std::int64_t ch = 0; ch < c; ++ch) {
                        dr[ch] += alpha * wgt * static_cast<double>(up[ch]);
                    }
                }
            }
            d_alpha += wsum_dot;

            // softmax backward: dl_k = w_k * (dw_k - sum_k' w_k' dw_k')
            double proj_sum = 0.0;
            for (int dy = -r; dy <= r; ++dy) {
                for (int dx = -r; dx <= r; ++dx) {
                    if (!weights.is_valid(m, n, dy, dx)) continue;
                    proj_sum += static_cast<double>(weights.weight(m, n, dy, dx)) *
                                dw[(dy + r) * k + (dx + r)];
                }
            }
            const std::span<const T> q = theta_map.at(m, n);
            double* dtm = d_theta_map.data() +
                          static_cast<std::size_t>(m * f2.w + n) *
                              static_cast<std::size_t>(ed);
            for (int dy = -r; dy <= r; ++dy) {
                for (int dx = -r; dx <= r; ++dx) {
                    if (!weights.is_valid(m, n, dy, dx)) continue;
                    const double dl =
                        static_cast<double>(weights.weight(m, n, dy, dx)) *
                        (dw[(dy + r) * k + (dx + r)] - proj_sum);
                    const std::span<const T> key = phi_map.at(m + dy, n + dx);
                    double* dpm = d_phi_map.data() +
                                  static_cast<std::size_t>((m + dy) * f2.w +
                                                           (n + dx)) *
                                      static_cast<std::size_t>(ed);
                    for (std::int64_t e = 0; e < ed; ++e) {
                        dtm[e] += dl * static_cast<double>(key[e]);
                        dpm[e] += dl * static_cast<double>(q[e]);
                    }
                }
            }
        }
    }

    LsaGradients<T> g;
    g.d_f2 = FeatureMap<T>::make(f2.h, f2.w, c);
    g.d_w_theta = zeros<T>(Shape{cc, ed});
    g.d_w_phi = zeros<T>(Shape{cc, ed});
    g.d_w_rho = zeros<T>(Shape{c, c});
    g.d_alpha = static_cast<T>(d_alpha);
    if (!p.b_theta.empty()) g.d_b_theta.assign(p.b_theta.size(), T(0));
    if (!p.b_phi.empty()) g.d_b_phi.assign(p.b_phi.size(), T(0));
    if (!p.b_rho.empty()) g.d_b_rho.assign(p.b_rho.size(), T(0));

    std::vector<double> acc_theta(static_cast<std::size_t>(cc * ed), 0.0);
    std::vector<double> acc_phi(static_cast<std::size_t>(cc * ed), 0.0);
    std::vector<double> acc_rho(static_cast<std::size_t>(c * c), 0.0);
    std::vector<double> acc_bt(static_cast<std::size_t>(ed), 0.0);
    std::vector<double> acc_bp(static_cast<std::size_t>(ed), 0.0);
    std::vector<double> acc_br(static_cast<std::size_t>(c), 0.0);

    for (std::int64_t i = 0; i < f2.h; ++i) {
        for (std::int64_t j = 0; j < f2.w; ++j) {
            const std::size_t px = static_cast<std::size_t>(i * f2.w + j);
            const std::span<const T> ctx = fc.at(i, j);
            const double* dtm = d_theta_map.data() + px * static_cast<std::size_t>(ed);
            const double* dpm = d_phi_map.data() + px * static_cast<std::size_t>(ed);
            for (std::int64_t ci = 0; ci < cc; ++ci) {
                const double xv = static_cast<double>(ctx[ci]);
                for (std::int64_t e = 0; e < ed; ++e) {
                    acc_theta[ci * ed + e] += xv * dtm[e];
                    acc_phi[ci * ed + e] += xv * dpm[e];
                }
            }
            for (std::int64_t e = 0; e < ed; ++e) {
                acc_bt[e] += dtm[e];
                acc_bp[e] += dpm[e];
            }

            const std::span<const T> x2 = f2.at(i, j);
            const double* dr = d_rho.data() + px * static_cast<std::size_t>(c);
            for (std::int64_t ci = 0; ci < c; ++ci) {
                const double xv = static_cast<double>(x2[ci]);
                for (std::int64_t co = 0; co < c; ++co) {
                    acc_rho[ci * c + co] += xv * dr[co];
                }
            }
            for (std::int64_t co = 0; co < c; ++co) acc_br[co] += dr[co];

            // f2 gradient: residual pass-through plus the value projection.
            const std::span<const T> up = upstream.at(i, j);
            const std::span<T> df2 = g.d_f2.at(i, j);
            for (std::int64_t ci = 0; ci < c; ++ci) {
                double acc = cfg.residual ? static_cast<double>(up[ci]) : 0.0;
                for (std::int64_t co = 0; co < c; ++co) {
                    acc += static_cast<double>(p.w_rho.data[ci * c + co]) * dr[co];
                }
                df2[ci] = static_cast<T>(acc);
            }
        }
    }

    for (std::size_t t = 0; t < acc_theta.size(); ++t) {
        g.d_w_theta.data[t] = static_cast<T>(acc_theta[t]);
        g.d_w_phi.data[t] = static_cast<T>(acc_phi[t]);
    }
    for (std::size_t t = 0; t < acc_rho.size(); ++t) {
        g.d_w_rho.data[t] = static_cast<T>(acc_rho[t]);
    }
    if (!g.d_b_theta.empty()) {
        for (std::int64_t e = 0; e < ed; ++e) g.d_b_theta[e] = static_cast<T>(acc_bt[e]);
        for (std::int64_t e = 0; e < ed; ++e) g.d_b_phi[e] = static_cast<T>(acc_bp[e]);
        for (std::int64_t ci = 0; ci < c; ++ci) g.d_b_rho[ci] = static_cast<T>(acc_br[ci]);
    }
    return g;
}

// Learnable-parameter total: theta [Cc,d] + phi [Cc,d] + rho [C,C] + alpha.
inline std::uint64_t lsa_param_count(std::int64_t c, std::int64_t cc,
                                     std::int64_t d, bool bias) {
    if (c < 1 || cc < 1 || d < 1) {
        throw RangeError("lsa_op", "param_count: dims must be positive");
    }
    std::uint64_t total = 2ull * static_cast<std::uint64_t>(cc) *
                              static_cast<std::uint64_t>(d) +
                          static_cast<std::uint64_t>(c) *
                              static_cast<std::uint64_t>(c) +
                          1;
    if (bias) {
        total += 2ull * static_cast<std::uint64_t>(d) +
                 static_cast<std::uint64_t>(c);
    }
    return total;
}

}  // namespace flowagg
