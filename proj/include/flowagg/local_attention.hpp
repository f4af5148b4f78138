#pragma once

// Similarity-softmax attention over a k x k local window, computed from
// context features: per-pixel linear projections for query/key/value and a
// masked, max-shifted softmax. Out-of-bounds neighbors are excluded from the
// normalization entirely (no zero-padding of context), so every center's
// valid weights sum to 1.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flowagg/cost_volume.hpp"
#include "flowagg/errors.hpp"
#include "flowagg/tensor.hpp"

namespace flowagg {

// k x k window, k odd. radius r = (k-1)/2.
struct LocalRegion {
    int k = 3;

    explicit LocalRegion(int k_ = 3) : k(k_) {
        if (k < 1 || k % 2 == 0) {
            throw RangeError("local_attention",
                             "window size must be odd and >= 1, got " +
                                 std::to_string(k));
        }
    }

    int radius() const noexcept { return (k - 1) / 2; }
};

// Learnable maps of the attention operator. w_theta/w_phi act on context
// features (Cc -> d); w_rho acts on the aggregated features (C -> C); alpha
// gates the residual update. Biases are optional and default to absent.
template <typename T>
struct ProjectionParams {
    DenseTensor<T> w_theta;  // [Cc, d]
    DenseTensor<T> w_phi;    // [Cc, d]
    DenseTensor<T> w_rho;    // [C, C]
    std::vector<T> b_theta;  // [d] or empty
    std::vector<T> b_phi;    // [d] or empty
    std::vector<T> b_rho;    // [C] or empty
    T alpha = T(1);

    std::int64_t context_channels() const { return w_theta.shape.dims[0]; }
    std::int64_t embed_dim() const { return w_theta.shape.dims[1]; }
    std::int64_t value_channels() const { return w_rho.shape.dims[0]; }

    // Seeded uniform in [-1/sqrt(Cin), 1/sqrt(Cin)] per tensor; alpha = 1 so
    // the operator is active (alpha = 0 is the identity case).
    static ProjectionParams seeded(std::int64_t c, std::int64_t cc,
                                   std::int64_t d, Rng& rng, bool bias = false) {
        ProjectionParams p;
        const double bc = 1.0 / std::sqrt(static_cast<double>(cc));
        const double bv = 1.0 / std::sqrt(static_cast<double>(c));
        p.w_theta = uniform<T>(Shape{cc, d}, rng, -bc, bc);
        p.w_phi = uniform<T>(Shape{cc, d}, rng, -bc, bc);
        p.w_rho = uniform<T>(Shape{c, c}, rng, -bv, bv);
        if (bias) {
            p.b_theta.resize(static_cast<std::size_t>(d));
            p.b_phi.resize(static_cast<std::size_t>(d));
            p.b_rho.resize(static_cast<std::size_t>(c));
            for (auto& v : p.b_theta) v = static_cast<T>(rng.uniform(-bc, bc));
            for (auto& v : p.b_phi) v = static_cast<T>(rng.uniform(-bc, bc));
            for (auto& v : p.b_rho) v = static_cast<T>(rng.uniform(-bv, bv));
        }
        p.alpha = T(1);
        return p;
    }

    // theta = phi = identity on context channels, rho = identity, alpha = 1:
    // weights follow raw context similarity. Used by the harness so results
    // reflect the operator, not a random parameter draw.
    static ProjectionParams designed_identity(std::int64_t c, std::int64_t cc) {
        ProjectionParams p;
        p.w_theta = zeros<T>(Shape{cc, cc});
        p.w_phi = zeros<T>(Shape{cc, cc});
        p.w_rho = zeros<T>(Shape{c, c});
        for (std::int64_t i = 0; i < cc; ++i) p.w_theta.data[i * cc + i] = T(1);
        for (std::int64_t i = 0; i < cc; ++i) p.w_phi.data[i * cc + i] = T(1);
        for (std::int64_t i = 0; i < c; ++i) p.w_rho.data[i * c + i] = T(1);
        p.alpha = T(1);
        return p;
    }

    // Floats allocated: theta + phi + rho (+ biases) + alpha.
    std::uint64_t parameter_count() const {
        return w_theta.size() + w_phi.size() + w_rho.size() + b_theta.size() +
               b_phi.size() + b_rho.size() + 1;
    }
};

// Per-center normalized k x k weight field plus the in-bounds mask.
// Invariants: valid entries sum to 1 per center, invalid entries are
// exactly 0, every entry lies in [0, 1].
template <typename T>
struct AttentionWeights {
    std::int64_t h = 0, w = 0;
    int k = 1;
    DenseTensor<T> data;              // [h, w, k, k]
    std::vector<std::uint8_t> valid;  // same layout

    static AttentionWeights make(std::int64_t h, std::int64_t w, int k) {
        AttentionWeights a;
        a.h = h;
        a.w = w;
        a.k = k;
        a.data = zeros<T>(Shape{h, w, k, k});
        a.valid.assign(static_cast<std::size_t>(h * w) *
                           static_cast<std::size_t>(k) * static_cast<std::size_t>(k),
                       0);
        return a;
    }

    std::size_t index(std::int64_t i, std::int64_t j, int dy, int dx) const {
        const int r = (k - 1) / 2;
        return static_cast<std::size_t>(((i * w + j) * k + (dy + r)) * k +
                                        (dx + r));
    }

    T weight(std::int64_t i, std::int64_t j, int dy, int dx) const {
        return data.data[index(i, j, dy, dx)];
    }
    bool is_valid(std::int64_t i, std::int64_t j, int dy, int dx) const {
        return valid[index(i, j, dy, dx)] != 0;
    }
};

// Per-pixel affine map: out(i,j) = fm(i,j)^T * weight + bias.
template <typename T>
FeatureMap<T> project(const FeatureMap<T>& fm, const DenseTensor<T>& weight,
                      std::span<const T> bias = {}) {
    if (weight.shape.rank() != 2) {
        throw ShapeError("local_attention", "project: weight must be 2D");
    }
    const std::int64_t cin = weight.shape.dims[0];
    const std::int64_t cout = weight.shape.dims[1];
    if (fm.c != cin) {
        throw ShapeError("local_attention",
                         "project: channel mismatch (features " +
                             std::to_string(fm.c) + ", weight expects " +
                             std::to_string(cin) + ")");
    }
    if (!bias.empty() && static_cast<std::int64_t>(bias.size()) != cout) {
        throw ShapeError("local_attention", "project: bias length mismatch");
    }
    FeatureMap<T> out = FeatureMap<T>::make(fm.h, fm.w, cout);
    for (std::int64_t i = 0; i < fm.h; ++i) {
        for (std::int64_t j = 0; j < fm.w; ++j) {
            const std::span<const T> x = fm.at(i, j);
            const std::span<T> y = out.at(i, j);
            for (std::int64_t co = 0; co < cout; ++co) {
                double acc = bias.empty() ? 0.0 : static_cast<double>(bias[co]);
                for (std::int64_t ci = 0; ci < cin; ++ci) {
                    acc += static_cast<double>(x[ci]) *
                           static_cast<double>(weight.data[ci * cout + co]);
                }
                y[co] = static_cast<T>(acc);
            }
        }
    }
    return out;
}

// Masked softmax with max-subtraction. Masked entries come out exactly 0.
template <typename T>
std::vector<T> softmax_stable(std::span<const T> logits,
                              std::span<const std::uint8_t> mask) {
    if (logits.size() != mask.size()) {
        throw ShapeError("local_attention", "softmax_stable: mask length mismatch");
    }
    double max_logit = -std::numeric_limits<double>::infinity();
    bool any_valid = false;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (!mask[i]) continue;
        any_valid = true;
        max_logit = std::max(max_logit, static_cast<double>(logits[i]));
    }
    if (!any_valid) {
        throw ContractError("local_attention",
                            "softmax_stable: all entries masked");
    }
    std::vector<T> out(logits.size(), T(0));
    double denom = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (!mask[i]) continue;
        denom += std::exp(static_cast<double>(logits[i]) - max_logit);
    }
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (!mask[i]) continue;
        out[i] = static_cast<T>(
            std::exp(static_cast<double>(logits[i]) - max_logit) / denom);
    }
    return out;
}

// Similarity weights over the local window: logits are <theta(x), phi(x_k)>
// between the center's query embedding and each in-bounds neighbor's key
// embedding; weights are the masked softmax per center.
template <typename T>
AttentionWeights<T> similarity_weights(const FeatureMap<T>& fc,
                                       const ProjectionParams<T>& params,
                                       const LocalRegion& lr, int threads = 1) {
    if (fc.c != params.context_channels()) {
        throw ShapeError("local_attention",
                         "similarity_weights: context channels " +
                             std::to_string(fc.c) + " do not match params Cc " +
                             std::to_string(params.context_channels()));
    }
    if (lr.k > 2 * std::min(fc.h, fc.w) - 1) {
        throw RangeError("local_attention",
                         "similarity_weights: window k=" + std::to_string(lr.k) +
                             " too large for " + std::to_string(fc.h) + "x" +
                             std::to_string(fc.w) + " features");
    }
    const FeatureMap<T> theta_map = project(fc, params.w_theta,
                                            std::span<const T>(params.b_theta));
    const FeatureMap<T> phi_map = project(fc, params.w_phi,
                                          std::span<const T>(params.b_phi));
    const int r = lr.radius();
    const int k = lr.k;
    AttentionWeights<T> weights = AttentionWeights<T>::make(fc.h, fc.w, k);

    parallel_for(fc.h, threads, [&](std::int64_t i) {
        std::vector<T> logits(static_cast<std::size_t>(k) * k, T(0));
        std::vector<std::uint8_t> mask(static_cast<std::size_t>(k) * k, 0);
        for (std::int64_t j = 0; j < fc.w; ++j) {
            const std::span<const T> q = theta_map.at(i, j);
            for (int dy = -r; dy <= r; ++dy) {
                for (int dx = -r; dx <= r; ++dx) {
                    const std::size_t t =
                        static_cast<std::size_t>((dy + r) * k + (dx + r));
                    const std::int64_t ni = i + dy;
                    const std::int64_t nj = j + dx;
                    if (ni < 0 || ni >= fc.h || nj < 0 || nj >= fc.w) {
                        mask[t] = 0;
                        logits[t] = T(0);
                        continue;
                    }
                    mask[t] = 1;
                    const T l = dot(q, phi_map.at(ni, nj));
                    if (!std::isfinite(static_cast<double>(l))) {
                        throw NumericError(
                            "local_attention",
                            "similarity_weights: non-finite logit at center (" +
                                std::to_string(i) + "," + std::to_string(j) +
                                ") offset (" + std::to_string(dy) + "," +
                                std::to_string(dx) + ")");
                    }
                    logits[t] = l;
                }
            }
            const std::vector<T> wrow = softmax_stable<T>(logits, mask);
            const std::size_t base = static_cast<std::size_t>((i * fc.w + j)) *
                                     static_cast<std::size_t>(k) * k;
            for (std::size_t t = 0; t < wrow.size(); ++t) {
                weights.data.data[base + t] = wrow[t];
                weights.valid[base + t] = mask[t];
            }
        }
    });
    return weights;
}

}  // namespace flowagg
