#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <vector>

#include "flowagg/slsa.hpp"
#include "oracles.hpp"

using namespace flowagg;

namespace {

template <typename T>
SlsaConfig<T> seeded_config(std::int64_t c, std::int64_t cc, std::int64_t d,
                            int k, Rng& rng, bool residual = true) {
    return SlsaConfig<T>::make(LocalRegion(k),
                               ProjectionParams<T>::seeded(c, cc, d, rng),
                               residual);
}

template <typename T>
CostVolume4D<T> seeded_volume(std::int64_t h, std::int64_t w, Rng& rng) {
    CostVolume4D<T> cv = CostVolume4D<T>::make(h, w, h, w);
    for (auto& v : cv.data.data) v = static_cast<T>(rng.uniform(-1.0, 1.0));
    return cv;
}

}  // namespace

TEST_CASE("shifting a map relabels coordinates and zero-fills the exposed edge") {
    DenseTensor<double> t = zeros<double>(Shape{2, 2});
    t.data = {1.0, 2.0, 3.0, 4.0};

    const DenseTensor<double> same = shift_map(t, ShiftOffset{0, 0});
    REQUIRE(same.data == t.data);

    const DenseTensor<double> down = shift_map(t, ShiftOffset{1, 0});
    REQUIRE(down.data == std::vector<double>{3.0, 4.0, 0.0, 0.0});

    const DenseTensor<double> diag = shift_map(t, ShiftOffset{1, 1});
    REQUIRE(diag.data == std::vector<double>{4.0, 0.0, 0.0, 0.0});
}

TEST_CASE("a shift and its inverse zero the wrapped-off border and keep the rest") {
    Rng rng(70);
    DenseTensor<double> t = uniform<double>(Shape{4, 5}, rng, -1.0, 1.0);
    const DenseTensor<double> back =
        shift_map(shift_map(t, ShiftOffset{1, 1}), ShiftOffset{-1, -1});
    for (std::int64_t m = 0; m < 4; ++m) {
        for (std::int64_t n = 0; n < 5; ++n) {
            const double want = (m == 0 || n == 0) ? 0.0 : t.data[m * 5 + n];
            REQUIRE(back.data[m * 5 + n] == want);
        }
    }
}

TEST_CASE("feature maps shift per pixel with zero fill") {
    Rng rng(71);
    const auto fm = FeatureMap<double>::seeded(3, 3, 2, rng);
    const FeatureMap<double> s = shift_map(fm, ShiftOffset{-1, 0});
    for (std::int64_t m = 0; m < 3; ++m) {
        for (std::int64_t n = 0; n < 3; ++n) {
            for (std::int64_t ch = 0; ch < 2; ++ch) {
                const double want = (m - 1 >= 0) ? fm.at(m - 1, n)[ch] : 0.0;
                REQUIRE(s.at(m, n)[ch] == want);
            }
        }
    }
}

TEST_CASE("shift_map rejects non-2d tensors") {
    REQUIRE_THROWS_AS(shift_map(zeros<double>(Shape{2, 2, 2}), ShiftOffset{0, 0}),
                      ShapeError);
}

TEST_CASE("the default shift table pairs each window offset with itself") {
    Rng rng(72);
    const auto cfg = seeded_config<double>(4, 2, 2, 5, rng);
    REQUIRE(cfg.shift_table.size() == 25);
    for (int dy = -2; dy <= 2; ++dy) {
        for (int dx = -2; dx <= 2; ++dx) {
            const ShiftOffset rp = cfg.shift_at(dy, dx);
            REQUIRE(rp.di == dy);
            REQUIRE(rp.dj == dx);
        }
    }
}

TEST_CASE("shift tables are validated for size and range") {
    Rng rng(73);
    const auto f1 = FeatureMap<double>::seeded(4, 4, 3, rng);
    const auto fc = FeatureMap<double>::seeded(4, 4, 2, rng);
    auto cfg = seeded_config<double>(3, 2, 2, 3, rng);

    auto short_table = cfg;
    short_table.shift_table.pop_back();
    REQUIRE_THROWS_AS(slsa_aggregate(f1, f1, fc, short_table), ShapeError);

    auto wild = cfg;
    wild.shift_table[0] = ShiftOffset{2, 0};
    REQUIRE_THROWS_AS(slsa_aggregate(f1, f1, fc, wild), RangeError);
}

TEST_CASE("shifted aggregation matches an independent scalar reference") {
    Rng rng(74);
    for (const bool residual : {true, false}) {
        for (const bool apply_shift : {true, false}) {
            const auto f1 = FeatureMap<double>::seeded(5, 6, 4, rng);
            const auto f2a = FeatureMap<double>::seeded(5, 6, 4, rng);
            const auto fc = FeatureMap<double>::seeded(5, 6, 3, rng);
            const auto cfg = seeded_config<double>(4, 3, 3, 3, rng, residual);
            const CostVolume4D<double> got =
                slsa_aggregate(f1, f2a, fc, cfg, apply_shift);
            const std::vector<double> want =
                refimpl::ref_slsa_volume(f1, f2a, fc, cfg, apply_shift);
            REQUIRE(refimpl::max_abs_diff(got.data.data, want) < 1e-12);
        }
    }
}

TEST_CASE("fast shifted aggregation equals the brute-force volume oracle") {
    Rng rng(75);
    for (const bool residual : {true, false}) {
        const auto f1 = FeatureMap<double>::seeded(6, 6, 4, rng);
        const auto f2a = FeatureMap<double>::seeded(6, 6, 4, rng);
        const auto fc = FeatureMap<double>::seeded(6, 6, 3, rng);
        const auto cfg = seeded_config<double>(4, 3, 3, 3, rng, residual);

        const CostVolume4D<double> fast = slsa_aggregate(f1, f2a, fc, cfg);
        const CostVolume4D<double> cv_prime = build_cost_volume(f1, f2a);
        const CostVolume4D<double> oracle =
            slsa_costvol_oracle(cv_prime, f1, f2a, fc, cfg);
        REQUIRE(refimpl::max_abs_diff(fast.data.data, oracle.data.data) < 1e-10);
    }
}

TEST_CASE("the shifted identity holds in single precision to four decimals") {
    Rng rng(76);
    const auto f1 = FeatureMap<float>::seeded(8, 8, 16, rng);
    const auto f2a = FeatureMap<float>::seeded(8, 8, 16, rng);
    const auto fc = FeatureMap<float>::seeded(8, 8, 4, rng);
    const auto cfg = seeded_config<float>(16, 4, 4, 5, rng);
    const CostVolume4D<float> fast = slsa_aggregate(f1, f2a, fc, cfg);
    const CostVolume4D<float> oracle =
        slsa_costvol_oracle(build_cost_volume(f1, f2a), f1, f2a, fc, cfg);
    REQUIRE(refimpl::max_abs_diff(fast.data.data, oracle.data.data) < 1e-4);
}

TEST_CASE("a one-by-one window reduces to correlating self-enhanced features") {
    Rng rng(77);
    const auto f1 = FeatureMap<double>::seeded(5, 5, 3, rng);
    const auto f2a = FeatureMap<double>::seeded(5, 5, 3, rng);
    const auto fc = FeatureMap<double>::seeded(5, 5, 2, rng);
    const auto cfg = seeded_config<double>(3, 2, 2, 1, rng);

    const CostVolume4D<double> got = slsa_aggregate(f1, f2a, fc, cfg);

    FeatureMap<double> enhanced =
        project(f1, cfg.params.w_rho, std::span<const double>(cfg.params.b_rho));
    for (std::size_t i = 0; i < enhanced.data.data.size(); ++i) {
        enhanced.data.data[i] = f1.data.data[i] +
                                cfg.params.alpha * enhanced.data.data[i];
    }
    const CostVolume4D<double> want = build_cost_volume(enhanced, f2a);
    REQUIRE(refimpl::max_abs_diff(got.data.data, want.data.data) < 1e-12);
}

TEST_CASE("constant first frame and context make interior cost maps identical") {
    Rng rng(78);
    FeatureMap<double> f1 = FeatureMap<double>::make(6, 6, 3);
    for (auto& v : f1.data.data) v = 0.4;
    FeatureMap<double> fc = FeatureMap<double>::make(6, 6, 2);
    for (auto& v : fc.data.data) v = -0.2;
    const auto f2a = FeatureMap<double>::seeded(6, 6, 3, rng);
    const auto cfg = seeded_config<double>(3, 2, 2, 3, rng);

    const CostVolume4D<double> cv = slsa_aggregate(f1, f2a, fc, cfg);
    const std::span<const double> base = cv.cost_map(2, 2);
    for (std::int64_t i = 1; i <= 4; ++i) {
        for (std::int64_t j = 1; j <= 4; ++j) {
            const std::span<const double> map = cv.cost_map(i, j);
            for (std::size_t p = 0; p < map.size(); ++p) {
                REQUIRE(map[p] == Catch::Approx(base[p]).margin(1e-12));
            }
        }
    }
}

TEST_CASE("a point source spreads one ninth onto each shifted window slot") {
    FeatureMap<double> fc = FeatureMap<double>::make(8, 8, 2);
    for (auto& v : fc.data.data) v = 1.0;
    SlsaConfig<double> cfg = SlsaConfig<double>::make(
        LocalRegion(3), ProjectionParams<double>::designed_identity(3, 2));

    CostVolume4D<double> cv = CostVolume4D<double>::make(8, 8, 8, 8);
    cv.at(3, 3, 4, 4) = 1.0;

    const CostVolume4D<double> out = slsa_shift_sum(cv, fc, cfg);
    double total = 0.0;
    for (std::int64_t i = 0; i < 8; ++i) {
        for (std::int64_t j = 0; j < 8; ++j) {
            for (std::int64_t m = 0; m < 8; ++m) {
                for (std::int64_t n = 0; n < 8; ++n) {
                    const double v = out.at(i, j, m, n);
                    total += v;
                    const bool expected = i >= 2 && i <= 4 && j >= 2 && j <= 4 &&
                                          m == i + 1 && n == j + 1;
                    if (expected) {
                        REQUIRE(v == Catch::Approx(1.0 / 9).margin(1e-12));
                    } else {
                        REQUIRE(v == 0.0);
                    }
                }
            }
        }
    }
    REQUIRE(total == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("the weighted shift sum is linear in the volume") {
    Rng rng(79);
    const auto fc = FeatureMap<double>::seeded(5, 5, 2, rng);
    const auto cfg = seeded_config<double>(3, 2, 2, 3, rng);
    const CostVolume4D<double> v1 = seeded_volume<double>(5, 5, rng);
    const CostVolume4D<double> v2 = seeded_volume<double>(5, 5, rng);
    const double a = 0.7, b = -1.3;

    CostVolume4D<double> mix = CostVolume4D<double>::make(5, 5, 5, 5);
    for (std::size_t i = 0; i < mix.data.data.size(); ++i) {
        mix.data.data[i] = a * v1.data.data[i] + b * v2.data.data[i];
    }

    const CostVolume4D<double> lhs = slsa_shift_sum(mix, fc, cfg);
    const CostVolume4D<double> s1 = slsa_shift_sum(v1, fc, cfg);
    const CostVolume4D<double> s2 = slsa_shift_sum(v2, fc, cfg);
    for (std::size_t i = 0; i < lhs.data.data.size(); ++i) {
        const double want = a * s1.data.data[i] + b * s2.data.data[i];
        const double denom =
            std::max({std::abs(lhs.data.data[i]), std::abs(want), 1e-9});
        REQUIRE(std::abs(lhs.data.data[i] - want) / denom < 1e-5);
    }
}

TEST_CASE("disabling the shift reuses the first-frame aggregation path bitwise") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng(seed);
        const auto f1 = FeatureMap<float>::seeded(6, 5, 4, rng);
        const auto fc = FeatureMap<float>::seeded(6, 5, 2, rng);
        const auto cfg = seeded_config<float>(4, 2, 3, 3, rng);

        const FeatureMap<float> no_shift = slsa_no_shift(f1, fc, cfg);
        const LsaConfig<float> flat{cfg.lr, cfg.params, cfg.residual};
        const FeatureMap<float> lsa = lsa_aggregate_features(f1, fc, flat);
        REQUIRE(std::memcmp(no_shift.data.data.data(), lsa.data.data.data(),
                            sizeof(float) * lsa.data.data.size()) == 0);
    }
}

TEST_CASE("forcing zero offsets equals correlating the aggregated first frame") {
    Rng rng(80);
    const auto f1 = FeatureMap<double>::seeded(6, 6, 4, rng);
    const auto f2a = FeatureMap<double>::seeded(6, 6, 4, rng);
    const auto fc = FeatureMap<double>::seeded(6, 6, 2, rng);
    const auto cfg = seeded_config<double>(4, 2, 2, 3, rng);

    const CostVolume4D<double> forced =
        slsa_aggregate(f1, f2a, fc, cfg, /*apply_shift=*/false);
    const FeatureMap<double> f1_agg = slsa_no_shift(f1, fc, cfg);
    const CostVolume4D<double> want = build_cost_volume(f1_agg, f2a);
    REQUIRE(refimpl::max_abs_diff(forced.data.data, want.data.data) < 1e-10);
}

TEST_CASE("the streamed offset factorization reconstructs the full volume") {
    Rng rng(81);
    const auto f1 = FeatureMap<double>::seeded(5, 5, 3, rng);
    const auto f2a = FeatureMap<double>::seeded(5, 5, 3, rng);
    const auto fc = FeatureMap<double>::seeded(5, 5, 2, rng);
    const auto cfg = seeded_config<double>(3, 2, 2, 3, rng);

    CostVolume4D<double> rebuilt = build_cost_volume(f1, f2a);
    int calls = 0;
    slsa_offset_pass(f1, fc, cfg, 1,
                     [&](int index, ShiftOffset rp, const FeatureMap<double>& buf) {
                         REQUIRE(index == calls);
                         ++calls;
                         const CostVolume4D<double> term =
                             build_cost_volume(buf, shift_map(f2a, rp));
                         for (std::size_t i = 0; i < rebuilt.data.data.size();
                              ++i) {
                             rebuilt.data.data[i] += term.data.data[i];
                         }
                     });
    REQUIRE(calls == 9);

    const CostVolume4D<double> want = slsa_aggregate(f1, f2a, fc, cfg);
    REQUIRE(refimpl::max_abs_diff(rebuilt.data.data, want.data.data) < 1e-10);
}

TEST_CASE("the materialized factorization matches the streamed buffers") {
    Rng rng(82);
    const auto f1 = FeatureMap<double>::seeded(4, 4, 3, rng);
    const auto fc = FeatureMap<double>::seeded(4, 4, 2, rng);
    const auto cfg = seeded_config<double>(3, 2, 2, 3, rng);

    const SlsaFactored<double> fac = slsa_factored(f1, fc, cfg);
    REQUIRE(fac.terms.size() == 9);
    REQUIRE(fac.offsets.size() == 9);

    std::size_t at = 0;
    slsa_offset_pass(f1, fc, cfg, 1,
                     [&](int, ShiftOffset rp, const FeatureMap<double>& buf) {
                         REQUIRE(fac.offsets[at].di == rp.di);
                         REQUIRE(fac.offsets[at].dj == rp.dj);
                         REQUIRE(fac.terms[at].data.data == buf.data.data);
                         ++at;
                     });
}

TEST_CASE("shifted parameter count adds the two-component shift table") {
    Rng rng(83);
    const auto cfg = seeded_config<double>(8, 4, 6, 3, rng);
    REQUIRE(cfg.parameter_count() == cfg.params.parameter_count() + 2 * 9);
    REQUIRE(slsa_param_count(8, 4, 6, false, 3) ==
            lsa_param_count(8, 4, 6, false) + 18);
    REQUIRE(slsa_param_count(96, 64, 64, false, 3) == 17409 + 18);
    REQUIRE_THROWS_AS(slsa_param_count(8, 4, 6, false, 2), RangeError);
    REQUIRE_THROWS_AS(slsa_param_count(8, 4, 6, false, -1), RangeError);
}

TEST_CASE("parameter totals order none, plain, shifted, both") {
    const std::uint64_t none = 0;
    const std::uint64_t plain = lsa_param_count(16, 2, 2, false);
    const std::uint64_t shifted = slsa_param_count(16, 2, 2, false, 3);
    const std::uint64_t both = plain + shifted;
    REQUIRE(none < plain);
    REQUIRE(plain < shifted);
    REQUIRE(shifted < both);
}

TEST_CASE("threaded shifted aggregation equals single-threaded") {
    Rng rng(84);
    const auto f1 = FeatureMap<float>::seeded(7, 6, 4, rng);
    const auto f2a = FeatureMap<float>::seeded(7, 6, 4, rng);
    const auto fc = FeatureMap<float>::seeded(7, 6, 2, rng);
    const auto cfg = seeded_config<float>(4, 2, 2, 3, rng);
    const CostVolume4D<float> one = slsa_aggregate(f1, f2a, fc, cfg, true, 1);
    const CostVolume4D<float> four = slsa_aggregate(f1, f2a, fc, cfg, true, 4);
    REQUIRE(one.data.data == four.data.data);
}

TEST_CASE("the shifted oracle in a degenerate window adds one projected term") {
    Rng rng(81);
    const auto f1 = FeatureMap<double>::seeded(5, 5, 4, rng);
    const auto f2a = FeatureMap<double>::seeded(5, 5, 4, rng);
    const auto fc = FeatureMap<double>::seeded(5, 5, 2, rng);
    const SlsaConfig<double> cfg = SlsaConfig<double>::make(
        LocalRegion(1), ProjectionParams<double>::seeded(4, 2, 2, rng));
    const CostVolume4D<double> cv = build_cost_volume(f1, f2a);
    const CostVolume4D<double> out = slsa_costvol_oracle(cv, f1, f2a, fc, cfg);
    FeatureMap<double> rho_f1 = project(f1, cfg.params.w_rho,
                                        std::span<const double>(cfg.params.b_rho));
    const CostVolume4D<double> cv_rho = build_cost_volume(rho_f1, f2a);
    const double alpha = static_cast<double>(cfg.params.alpha);
    for (std::size_t p = 0; p < out.data.data.size(); ++p) {
        REQUIRE(out.data.data[p] ==
                Catch::Approx(cv.data.data[p] + alpha * cv_rho.data.data[p])
                    .margin(1e-12));
    }
}

TEST_CASE("zero mixing leaves the first frame untouched") {
    Rng rng(82);
    const auto f1 = FeatureMap<float>::seeded(6, 5, 4, rng);
    const auto fc = FeatureMap<float>::seeded(6, 5, 2, rng);
    SlsaConfig<float> cfg = SlsaConfig<float>::make(
        LocalRegion(3), ProjectionParams<float>::seeded(4, 2, 2, rng));
    cfg.params.alpha = 0.0f;
    const FeatureMap<float> out = slsa_no_shift(f1, fc, cfg);
    REQUIRE(out.data.data == f1.data.data);
}
