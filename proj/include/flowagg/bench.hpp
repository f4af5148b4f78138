#pragma once

// Wall-time comparison of the feature-space fast paths against the
// materialized cost-volume oracles. Timings are medians over R repetitions
// on a monotonic clock with one excluded warm-up run; if the median is too
// close to clock granularity the repetition count is raised automatically.
// Extra allocation is reported analytically by complexity class: a fast pass
// owns one H*W*C feature buffer, an oracle pass owns an H^2*W^2 volume, so
// the oracle/fast byte ratio is (H*W)/C exactly.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "flowagg/cost_volume.hpp"
#include "flowagg/errors.hpp"
#include "flowagg/lsa.hpp"
#include "flowagg/slsa.hpp"
#include "flowagg/tensor.hpp"

namespace flowagg {

struct BenchRecord {
    std::string path;  // fast | oracle
    std::string op;    // lsa | slsa
    std::int64_t h = 0, w = 0, c = 0;
    int k = 1;
    int reps = 0;
    std::uint64_t wall_time_ns_median = 0;
    std::uint64_t peak_extra_bytes = 0;
};

inline volatile double bench_sink = 0.0;

inline std::uint64_t timer_granularity_ns() {
    using clock = std::chrono::steady_clock;
    std::uint64_t best = UINT64_MAX;
    clock::time_point prev = clock::now();
    for (int i = 0; i < 20000; ++i) {
        const clock::time_point now = clock::now();
        const auto d =
            std::chrono::duration_cast<std::chrono::nanoseconds>(now - prev)
                .count();
        if (d > 0) {
            best = std::min<std::uint64_t>(best, static_cast<std::uint64_t>(d));
            prev = now;
        }
    }
    return best == UINT64_MAX ? 1 : best;
}

template <typename Fn>
std::uint64_t median_wall_ns(Fn&& fn, int reps) {
    using clock = std::chrono::steady_clock;
    fn();  // warm-up, excluded
    std::vector<std::uint64_t> times(static_cast<std::size_t>(reps));
    for (int r = 0; r < reps; ++r) {
        const clock::time_point t0 = clock::now();
        fn();
        const clock::time_point t1 = clock::now();
        times[static_cast<std::size_t>(r)] = static_cast<std::uint64_t>(
            std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0)
                .count());
    }
    std::sort(times.begin(), times.end());
    return times[times.size() / 2];
}

struct TimedResult {
    std::uint64_t median_ns = 0;
    int reps = 0;
};

// Re-times with more repetitions while the median sits under 100x the clock
// granularity (capped), so sub-resolution results never enter a record.
template <typename Fn>
TimedResult robust_median_ns(Fn&& fn, int reps, std::uint64_t granularity_ns,
                             std::ostream* warn = nullptr) {
    TimedResult res;
    res.reps = reps;
    res.median_ns = median_wall_ns(fn, reps);
    while (res.median_ns < 100 * granularity_ns && res.reps < 200) {
        if (warn) {
            *warn << "bench: median " << res.median_ns
                  << " ns is within 100x clock granularity (" << granularity_ns
                  << " ns); raising repetitions to " << (res.reps * 2 + 1)
                  << "\n";
        }
        res.reps = res.reps * 2 + 1;
        res.median_ns = median_wall_ns(fn, res.reps);
    }
    return res;
}

namespace detail {

template <typename T>
void consume_map(const FeatureMap<T>& m) {
    bench_sink = bench_sink + static_cast<double>(m.data.data.front()) +
                 static_cast<double>(m.data.data.back());
}

template <typename T>
void consume_volume(const CostVolume4D<T>& cv) {
    bench_sink = bench_sink + static_cast<double>(cv.data.data.front()) +
                 static_cast<double>(cv.data.data.back());
}

}  // namespace detail

// Four records per size: {lsa, slsa} x {fast, oracle}. Oracles are timed on
// the full aggregation op (weights, projection, volume passes); fast paths on
// the production feature-space op. sizes must be ascending; the oracle/fast
// time ratio must be non-decreasing from the second size on.
template <typename T>
std::vector<BenchRecord> bench_compare(const std::vector<std::int64_t>& sizes,
                                       int k, int reps, std::int64_t c = 8,
                                       std::int64_t cc = 4, int threads = 1,
                                       std::ostream* warn = &std::cerr,
                                       bool assert_trend = true) {
    if (reps < 5) {
        throw RangeError("bench_cli", "repetitions must be at least 5");
    }
    if (sizes.empty()) {
        throw ContractError("bench_cli", "no sizes given");
    }
    for (std::size_t i = 1; i < sizes.size(); ++i) {
        if (sizes[i] <= sizes[i - 1]) {
            throw ContractError("bench_cli", "sizes must be strictly ascending");
        }
    }

    const std::uint64_t gran = timer_granularity_ns();
    std::vector<BenchRecord> records;
    std::vector<double> lsa_ratio, slsa_ratio;

    for (const std::int64_t s : sizes) {
        Rng rng(0x9E3779B9u + static_cast<std::uint64_t>(s));
        const FeatureMap<T> f1 = FeatureMap<T>::seeded(s, s, c, rng);
        const FeatureMap<T> f2 = FeatureMap<T>::seeded(s, s, c, rng);
        const FeatureMap<T> fc = FeatureMap<T>::seeded(s, s, cc, rng);
        const LsaConfig<T> lcfg{LocalRegion(k),
                                ProjectionParams<T>::seeded(c, cc, cc, rng), true};
        SlsaConfig<T> scfg = SlsaConfig<T>::make(
            LocalRegion(k), ProjectionParams<T>::seeded(c, cc, cc, rng));
        const CostVolume4D<T> cv = build_cost_volume(f1, f2, {}, threads);

        const std::uint64_t fast_bytes = static_cast<std::uint64_t>(sizeof(T)) *
                                         static_cast<std::uint64_t>(s * s) *
                                         static_cast<std::uint64_t>(c);
        const std::uint64_t oracle_bytes =
            static_cast<std::uint64_t>(sizeof(T)) *
            static_cast<std::uint64_t>(s * s) * static_cast<std::uint64_t>(s * s);

        auto record = [&](const char* path, const char* op, TimedResult t,
                          std::uint64_t bytes) {
            BenchRecord r;
            r.path = path;
            r.op = op;
            r.h = s;
            r.w = s;
            r.c = c;
            r.k = k;
            r.reps = t.reps;
            r.wall_time_ns_median = t.median_ns;
            r.peak_extra_bytes = bytes;
            records.push_back(std::move(r));
            return static_cast<double>(t.median_ns);
        };

        const double lsa_fast = record(
            "fast", "lsa",
            robust_median_ns(
                [&] {
                    detail::consume_map(
                        lsa_aggregate_features(f2, fc, lcfg, threads));
                },
                reps, gran, warn),
            fast_bytes);
        const double lsa_oracle = record(
            "oracle", "lsa",
            robust_median_ns(
                [&] {
                    detail::consume_volume(lsa_aggregate_costvol_oracle(
                        cv, f1, f2, fc, lcfg, threads));
                },
                reps, gran, warn),
            oracle_bytes);
        const double slsa_fast = record(
            "fast", "slsa",
            robust_median_ns(
                [&] {
                    slsa_offset_pass(f1, fc, scfg, threads,
                                     [](int, ShiftOffset,
                                        const FeatureMap<T>& buf) {
                                         detail::consume_map(buf);
                                     });
                },
                reps, gran, warn),
            fast_bytes);
        const double slsa_oracle = record(
            "oracle", "slsa",
            robust_median_ns(
                [&] {
                    detail::consume_volume(slsa_costvol_oracle(
                        cv, f1, f2, fc, scfg, true, threads));
                },
                reps, gran, warn),
            oracle_bytes);

        lsa_ratio.push_back(lsa_oracle / lsa_fast);
        slsa_ratio.push_back(slsa_oracle / slsa_fast);
    }

    if (assert_trend && sizes.size() >= 3) {
        for (std::size_t i = 2; i < sizes.size(); ++i) {
            if (lsa_ratio[i] < lsa_ratio[i - 1] ||
                slsa_ratio[i] < slsa_ratio[i - 1]) {
                throw ContractError(
                    "bench_cli",
                    "oracle/fast time ratio decreased between sizes " +
                        std::to_string(sizes[i - 1]) + " and " +
                        std::to_string(sizes[i]));
            }
        }
    }
    return records;
}

inline std::string bench_csv(const std::vector<BenchRecord>& records) {
    std::string out = "path,op,H,W,C,k,reps,wall_time_ns_median,peak_extra_bytes\n";
    for (const BenchRecord& r : records) {
        out += r.path;
        out += ',';
        out += r.op;
        out += ',';
        out += std::to_string(r.h);
        out += ',';
        out += std::to_string(r.w);
        out += ',';
        out += std::to_string(r.c);
        out += ',';
        out += std::to_string(r.k);
        out += ',';
        out += std::to_string(r.reps);
        out += ',';
        out += std::to_string(r.wall_time_ns_median);
        out += ',';
        out += std::to_string(r.peak_extra_bytes);
        out += '\n';
    }
    return out;
}

}  // namespace flowagg
