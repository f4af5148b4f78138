#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "flowagg/bench.hpp"

using namespace flowagg;

TEST_CASE("timer granularity is positive") {
    REQUIRE(timer_granularity_ns() > 0);
}

TEST_CASE("one size produces four records with analytic allocations") {
    std::ostringstream warn;
    const std::vector<BenchRecord> recs =
        bench_compare<float>({8}, 3, 5, 8, 4, 1, &warn);
    REQUIRE(recs.size() == 4);

    for (const BenchRecord& r : recs) {
        REQUIRE(r.h == 8);
        REQUIRE(r.w == 8);
        REQUIRE(r.c == 8);
        REQUIRE(r.k == 3);
        REQUIRE(r.reps >= 5);
        REQUIRE(r.wall_time_ns_median > 0);
    }
    REQUIRE(recs[0].path == "fast");
    REQUIRE(recs[0].op == "lsa");
    REQUIRE(recs[1].path == "oracle");
    REQUIRE(recs[1].op == "lsa");
    REQUIRE(recs[2].path == "fast");
    REQUIRE(recs[2].op == "slsa");
    REQUIRE(recs[3].path == "oracle");
    REQUIRE(recs[3].op == "slsa");

    // fast holds one extra feature map, the oracle a full volume
    const std::uint64_t fast_bytes = sizeof(float) * 8ull * 8 * 8;
    const std::uint64_t oracle_bytes = sizeof(float) * 8ull * 8 * 8 * 8;
    for (const BenchRecord& r : recs) {
        REQUIRE(r.peak_extra_bytes ==
                (r.path == "fast" ? fast_bytes : oracle_bytes));
    }
    // the allocation ratio is the frame area over the channel count
    REQUIRE(oracle_bytes / fast_bytes == (8 * 8) / 8);
}

TEST_CASE("benchmark preconditions are enforced") {
    REQUIRE_THROWS_AS(bench_compare<float>({8}, 3, 4), RangeError);
    REQUIRE_THROWS_AS(bench_compare<float>({}, 3, 5), ContractError);
    REQUIRE_THROWS_AS(bench_compare<float>({8, 8}, 3, 5), ContractError);
    REQUIRE_THROWS_AS(bench_compare<float>({16, 8}, 3, 5), ContractError);
}

TEST_CASE("bench csv has the documented schema") {
    std::ostringstream warn;
    const std::vector<BenchRecord> recs =
        bench_compare<float>({6}, 3, 5, 4, 2, 1, &warn);
    const std::string csv = bench_csv(recs);
    std::istringstream lines(csv);
    std::string header;
    std::getline(lines, header);
    REQUIRE(header == "path,op,H,W,C,k,reps,wall_time_ns_median,peak_extra_bytes");
    int rows = 0;
    std::string line;
    while (std::getline(lines, line)) {
        if (line.empty()) continue;
        ++rows;
        REQUIRE(std::count(line.begin(), line.end(), ',') == 8);
    }
    REQUIRE(rows == 4);
}

TEST_CASE("medians come from repeated timed runs") {
    int calls = 0;
    const TimedResult t =
        robust_median_ns([&] { ++calls; }, 5, timer_granularity_ns());
    REQUIRE(t.reps >= 5);
    // one warm-up per round plus the timed repetitions
    REQUIRE(calls >= t.reps + 1);
}
