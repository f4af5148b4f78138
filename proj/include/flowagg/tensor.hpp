#pragma once

// Minimal dense-tensor foundation: shapes, contiguous strided storage,
// element access, reductions, and seeded random fill. Layout is row-major
// with the last dimension fastest, so per-pixel channel vectors are
// contiguous.

#include <array>
#include <cstdint>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <span>
#include <thread>
#include <type_traits>
#include <vector>

#include "flowagg/errors.hpp"

namespace flowagg {

// ---------------------------------------------------------------------------
// Shape

struct Shape {
    std::vector<std::int64_t> dims;

    Shape() = default;
    Shape(std::initializer_list<std::int64_t> d) : dims(d) {}
    explicit Shape(std::vector<std::int64_t> d) : dims(std::move(d)) {}

    std::size_t rank() const noexcept { return dims.size(); }

    // Validates rank (1-4), positivity, and that the element count fits in
    // an unsigned 64-bit integer. Returns the element count.
    std::uint64_t checked_elem_count() const {
        if (dims.empty() || dims.size() > 4) {
            throw ShapeError("tensor_core",
                             "shape rank must be between 1 and 4, got " +
                                 std::to_string(dims.size()));
        }
        std::uint64_t count = 1;
        for (std::int64_t d : dims) {
            if (d < 1) {
                throw ShapeError("tensor_core", "shape dims must be >= 1, got " +
                                                    std::to_string(d));
            }
            const auto ud = static_cast<std::uint64_t>(d);
            if (count > std::numeric_limits<std::uint64_t>::max() / ud) {
                throw SizeError("tensor_core",
                                "shape element count overflows 64-bit unsigned");
            }
            count *= ud;
        }
        return count;
    }

    std::uint64_t elem_count() const { return checked_elem_count(); }

    bool operator==(const Shape& other) const { return dims == other.dims; }
};

// Row-major (last dim fastest) linearization of a multi-index.
inline std::uint64_t linearize(const Shape& shape,
                               std::span<const std::int64_t> index) {
    if (index.size() != shape.rank()) {
        throw ShapeError("tensor_core", "multi-index rank mismatch");
    }
    std::uint64_t lin = 0;
    for (std::size_t a = 0; a < index.size(); ++a) {
        if (index[a] < 0 || index[a] >= shape.dims[a]) {
            throw RangeError("tensor_core", "multi-index out of range");
        }
        lin = lin * static_cast<std::uint64_t>(shape.dims[a]) +
              static_cast<std::uint64_t>(index[a]);
    }
    return lin;
}

inline std::vector<std::int64_t> delinearize(const Shape& shape,
                                             std::uint64_t lin) {
    std::vector<std::int64_t> index(shape.rank());
    for (std::size_t a = shape.rank(); a-- > 0;) {
        const auto d = static_cast<std::uint64_t>(shape.dims[a]);
        index[a] = static_cast<std::int64_t>(lin % d);
        lin /= d;
    }
    return index;
}

// ---------------------------------------------------------------------------
// Rng: splitmix64. Counter-based, platform-independent: identical seeds give
// bitwise-identical sequences everywhere. Unit doubles take the top 53 bits.

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_unit();
    }

    std::uint64_t state() const noexcept { return state_; }

private:
    std::uint64_t state_;
};

// splitmix64 finalizer, used for stateless coordinate hashing.
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Stateless hash of a seed plus three signed coordinates. Used by the
// synthetic texture generator to evaluate noise at any integer coordinate,
// in or out of frame, reproducibly.
inline std::uint64_t hash3(std::uint64_t seed, std::int64_t a, std::int64_t b,
                           std::int64_t c) {
    std::uint64_t h = seed + 0x9E3779B97F4A7C15ull;
    h = mix64(h ^ (static_cast<std::uint64_t>(a) * 0xD1B54A32D192ED03ull));
    h = mix64(h ^ (static_cast<std::uint64_t>(b) * 0x8CB92BA72F3D8DD7ull));
    h = mix64(h ^ (static_cast<std::uint64_t>(c) * 0x94D049BB133111EBull));
    return h;
}

inline double hash3_unit(std::uint64_t seed, std::int64_t a, std::int64_t b,
                         std::int64_t c) {
    return static_cast<double>(hash3(seed, a, b, c) >> 11) * 0x1.0p-53;
}

// ---------------------------------------------------------------------------
// DenseTensor

template <typename T>
struct DenseTensor {
    static_assert(std::is_floating_point_v<T>,
                  "DenseTensor holds float or double");

    Shape shape;
    std::vector<T> data;

    std::uint64_t size() const { return data.size(); }

    T& operator[](std::uint64_t i) { return data[i]; }
    const T& operator[](std::uint64_t i) const { return data[i]; }

    T& at(std::span<const std::int64_t> index) {
        return data[linearize(shape, index)];
    }
    const T& at(std::span<const std::int64_t> index) const {
        return data[linearize(shape, index)];
    }
    T& at(std::initializer_list<std::int64_t> index) {
        return data[linearize(shape, std::span<const std::int64_t>(
                                         index.begin(), index.size()))];
    }
    const T& at(std::initializer_list<std::int64_t> index) const {
        return data[linearize(shape, std::span<const std::int64_t>(
                                         index.begin(), index.size()))];
    }

    bool all_finite() const {
        for (T v : data) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }
};

template <typename T>
DenseTensor<T> zeros(Shape shape) {
    const std::uint64_t n = shape.checked_elem_count();
    return DenseTensor<T>{std::move(shape), std::vector<T>(n, T(0))};
}

template <typename T>
DenseTensor<T> full(Shape shape, T value) {
    const std::uint64_t n = shape.checked_elem_count();
    return DenseTensor<T>{std::move(shape), std::vector<T>(n, value)};
}

// Reproducible for a given Rng state: fill order is linear index order.
template <typename T>
DenseTensor<T> uniform(Shape shape, Rng& rng, double lo, double hi) {
    const std::uint64_t n = shape.checked_elem_count();
    DenseTensor<T> t{std::move(shape), std::vector<T>(n)};
    for (auto& v : t.data) v = static_cast<T>(rng.uniform(lo, hi));
    return t;
}

// ---------------------------------------------------------------------------
// Reductions

// Dot product accumulated in double precision regardless of T, so the
// feature-space and cost-volume routes agree to tight tolerances.
template <typename T>
T dot(std::span<const T> a, std::span<const T> b) {
    if (a.size() != b.size()) {
        throw ShapeError("tensor_core",
                         "dot: length mismatch (" + std::to_string(a.size()) +
                             " vs " + std::to_string(b.size()) + ")");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    }
    return static_cast<T>(acc);
}

// ---------------------------------------------------------------------------
// parallel_for: splits [0, n) into contiguous chunks, one per thread.
// Work items must write disjoint outputs; results are then bit-identical
// for any thread count.

template <typename Fn>
void parallel_for(std::int64_t n, int threads, Fn&& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const int workers = static_cast<int>(
        std::min<std::int64_t>(threads, n));
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::exception_ptr first_error;
    std::mutex error_mutex;
    const std::int64_t chunk = (n + workers - 1) / workers;
    for (int t = 0; t < workers; ++t) {
        const std::int64_t lo = t * chunk;
        const std::int64_t hi = std::min<std::int64_t>(lo + chunk, n);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn, &first_error, &error_mutex] {
            try {
                for (std::int64_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                const std::lock_guard<std::mutex> guard(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace flowagg
