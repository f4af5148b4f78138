#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "flowagg/container_io.hpp"
#include "flowagg/flow_io.hpp"
#include "oracles.hpp"

using namespace flowagg;

namespace {

FlowField random_flow(std::int64_t h, std::int64_t w, Rng& rng,
                      bool with_masked) {
    FlowField f = FlowField::make(h, w);
    for (std::int64_t i = 0; i < h; ++i) {
        for (std::int64_t j = 0; j < w; ++j) {
            f.u(i, j) = static_cast<float>(rng.uniform(-30.0, 30.0));
            f.v(i, j) = static_cast<float>(rng.uniform(-30.0, 30.0));
            if (with_masked && rng.next_unit() < 0.25) f.set_valid(i, j, false);
        }
    }
    return f;
}

}  // namespace

TEST_CASE("a one-pixel flow file encodes to the hand-checked byte layout") {
    FlowField f = FlowField::make(1, 1);
    f.u(0, 0) = 1.0f;
    f.v(0, 0) = -2.0f;
    const std::vector<std::uint8_t> bytes = write_flo(f);
    const std::vector<std::uint8_t> want = {
        0x50, 0x49, 0x45, 0x48,              // magic "PIEH"
        0x01, 0x00, 0x00, 0x00,              // width 1, little endian
        0x01, 0x00, 0x00, 0x00,              // height 1
        0x00, 0x00, 0x80, 0x3F,              // 1.0f
        0x00, 0x00, 0x00, 0xC0,              // -2.0f
    };
    REQUIRE(bytes == want);

    const FlowField back = read_flo(bytes);
    REQUIRE(back.h == 1);
    REQUIRE(back.w == 1);
    REQUIRE(back.u(0, 0) == 1.0f);
    REQUIRE(back.v(0, 0) == -2.0f);
    REQUIRE(back.is_valid(0, 0));
}

TEST_CASE("an all-zero flow is a header plus zero payload") {
    const FlowField f = FlowField::make(2, 2);
    const std::vector<std::uint8_t> bytes = write_flo(f);
    REQUIRE(bytes.size() == 12 + 2 * 2 * 2 * 4);
    REQUIRE(bytes[0] == 'P');
    REQUIRE(bytes[4] == 2);
    REQUIRE(bytes[8] == 2);
    for (std::size_t i = 12; i < bytes.size(); ++i) REQUIRE(bytes[i] == 0);
}

TEST_CASE("write then read then write is byte-identical including masked pixels") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Rng rng(seed);
        const std::int64_t h = 1 + static_cast<std::int64_t>(rng.next_u64() % 8);
        const std::int64_t w = 1 + static_cast<std::int64_t>(rng.next_u64() % 8);
        const FlowField f = random_flow(h, w, rng, seed % 2 == 0);

        const std::vector<std::uint8_t> first = write_flo(f);
        const FlowField back = read_flo(first);
        const std::vector<std::uint8_t> second = write_flo(back);
        REQUIRE(first == second);

        for (std::int64_t i = 0; i < h; ++i) {
            for (std::int64_t j = 0; j < w; ++j) {
                REQUIRE(back.is_valid(i, j) == f.is_valid(i, j));
                if (f.is_valid(i, j)) {
                    REQUIRE(back.u(i, j) == f.u(i, j));
                    REQUIRE(back.v(i, j) == f.v(i, j));
                }
            }
        }
    }
}

TEST_CASE("unknown-flow detection uses the magnitude threshold and nan") {
    REQUIRE(!detail::flow_pixel_unknown(1e9f, 0.0f));        // at the threshold: known
    REQUIRE(detail::flow_pixel_unknown(2e9f, 0.0f));
    REQUIRE(detail::flow_pixel_unknown(0.0f, -2e9f));
    REQUIRE(detail::flow_pixel_unknown(std::numeric_limits<float>::quiet_NaN(), 0.0f));
    REQUIRE(!detail::flow_pixel_unknown(-1e8f, 1e8f));
}

TEST_CASE("reading marks unknown-valued pixels invalid and keeps their bits") {
    FlowField f = FlowField::make(1, 2);
    f.u(0, 0) = 3.0f;
    f.v(0, 0) = 4.0f;
    f.u(0, 1) = kUnknownFlowSentinel;  // already unknown-looking, stays verbatim
    f.v(0, 1) = 7.0f;
    f.set_valid(0, 1, false);

    const std::vector<std::uint8_t> bytes = write_flo(f);
    const FlowField back = read_flo(bytes);
    REQUIRE(back.is_valid(0, 0));
    REQUIRE(!back.is_valid(0, 1));
    REQUIRE(back.u(0, 1) == kUnknownFlowSentinel);

    // a masked pixel whose stored value still looks ordinary is replaced by
    // the sentinel so the mask survives the round trip
    FlowField g = FlowField::make(1, 1);
    g.u(0, 0) = 1.5f;
    g.v(0, 0) = 2.5f;
    g.set_valid(0, 0, false);
    const FlowField gback = read_flo(write_flo(g));
    REQUIRE(!gback.is_valid(0, 0));
    REQUIRE(gback.u(0, 0) == kUnknownFlowSentinel);
}

TEST_CASE("flow files with a bad magic or truncated payload are rejected") {
    FlowField f = FlowField::make(2, 3);
    std::vector<std::uint8_t> bytes = write_flo(f);

    std::vector<std::uint8_t> bad_magic = bytes;
    bad_magic[3] = 'X';  // "PIEX"
    REQUIRE_THROWS_AS(read_flo(bad_magic), FormatError);

    std::vector<std::uint8_t> truncated(bytes.begin(), bytes.end() - 4);
    REQUIRE_THROWS_AS(read_flo(truncated), FormatError);

    std::vector<std::uint8_t> tiny(bytes.begin(), bytes.begin() + 8);
    REQUIRE_THROWS_AS(read_flo(tiny), FormatError);

    std::vector<std::uint8_t> zero_dim = bytes;
    zero_dim[4] = 0;
    REQUIRE_THROWS_AS(read_flo(zero_dim), FormatError);
}

TEST_CASE("the color wheel has the expected bin structure") {
    const auto& wheel = flow_color_wheel();
    REQUIRE(wheel.size() == 55);
    REQUIRE(wheel[0][0] == 255);  // first bin is pure red
    REQUIRE(wheel[0][1] == 0);
    REQUIRE(wheel[0][2] == 0);
    for (const auto& rgb : wheel) {
        for (int ch = 0; ch < 3; ++ch) {
            REQUIRE(rgb[ch] >= 0);
            REQUIRE(rgb[ch] <= 255);
        }
    }
}

TEST_CASE("flow colors hit the frozen goldens") {
    FlowField f = FlowField::make(1, 3);
    f.u(0, 0) = 10.0f;   // saturated rightward motion
    f.v(0, 0) = 0.0f;
    f.u(0, 1) = 0.0f;    // no motion: white
    f.v(0, 1) = 0.0f;
    f.u(0, 2) = 1.0f;    // invalid: black
    f.v(0, 2) = 1.0f;
    f.set_valid(0, 2, false);

    const RgbImage img = flow_to_color(f);
    REQUIRE(img.rgb[0] == 255);
    REQUIRE(img.rgb[1] == 0);
    REQUIRE(img.rgb[2] == 0);
    REQUIRE(img.rgb[3] == 255);
    REQUIRE(img.rgb[4] == 255);
    REQUIRE(img.rgb[5] == 255);
    REQUIRE(img.rgb[6] == 0);
    REQUIRE(img.rgb[7] == 0);
    REQUIRE(img.rgb[8] == 0);
}

TEST_CASE("color rendering is deterministic and honors a fixed normalization") {
    Rng rng(7);
    const FlowField f = random_flow(6, 5, rng, true);
    const RgbImage a = flow_to_color(f);
    const RgbImage b = flow_to_color(f);
    REQUIRE(a.rgb == b.rgb);

    // under a much larger normalization radius every valid pixel desaturates
    const RgbImage soft = flow_to_color(f, 1000.0);
    for (std::int64_t i = 0; i < 6; ++i) {
        for (std::int64_t j = 0; j < 5; ++j) {
            if (!f.is_valid(i, j)) continue;
            const std::size_t p = static_cast<std::size_t>((i * 5 + j) * 3);
            REQUIRE(soft.rgb[p + 0] >= 240);
            REQUIRE(soft.rgb[p + 1] >= 240);
            REQUIRE(soft.rgb[p + 2] >= 240);
        }
    }
}

TEST_CASE("ppm output carries the standard header and raw pixels") {
    RgbImage img = RgbImage::make(2, 3);
    for (std::size_t i = 0; i < img.rgb.size(); ++i) {
        img.rgb[i] = static_cast<std::uint8_t>(i * 10);
    }
    const std::vector<std::uint8_t> bytes = write_ppm(img);
    const std::string header(bytes.begin(), bytes.begin() + 11);
    REQUIRE(header == "P6\n3 2\n255\n");
    REQUIRE(bytes.size() == 11 + 18);
    for (std::size_t i = 0; i < 18; ++i) {
        REQUIRE(bytes[11 + i] == img.rgb[i]);
    }
}

TEST_CASE("tensor containers round-trip shapes, names, seed, and payload") {
    TensorContainer box;
    box.seed = 1234;
    NamedTensor t1;
    t1.name = "alpha";
    t1.shape = Shape{2, 3};
    t1.values = {1.0f, 2.0f, 3.0f, 4.0f, 5.0f, 6.0f};
    NamedTensor t2;
    t2.name = "beta";
    t2.shape = Shape{4};
    t2.values = {-1.0f, 0.25f, 1e-7f, 3e8f};
    box.tensors = {t1, t2};

    const std::vector<std::uint8_t> bytes = write_container(box);
    const TensorContainer back = read_container(bytes);
    REQUIRE(back.seed == 1234);
    REQUIRE(back.tensors.size() == 2);
    REQUIRE(back.tensors[0].name == "alpha");
    REQUIRE(back.tensors[0].shape == Shape{2, 3});
    REQUIRE(back.tensors[0].values == t1.values);
    REQUIRE(back.tensors[1].values == t2.values);
    REQUIRE(back.find("beta") != nullptr);
    REQUIRE(back.find("gamma") == nullptr);

    // byte-stable: encode(decode(x)) == x
    REQUIRE(write_container(back) == bytes);
}

TEST_CASE("containers reject truncation and payload size mismatches") {
    TensorContainer box;
    NamedTensor t;
    t.name = "x";
    t.shape = Shape{2};
    t.values = {1.0f, 2.0f};
    box.tensors = {t};
    std::vector<std::uint8_t> bytes = write_container(box);

    std::vector<std::uint8_t> cut(bytes.begin(), bytes.end() - 3);
    REQUIRE_THROWS_AS(read_container(cut), FormatError);

    std::vector<std::uint8_t> extra = bytes;
    extra.push_back(0);
    REQUIRE_THROWS_AS(read_container(extra), FormatError);

    std::vector<std::uint8_t> tiny = {1, 2};
    REQUIRE_THROWS_AS(read_container(tiny), FormatError);

    NamedTensor bad = t;
    bad.values.pop_back();
    TensorContainer mismatched;
    mismatched.tensors = {bad};
    REQUIRE_THROWS_AS(write_container(mismatched), SizeError);
}

TEST_CASE("projection parameters survive the container round trip") {
    Rng rng(55);
    const auto p = ProjectionParams<double>::seeded(6, 4, 3, rng, true);
    TensorContainer box;
    box.seed = 9;
    store_projection_params(box, p, "lsa.");
    const TensorContainer decoded = read_container(write_container(box));
    const auto back = load_projection_params<double>(decoded, "lsa.");

    REQUIRE(back.w_theta.shape == p.w_theta.shape);
    REQUIRE(back.w_rho.shape == p.w_rho.shape);
    REQUIRE(back.b_theta.size() == p.b_theta.size());
    REQUIRE(refimpl::max_abs_diff(back.w_theta.data, p.w_theta.data) < 1e-6);
    REQUIRE(refimpl::max_abs_diff(back.w_rho.data, p.w_rho.data) < 1e-6);
    REQUIRE(back.alpha == Catch::Approx(p.alpha).margin(1e-6));

    // a prefixed lookup falls back to unprefixed names
    TensorContainer plain;
    store_projection_params(plain, p);
    const auto fallback = load_projection_params<double>(
        read_container(write_container(plain)), "slsa.");
    REQUIRE(fallback.w_theta.shape == p.w_theta.shape);
    REQUIRE(fallback.alpha == Catch::Approx(p.alpha).margin(1e-6));

    // but a wrong prefix with no unprefixed twin is an error
    REQUIRE_THROWS_AS(load_projection_params<double>(decoded, "slsa."),
                      FormatError);

    TensorContainer empty;
    REQUIRE_THROWS_AS(load_projection_params<double>(empty, ""), FormatError);
}
