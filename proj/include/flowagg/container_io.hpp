#pragma once

// Flat binary container for named float tensors: a 4-byte little-endian
// header length, a JSON header listing tensor names/shapes plus the seed the
// values were drawn from, then each tensor's values as raw little-endian
// 32-bit floats in header order. Used for parameter files and volume dumps.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowagg/errors.hpp"
#include "flowagg/flow_io.hpp"
#include "flowagg/local_attention.hpp"
#include "flowagg/tensor.hpp"

namespace flowagg {

struct NamedTensor {
    std::string name;
    Shape shape;
    std::vector<float> values;
};

struct TensorContainer {
    std::uint64_t seed = 0;
    std::vector<NamedTensor> tensors;

    const NamedTensor* find(const std::string& name) const {
        for (const NamedTensor& t : tensors) {
            if (t.name == name) return &t;
        }
        return nullptr;
    }
};

inline std::vector<std::uint8_t> write_container(const TensorContainer& c) {
    nlohmann::json header;
    header["version"] = 1;
    header["seed"] = c.seed;
    header["tensors"] = nlohmann::json::array();
    std::size_t payload = 0;
    for (const NamedTensor& t : c.tensors) {
        const std::uint64_t count = t.shape.checked_elem_count();
        if (count != t.values.size()) {
            throw SizeError("io_formats", "container tensor " + t.name +
                                              " holds " +
                                              std::to_string(t.values.size()) +
                                              " values, shape implies " +
                                              std::to_string(count));
        }
        header["tensors"].push_back(
            {{"name", t.name}, {"shape", t.shape.dims}});
        payload += t.values.size() * 4;
    }
    const std::string text = header.dump();
    if (text.size() > 0xFFFFFFFFull) {
        throw SizeError("io_formats", "container header too large");
    }

    std::vector<std::uint8_t> out;
    out.reserve(4 + text.size() + payload);
    detail::put_u32le(out, static_cast<std::uint32_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    for (const NamedTensor& t : c.tensors) {
        for (float v : t.values) {
            detail::put_u32le(out, std::bit_cast<std::uint32_t>(v));
        }
    }
    return out;
}

inline TensorContainer read_container(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 4) {
        throw FormatError("io_formats", "container shorter than its length field");
    }
    const std::uint32_t header_len = detail::get_u32le(bytes, 0);
    if (bytes.size() < 4ull + header_len) {
        throw FormatError("io_formats", "container header truncated");
    }
    const std::string text(bytes.begin() + 4, bytes.begin() + 4 + header_len);
    nlohmann::json header = nlohmann::json::parse(text, nullptr, false);
    if (header.is_discarded() || !header.is_object() ||
        !header.contains("tensors") || !header["tensors"].is_array()) {
        throw FormatError("io_formats", "container header is not a valid listing");
    }

    TensorContainer c;
    c.seed = header.value("seed", std::uint64_t{0});
    std::size_t off = 4 + header_len;
    for (const nlohmann::json& entry : header["tensors"]) {
        if (!entry.contains("name") || !entry.contains("shape")) {
            throw FormatError("io_formats", "container tensor entry lacks name/shape");
        }
        NamedTensor t;
        t.name = entry["name"].get<std::string>();
        t.shape.dims = entry["shape"].get<std::vector<std::int64_t>>();
        const std::uint64_t count = t.shape.checked_elem_count();
        if (off + count * 4 > bytes.size()) {
            throw FormatError("io_formats",
                              "container payload truncated at tensor " + t.name);
        }
        t.values.resize(count);
        for (std::uint64_t i = 0; i < count; ++i) {
            t.values[i] =
                std::bit_cast<float>(detail::get_u32le(bytes, off + i * 4));
        }
        off += count * 4;
        c.tensors.push_back(std::move(t));
    }
    if (off != bytes.size()) {
        throw FormatError("io_formats",
                          "container has " + std::to_string(bytes.size() - off) +
                              " trailing bytes");
    }
    return c;
}

// Projection parameters <-> container. Tensors are stored under
// <prefix>w_theta, <prefix>w_phi, <prefix>w_rho, optional <prefix>b_* and a
// one-element <prefix>alpha.
template <typename T>
void store_projection_params(TensorContainer& c, const ProjectionParams<T>& p,
                             const std::string& prefix = "") {
    auto put = [&](const std::string& name, const Shape& shape,
                   const auto& data) {
        NamedTensor t;
        t.name = prefix + name;
        t.shape = shape;
        t.values.reserve(data.size());
        for (const auto v : data) t.values.push_back(static_cast<float>(v));
        c.tensors.push_back(std::move(t));
    };
    put("w_theta", p.w_theta.shape, p.w_theta.data);
    put("w_phi", p.w_phi.shape, p.w_phi.data);
    put("w_rho", p.w_rho.shape, p.w_rho.data);
    if (!p.b_theta.empty()) put("b_theta", Shape{static_cast<std::int64_t>(p.b_theta.size())}, p.b_theta);
    if (!p.b_phi.empty()) put("b_phi", Shape{static_cast<std::int64_t>(p.b_phi.size())}, p.b_phi);
    if (!p.b_rho.empty()) put("b_rho", Shape{static_cast<std::int64_t>(p.b_rho.size())}, p.b_rho);
    put("alpha", Shape{1}, std::vector<T>{p.alpha});
}

// Loads <prefix>-named tensors, falling back to unprefixed names so one file
// can serve several operator instances.
template <typename T>
ProjectionParams<T> load_projection_params(const TensorContainer& c,
                                           const std::string& prefix = "") {
    auto get = [&](const std::string& name, bool required) -> const NamedTensor* {
        const NamedTensor* t = c.find(prefix + name);
        if (!t && !prefix.empty()) t = c.find(name);
        if (!t && required) {
            throw FormatError("io_formats",
                              "parameter file lacks tensor " + prefix + name);
        }
        return t;
    };
    auto to_tensor = [](const NamedTensor& t) {
        DenseTensor<T> out = zeros<T>(t.shape);
        for (std::size_t i = 0; i < t.values.size(); ++i) {
            out.data[i] = static_cast<T>(t.values[i]);
        }
        return out;
    };

    ProjectionParams<T> p;
    p.w_theta = to_tensor(*get("w_theta", true));
    p.w_phi = to_tensor(*get("w_phi", true));
    p.w_rho = to_tensor(*get("w_rho", true));
    if (p.w_theta.shape.rank() != 2 || p.w_phi.shape.rank() != 2 ||
        p.w_rho.shape.rank() != 2) {
        throw FormatError("io_formats", "projection tensors must be rank 2");
    }
    if (const NamedTensor* t = get("b_theta", false)) {
        p.b_theta.assign(t->values.begin(), t->values.end());
    }
    if (const NamedTensor* t = get("b_phi", false)) {
        p.b_phi.assign(t->values.begin(), t->values.end());
    }
    if (const NamedTensor* t = get("b_rho", false)) {
        p.b_rho.assign(t->values.begin(), t->values.end());
    }
    const NamedTensor* a = get("alpha", true);
    if (a->values.size() != 1) {
        throw FormatError("io_formats", "alpha tensor must hold one value");
    }
    p.alpha = static_cast<T>(a->values[0]);
    return p;
}

}  // namespace flowagg
