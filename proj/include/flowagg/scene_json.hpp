#pragma once

// JSON form of SceneSpec, e.g.
//   {"h": 20, "w": 20,
//    "texture": {"kind": "noise", "seed": 11, "amplitude": 1.0},
//    "flow": {"kind": "constant", "u": 2.0, "v": 1.0},
//    "patches": [{"y": 7, "x": 7, "h": 6, "w": 6, "value": 0.0}]}
// Affine flow uses {"kind": "affine", "u0", "v0", "du_dx", "du_dy",
// "dv_dx", "dv_dy"}.

#include <string>

#include <json.hpp>

#include "flowagg/errors.hpp"
#include "flowagg/harness.hpp"

namespace flowagg {

inline SceneSpec scene_from_json_text(const std::string& text) {
    const nlohmann::json doc = nlohmann::json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw FormatError("flow_harness", "scene file is not a JSON object");
    }
    if (!doc.contains("h") || !doc.contains("w")) {
        throw FormatError("flow_harness", "scene file lacks h/w");
    }
    SceneSpec spec;
    spec.h = doc["h"].get<std::int64_t>();
    spec.w = doc["w"].get<std::int64_t>();

    if (doc.contains("texture")) {
        const nlohmann::json& t = doc["texture"];
        const std::string kind = t.value("kind", std::string("noise"));
        if (kind == "checker") {
            spec.texture.kind = TextureSpec::Kind::checker;
        } else if (kind == "noise") {
            spec.texture.kind = TextureSpec::Kind::noise;
        } else if (kind == "gradient") {
            spec.texture.kind = TextureSpec::Kind::gradient;
        } else {
            throw FormatError("flow_harness", "unknown texture kind: " + kind);
        }
        spec.texture.period = t.value("period", std::int64_t{4});
        spec.texture.seed = t.value("seed", std::uint64_t{0});
        spec.texture.amplitude = t.value("amplitude", 1.0);
    }

    if (doc.contains("flow")) {
        const nlohmann::json& f = doc["flow"];
        const std::string kind = f.value("kind", std::string("constant"));
        if (kind == "constant") {
            spec.flow.kind = FlowSpec::Kind::constant;
            spec.flow.u = f.value("u", 0.0);
            spec.flow.v = f.value("v", 0.0);
        } else if (kind == "affine") {
            spec.flow.kind = FlowSpec::Kind::affine;
            spec.flow.u = f.value("u0", 0.0);
            spec.flow.v = f.value("v0", 0.0);
            spec.flow.du_dx = f.value("du_dx", 0.0);
            spec.flow.du_dy = f.value("du_dy", 0.0);
            spec.flow.dv_dx = f.value("dv_dx", 0.0);
            spec.flow.dv_dy = f.value("dv_dy", 0.0);
        } else {
            throw FormatError("flow_harness", "unknown flow kind: " + kind);
        }
    }

    if (doc.contains("patches")) {
        for (const nlohmann::json& p : doc["patches"]) {
            TexturelessPatch patch;
            patch.y = p.value("y", std::int64_t{0});
            patch.x = p.value("x", std::int64_t{0});
            patch.h = p.value("h", std::int64_t{0});
            patch.w = p.value("w", std::int64_t{0});
            patch.value = p.value("value", 0.0);
            spec.patches.push_back(patch);
        }
    }

    spec.validate();
    return spec;
}

inline std::string scene_to_json_text(const SceneSpec& spec) {
    nlohmann::json doc;
    doc["h"] = spec.h;
    doc["w"] = spec.w;
    nlohmann::json t;
    switch (spec.texture.kind) {
        case TextureSpec::Kind::checker:
            t["kind"] = "checker";
            t["period"] = spec.texture.period;
            break;
        case TextureSpec::Kind::noise:
            t["kind"] = "noise";
            t["seed"] = spec.texture.seed;
            t["amplitude"] = spec.texture.amplitude;
            break;
        case TextureSpec::Kind::gradient:
            t["kind"] = "gradient";
            break;
    }
    doc["texture"] = t;
    nlohmann::json f;
    if (spec.flow.kind == FlowSpec::Kind::constant) {
        f["kind"] = "constant";
        f["u"] = spec.flow.u;
        f["v"] = spec.flow.v;
    } else {
        f["kind"] = "affine";
        f["u0"] = spec.flow.u;
        f["v0"] = spec.flow.v;
        f["du_dx"] = spec.flow.du_dx;
        f["du_dy"] = spec.flow.du_dy;
        f["dv_dx"] = spec.flow.dv_dx;
        f["dv_dy"] = spec.flow.dv_dy;
    }
    doc["flow"] = f;
    doc["patches"] = nlohmann::json::array();
    for (const TexturelessPatch& p : spec.patches) {
        doc["patches"].push_back({{"y", p.y},
                                  {"x", p.x},
                                  {"h", p.h},
                                  {"w", p.w},
                                  {"value", p.value}});
    }
    return doc.dump(2) + "\n";
}

}  // namespace flowagg
