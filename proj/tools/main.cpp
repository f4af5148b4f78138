// flowagg CLI: cost-volume dumps, aggregation oracle checks, synthetic-flow
// evaluation sweeps, microbenchmarks, and .flo -> PPM rendering.
//
// Exit codes: 0 success, 1 contract violation (message names the component),
// 2 usage error.

#include <cmath>
#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "flowagg/flowagg.hpp"

namespace {

using namespace flowagg;

std::vector<Pipeline> parse_pipelines(const std::string& csv) {
    std::vector<Pipeline> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(pipeline_from_name(item));
    }
    if (out.empty()) {
        throw ContractError("flow_harness", "no pipelines selected");
    }
    return out;
}

struct CostvolArgs {
    std::int64_t h = 8, w = 8, c = 8;
    std::uint64_t seed = 1;
    double scale = 1.0;
    std::string out;
};

int run_costvol(const CostvolArgs& a) {
    Rng rng(a.seed);
    const FeatureMap<double> f1 = FeatureMap<double>::seeded(a.h, a.w, a.c, rng);
    const FeatureMap<double> f2 = FeatureMap<double>::seeded(a.h, a.w, a.c, rng);
    std::optional<double> scale;
    if (a.scale != 1.0) scale = a.scale;
    const CostVolume4D<double> cv = build_cost_volume(f1, f2, scale);

    TensorContainer box;
    box.seed = a.seed;
    auto push = [&box](const std::string& name, Shape shape,
                       const double* data, std::size_t n) {
        NamedTensor t;
        t.name = name;
        t.shape = shape;
        t.values.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            t.values[i] = static_cast<float>(data[i]);
        }
        box.tensors.push_back(std::move(t));
    };
    push("f1", Shape{a.h, a.w, a.c}, f1.data.data.data(), f1.data.data.size());
    push("f2", Shape{a.h, a.w, a.c}, f2.data.data.data(), f2.data.data.size());
    push("cost", Shape{a.h, a.w, a.h, a.w}, cv.data.data.data(),
         cv.data.data.size());
    const double applied = cv.scale_applied.value_or(1.0);
    push("scale_applied", Shape{1}, &applied, 1);

    write_file_bytes(a.out, write_container(box));
    std::cout << "wrote " << a.out << " (" << a.h << "x" << a.w << "x" << a.c
              << ", scale_applied " << applied << ")\n";
    return 0;
}

struct AggregateArgs {
    std::string mode = "lsa";
    int k = 3;
    std::uint64_t seed = 1;
    std::int64_t h = 8, w = 8, c = 8, cc = 4;
    double alpha = std::numeric_limits<double>::quiet_NaN();
    std::string params_path;
    std::string dump_params_path;
    bool check_oracle = false;
    int threads = 1;
};

ProjectionParams<double> aggregate_params(const AggregateArgs& a) {
    ProjectionParams<double> p;
    if (!a.params_path.empty()) {
        const TensorContainer box = read_container(read_file_bytes(a.params_path));
        p = load_projection_params<double>(box);
    } else {
        Rng rng(a.seed ^ 0xA5A5A5A5ull);
        p = ProjectionParams<double>::seeded(a.c, a.cc, a.cc, rng);
    }
    if (!std::isnan(a.alpha)) p.alpha = a.alpha;
    return p;
}

int run_aggregate(const AggregateArgs& a) {
    Rng rng(a.seed);
    const FeatureMap<double> f1 = FeatureMap<double>::seeded(a.h, a.w, a.c, rng);
    const FeatureMap<double> f2 = FeatureMap<double>::seeded(a.h, a.w, a.c, rng);
    const ProjectionParams<double> params = aggregate_params(a);
    const FeatureMap<double> fc =
        FeatureMap<double>::seeded(a.h, a.w, params.context_channels(), rng);

    if (!a.dump_params_path.empty()) {
        TensorContainer box;
        box.seed = a.seed;
        store_projection_params(box, params);
        write_file_bytes(a.dump_params_path, write_container(box));
    }

    const bool do_lsa = a.mode == "lsa" || a.mode == "both";
    const bool do_slsa = a.mode == "slsa" || a.mode == "both";

    if (do_lsa) {
        LsaConfig<double> cfg{LocalRegion(a.k), params, true};
        const FeatureMap<double> f2p =
            lsa_aggregate_features(f2, fc, cfg, a.threads);
        std::cout << "lsa: aggregated " << a.h << "x" << a.w << "x" << a.c
                  << " (k=" << a.k << ", alpha=" << params.alpha << ")\n";
        if (a.check_oracle) {
            const CostVolume4D<double> fast = build_cost_volume(f1, f2p, {}, a.threads);
            const CostVolume4D<double> cv = build_cost_volume(f1, f2, {}, a.threads);
            const CostVolume4D<double> oracle =
                lsa_aggregate_costvol_oracle(cv, f1, f2, fc, cfg, a.threads);
            double dev = 0.0;
            for (std::size_t i = 0; i < fast.data.data.size(); ++i) {
                dev = std::max(dev,
                               std::abs(fast.data.data[i] - oracle.data.data[i]));
            }
            std::cout << "lsa max abs deviation: " << dev << "\n";
        }
    }
    if (do_slsa) {
        SlsaConfig<double> cfg = SlsaConfig<double>::make(LocalRegion(a.k), params);
        const CostVolume4D<double> fast =
            slsa_aggregate(f1, f2, fc, cfg, true, a.threads);
        std::cout << "slsa: aggregated " << a.h << "x" << a.w << "x" << a.c
                  << " (k=" << a.k << ", alpha=" << params.alpha << ")\n";
        if (a.check_oracle) {
            const CostVolume4D<double> cv = build_cost_volume(f1, f2, {}, a.threads);
            const CostVolume4D<double> oracle =
                slsa_costvol_oracle(cv, f1, f2, fc, cfg, true, a.threads);
            double dev = 0.0;
            for (std::size_t i = 0; i < fast.data.data.size(); ++i) {
                dev = std::max(dev,
                               std::abs(fast.data.data[i] - oracle.data.data[i]));
            }
            std::cout << "slsa max abs deviation: " << dev << "\n";
        }
    }
    return 0;
}

struct EvalArgs {
    std::string spec_path;
    std::string pipelines = "raw,lsa,slsa,lsa+slsa";
    int seeds = 20;
    std::uint64_t seed0 = 1;
    std::string csv;
    int k = 3;
    std::int64_t c = 16;
    int threads = 1;
};

int run_eval(const EvalArgs& a) {
    const std::vector<std::uint8_t> raw = read_file_bytes(a.spec_path);
    const SceneSpec spec = scene_from_json_text(
        std::string(reinterpret_cast<const char*>(raw.data()), raw.size()));
    const std::vector<Pipeline> pipelines = parse_pipelines(a.pipelines);
    const std::int64_t cc = 2;  // context_features always yields two channels
    const LsaConfig<double> lcfg = designed_lsa_config<double>(a.c, cc, a.k);
    const SlsaConfig<double> scfg = designed_slsa_config<double>(a.c, cc, a.k);
    const std::vector<EvalRow> rows = run_seed_sweep(
        spec, pipelines, lcfg, scfg, a.c, a.seeds, a.seed0, a.threads);
    const std::string csv = eval_csv(rows);
    if (a.csv.empty()) {
        std::cout << csv;
    } else {
        write_file_text(a.csv, csv);
        std::cout << "wrote " << a.csv << " (" << rows.size() << " rows)\n";
    }
    return 0;
}

struct BenchArgs {
    std::string sizes = "8,16,24,32";
    int k = 5;
    int reps = 9;
    std::int64_t c = 8, cc = 4;
    std::string csv;
    int threads = 1;
};

int run_bench(const BenchArgs& a) {
    std::vector<std::int64_t> sizes;
    std::stringstream ss(a.sizes);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            sizes.push_back(std::stoll(item));
        } catch (const std::exception&) {
            throw ContractError("bench_cli", "bad size token: " + item);
        }
    }
    const std::vector<BenchRecord> records =
        bench_compare<float>(sizes, a.k, a.reps, a.c, a.cc, a.threads);
    const std::string csv = bench_csv(records);
    if (a.csv.empty()) {
        std::cout << csv;
    } else {
        write_file_text(a.csv, csv);
        std::cout << "wrote " << a.csv << " (" << records.size() << " rows)\n";
    }
    return 0;
}

struct VizArgs {
    std::string flo_path;
    std::string ppm_path;
    double max_norm = std::numeric_limits<double>::quiet_NaN();
};

int run_viz(const VizArgs& a) {
    const FlowField flow = read_flo(read_file_bytes(a.flo_path));
    std::optional<double> max_norm;
    if (!std::isnan(a.max_norm)) max_norm = a.max_norm;
    const RgbImage img = flow_to_color(flow, max_norm);
    write_file_bytes(a.ppm_path, write_ppm(img));
    std::cout << "wrote " << a.ppm_path << " (" << img.w << "x" << img.h << ")\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Local cost-volume aggregation kernels for optical flow"};
    app.require_subcommand(1);
    // --h is a real flag (frame height), so help must not claim -h
    app.set_help_flag("--help", "print help and exit");

    CostvolArgs ca;
    CLI::App* costvol = app.add_subcommand("costvol", "Build and dump a cost volume");
    costvol->set_help_flag("--help", "print help and exit");
    costvol->add_option("--h", ca.h, "frame height")->capture_default_str();
    costvol->add_option("--w", ca.w, "frame width")->capture_default_str();
    costvol->add_option("--c", ca.c, "feature channels")->capture_default_str();
    costvol->add_option("--seed", ca.seed, "feature seed")->capture_default_str();
    costvol->add_option("--scale", ca.scale, "correlation scale (1 = none)")
        ->capture_default_str();
    costvol->add_option("--out", ca.out, "output container path")->required();

    AggregateArgs aa;
    CLI::App* aggregate =
        app.add_subcommand("aggregate", "Run feature-space aggregation");
    aggregate->set_help_flag("--help", "print help and exit");
    aggregate->add_option("--mode", aa.mode, "lsa, slsa, or both")
        ->check(CLI::IsMember({"lsa", "slsa", "both"}))
        ->capture_default_str();
    aggregate->add_option("--k", aa.k, "window size (odd)")->capture_default_str();
    aggregate->add_option("--seed", aa.seed, "input seed")->capture_default_str();
    aggregate->add_option("--h", aa.h, "frame height")->capture_default_str();
    aggregate->add_option("--w", aa.w, "frame width")->capture_default_str();
    aggregate->add_option("--c", aa.c, "feature channels")->capture_default_str();
    aggregate->add_option("--cc", aa.cc, "context channels")->capture_default_str();
    aggregate->add_option("--alpha", aa.alpha, "override aggregation strength");
    aggregate->add_option("--params", aa.params_path, "load parameters container");
    aggregate->add_option("--dump-params", aa.dump_params_path,
                          "write the parameters used");
    aggregate->add_flag("--check-oracle", aa.check_oracle,
                        "verify against the cost-volume oracle");
    aggregate->add_option("--threads", aa.threads, "worker threads")
        ->capture_default_str();

    EvalArgs ea;
    CLI::App* eval =
        app.add_subcommand("eval", "Synthetic optical-flow evaluation sweep");
    eval->set_help_flag("--help", "print help and exit");
    eval->add_option("--spec", ea.spec_path, "scene spec JSON")->required();
    eval->add_option("--pipelines", ea.pipelines,
                     "comma list of raw,lsa,slsa,lsa+slsa")
        ->capture_default_str();
    eval->add_option("--seeds", ea.seeds, "number of seeds")->capture_default_str();
    eval->add_option("--seed0", ea.seed0, "first seed")->capture_default_str();
    eval->add_option("--csv", ea.csv, "output CSV path (stdout if omitted)");
    eval->add_option("--k", ea.k, "window size (odd)")->capture_default_str();
    eval->add_option("--c", ea.c, "feature channels")->capture_default_str();
    eval->add_option("--threads", ea.threads, "worker threads")
        ->capture_default_str();

    BenchArgs ba;
    CLI::App* bench =
        app.add_subcommand("bench", "Time fast paths against oracles");
    bench->set_help_flag("--help", "print help and exit");
    bench->add_option("--sizes", ba.sizes, "comma list of square frame sizes")
        ->capture_default_str();
    bench->add_option("--k", ba.k, "window size (odd)")->capture_default_str();
    bench->add_option("--reps", ba.reps, "timing repetitions (>= 5)")
        ->capture_default_str();
    bench->add_option("--c", ba.c, "feature channels")->capture_default_str();
    bench->add_option("--cc", ba.cc, "context channels")->capture_default_str();
    bench->add_option("--csv", ba.csv, "output CSV path (stdout if omitted)");
    bench->add_option("--threads", ba.threads, "worker threads (timings are "
                      "single-threaded unless raised)")
        ->capture_default_str();

    VizArgs va;
    CLI::App* viz = app.add_subcommand("viz", "Render a .flo file to PPM");
    viz->set_help_flag("--help", "print help and exit");
    viz->add_option("--flo", va.flo_path, "input .flo path")->required();
    viz->add_option("--ppm", va.ppm_path, "output PPM path")->required();
    viz->add_option("--max-norm", va.max_norm,
                    "fixed normalization radius (default: per-image max)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (costvol->parsed()) return run_costvol(ca);
        if (aggregate->parsed()) return run_aggregate(aa);
        if (eval->parsed()) return run_eval(ea);
        if (bench->parsed()) return run_bench(ba);
        if (viz->parsed()) return run_viz(va);
    } catch (const flowagg::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
