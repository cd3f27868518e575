// Command-line front end: dataset generation, photon tracing, rendering,
// network training, and quantitative evaluation.

#include <CLI11.hpp>

#include <iostream>

#include "dpm/dpm.hpp"

namespace {

std::vector<int> parse_scene_range(const std::string& spec, int available) {
    std::vector<int> out;
    if (spec.empty()) {
        for (int i = 0; i < available; ++i) out.push_back(i);
        return out;
    }
    size_t colon = spec.find(':');
    if (colon != std::string::npos) {
        int lo = std::stoi(spec.substr(0, colon));
        int hi = std::stoi(spec.substr(colon + 1));
        for (int i = lo; i < hi; ++i) out.push_back(i);
        return out;
    }
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stoi(tok));
    return out;
}

int run_selftest(std::uint64_t seed, int threads) {
    using namespace dpm;
    int failures = 0;
    auto check = [&](bool ok, const char* what) {
        std::cout << (ok ? "ok   " : "FAIL ") << what << "\n";
        if (!ok) ++failures;
    };

    {
        RngStream rng(seed, 1);
        PhotonDump dump;
        dump.n_paths = 1;
        for (int i = 0; i < 2000; ++i) {
            Photon p;
            p.position = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
            p.dir = {0, 0, -1};
            p.flux = {1, 1, 1};
            dump.photons.push_back(p);
        }
        PhotonMap map(dump);
        bool ok = true;
        for (int q = 0; q < 25 && ok; ++q) {
            Vec3 query{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
            for (size_t K : {size_t(5), size_t(50)}) {
                Neighborhood a = map.knn(query, K);
                Neighborhood b = knn_brute_force(dump, query, K);
                if (a.photons.size() != b.photons.size()) { ok = false; break; }
                for (size_t i = 0; i < a.photons.size(); ++i)
                    if (a.photons[i].index != b.photons[i].index ||
                        a.photons[i].distance != b.photons[i].distance) { ok = false; break; }
            }
        }
        check(ok, "kd-tree matches brute-force k-NN");

        ShadingPoint sp;
        sp.position = {0, 0, 0};
        sp.normal = {0, 0, 1};
        sp.albedo = {0.7, 0.7, 0.7};
        RngStream frng(seed, 2);
        sp.frame = build_frame(sp.position, sp.normal, frng);
        KernelNet ones = make_constant_net(50, 1.0);
        Neighborhood nb = map.knn(sp.position, 50);
        Rgb uniform_pm = pm_estimate(map, sp, nb, Kernel::Uniform);
        NetWorkspace ws;
        Rgb learned = learned_estimate(ones, map, sp, nb, ws);
        double rel = (learned - uniform_pm).length() / (uniform_pm.length() + 1e-300);
        check(rel < 1e-12, "constant-one net reduces to uniform PM");
    }

    {
        Scene scene = generate_scene(seed + 3);
        TraceConfig tc;
        tc.n_paths = 5000;
        tc.seed = seed;
        tc.threads = 1;
        PhotonDump a = trace_photons(scene, tc);
        tc.threads = threads > 1 ? threads : 2;
        PhotonDump b = trace_photons(scene, tc);
        bool same = a.photons.size() == b.photons.size();
        for (size_t i = 0; same && i < a.photons.size(); ++i)
            same = a.photons[i].position == b.photons[i].position &&
                   a.photons[i].flux == b.photons[i].flux && a.photons[i].flags == b.photons[i].flags;
        check(same, "tracing is seed-stable across thread counts");
    }

    {
        bool ok = std::abs(mu_law_scalar(0.0) - 0.0) < 1e-15 &&
                  std::abs(mu_law_scalar(1.0) - 1.0) < 1e-15 &&
                  std::abs(mu_law_scalar(1.0 / 5000.0) - std::log(2.0) / std::log(5001.0)) < 1e-12;
        check(ok, "mu-law fixed points");
        ok = std::abs(map_contribution_scalar(0.0) + 1.0) < 1e-15 &&
             std::abs(map_contribution_scalar(0.01 * (std::exp(1.0) - 1.0))) < 1e-12;
        check(ok, "contribution mapping fixed points");
    }

    std::cout << (failures == 0 ? "selftest passed\n" : "selftest FAILED\n");
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"learned kernel density estimation for photon mapping"};
    app.require_subcommand(1);
    app.fallthrough();

    std::uint64_t seed = 0;
    int threads = static_cast<int>(std::thread::hardware_concurrency());
    app.add_option("--seed", seed, "global rng seed");
    app.add_option("--threads", threads, "worker thread count");

    // datagen
    auto* datagen = app.add_subcommand("datagen", "generate scenes / full training datasets");
    dpm::DatasetConfig dcfg;
    std::string datagen_out;
    datagen->add_option("--scenes,--count", dcfg.n_scenes, "number of scenes");
    datagen->add_option("--res", dcfg.resolution, "ground-truth image resolution");
    datagen->add_option("--photon-paths", dcfg.photon_paths, "paths traced for the stored dump");
    datagen->add_option("--photon-cap", dcfg.photon_cap, "stored photon cap (path-thinned)");
    datagen->add_option("--gt-iters", dcfg.gt_iterations, "ppm iterations for ground truth");
    datagen->add_option("--gt-paths-per-iter", dcfg.gt_paths_per_iter, "paths per ppm iteration");
    std::string datagen_filter = "indirect-only";
    datagen->add_option("--filter", datagen_filter, "photon store filter");
    datagen->add_flag("--scenes-only", dcfg.scenes_only, "write scene files only");
    datagen->add_option("--out", datagen_out, "output directory")->required();

    // trace
    auto* trace = app.add_subcommand("trace", "trace photons into a .phd dump");
    std::string trace_scene, trace_out, trace_filter = "all";
    dpm::TraceConfig tcfg;
    trace->add_option("--scene", trace_scene, "scene file")->required();
    trace->add_option("--paths", tcfg.n_paths, "photon paths to emit");
    trace->add_option("--max-bounces", tcfg.max_bounces, "maximum bounces per path");
    trace->add_option("--filter", trace_filter, "store filter: all|indirect-only|ls-only");
    trace->add_option("--out", trace_out, "output .phd file")->required();

    // render
    auto* render = app.add_subcommand("render", "render per-shading-point radiance estimates");
    std::string render_scene, render_out, render_estimator = "pm", render_model,
                render_kernel = "uniform";
    std::uint64_t render_paths = 100000;
    size_t render_K = 500;
    int render_res = 128, render_ppm_iters = 10;
    std::string render_filter = "all";
    render->add_option("--scene", render_scene, "scene file")->required();
    render->add_option("--estimator", render_estimator, "pm|ppm|learned");
    render->add_option("--K", render_K, "nearest-neighbor count");
    render->add_option("--kernel", render_kernel, "pm kernel: uniform|cone|epanechnikov");
    render->add_option("--paths", render_paths, "photon path budget");
    render->add_option("--model", render_model, "model file for --estimator learned");
    render->add_option("--res", render_res, "image resolution");
    render->add_option("--ppm-iters", render_ppm_iters, "ppm iteration count");
    render->add_option("--filter", render_filter, "store filter");
    render->add_option("--out", render_out, "output image (.pfm or .png)")->required();

    // train
    auto* train_cmd = app.add_subcommand("train", "train the kernel-prediction network");
    std::string train_data, train_out, train_log, train_scenes_spec;
    dpm::TrainConfig tr;
    train_cmd->add_option("--data", train_data, "dataset directory")->required();
    train_cmd->add_option("--K", tr.K, "nearest-neighbor count");
    train_cmd->add_option("--epochs", tr.epochs, "training epochs");
    train_cmd->add_option("--batch", tr.batch, "shading points per batch");
    train_cmd->add_option("--lr", tr.lr, "adam learning rate");
    train_cmd->add_option("--steps-per-epoch", tr.steps_per_epoch,
                          "cap batches per epoch (0 = full pass)");
    train_cmd->add_option("--subsample-min", tr.subsample_min, "min path-keep fraction");
    train_cmd->add_option("--subsample-max", tr.subsample_max, "max path-keep fraction");
    train_cmd->add_flag("--direct", tr.direct, "train the direct-estimation ablation");
    train_cmd->add_option("--checkpoint-every", tr.checkpoint_every, "epochs between checkpoints");
    train_cmd->add_option("--train-scenes", train_scenes_spec,
                          "scene indices, e.g. 0:20 or 0,1,2 (default: all)");
    train_cmd->add_option("--log", train_log, "training log file");
    train_cmd->add_option("--out", train_out, "output model .dpmw")->required();

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "quantitative comparison against ground truth");
    std::string eval_data, eval_out, eval_scenes_spec, eval_methods = "pm-500", eval_filter;
    dpm::EvalConfig ecfg;
    eval_cmd->add_option("--data", eval_data, "dataset directory")->required();
    eval_cmd->add_option("--scenes", eval_scenes_spec, "scene indices, e.g. 20:24");
    eval_cmd->add_option("--methods", eval_methods,
                         "comma list: pm-K | ppm | learned:model.dpmw | gt");
    eval_cmd->add_option("--paths", ecfg.paths, "eval photon path budget per scene");
    eval_cmd->add_option("--ppm-iters", ecfg.ppm.iterations, "ppm iteration count");
    eval_cmd->add_option("--filter", eval_filter, "store filter (default: dataset filter)");
    eval_cmd->add_option("--out", eval_out, "machine-readable report (.tsv)");

    // selftest
    auto* selftest = app.add_subcommand("selftest", "quick internal consistency checks");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*datagen) {
            dcfg.seed = seed;
            dcfg.threads = threads;
            dcfg.filter = dpm::parse_store_filter(datagen_filter);
            dpm::DatasetManifest m = dpm::build_dataset(datagen_out, dcfg, std::cerr);
            std::cout << "dataset: " << m.entries.size() << "/" << dcfg.n_scenes
                      << " scenes completed in " << datagen_out << "\n";
            return m.entries.empty() ? 1 : 0;
        }

        if (*trace) {
            tcfg.seed = seed;
            tcfg.threads = threads;
            tcfg.filter = dpm::parse_store_filter(trace_filter);
            dpm::Scene scene = dpm::load_scene(trace_scene);
            dpm::PhotonDump dump = dpm::trace_photons(scene, tcfg);
            dpm::save_photon_dump(trace_out, dump);
            std::cout << "stored " << dump.photons.size() << " photons from " << dump.n_paths
                      << " paths -> " << trace_out << "\n";
            return 0;
        }

        if (*render) {
            dpm::Scene scene = dpm::load_scene(render_scene);
            dpm::StoreFilter filter = dpm::parse_store_filter(render_filter);
            dpm::RadianceImage img;
            if (render_estimator == "ppm") {
                dpm::PpmConfig pc;
                pc.iterations = render_ppm_iters;
                pc.paths_per_iter = std::max<std::uint64_t>(1, render_paths / render_ppm_iters);
                pc.filter = filter;
                dpm::GtImage gt =
                    dpm::ground_truth_image(scene, render_res, render_res, pc, seed, threads);
                img = dpm::RadianceImage(gt.width, gt.height);
                for (size_t i = 0; i < gt.pixels.size(); ++i)
                    if (gt.pixels[i].valid) img.pixels[i] = gt.pixels[i].radiance;
            } else {
                dpm::GtImage points = dpm::make_shading_image(scene, render_res, render_res, seed);
                dpm::TraceConfig tc;
                tc.n_paths = render_paths;
                tc.filter = filter;
                tc.seed = dpm::mix_seed(seed, 0x7ace);
                tc.threads = threads;
                dpm::PhotonDump dump = dpm::trace_photons(scene, tc);
                if (dump.photons.empty()) throw std::runtime_error("render: no photons stored");
                dpm::PhotonMap map(dump);
                if (render_estimator == "pm") {
                    img = dpm::estimate_image_pm(map, points, render_K,
                                                 dpm::parse_kernel(render_kernel), threads);
                } else if (render_estimator == "learned") {
                    if (render_model.empty())
                        throw std::invalid_argument("render: --model required for learned");
                    dpm::KernelNet net = dpm::load_model(render_model);
                    img = dpm::estimate_image_learned(net, map, points, threads);
                } else {
                    throw std::invalid_argument("render: unknown estimator " + render_estimator);
                }
            }
            dpm::write_image(render_out, img);
            std::cout << "wrote " << render_out << "\n";
            return 0;
        }

        if (*train_cmd) {
            tr.seed = seed;
            tr.threads = threads;
            dpm::DatasetManifest manifest = dpm::load_manifest(train_data);
            std::vector<int> available;
            for (const auto& e : manifest.entries) available.push_back(e.index);
            std::vector<int> indices = train_scenes_spec.empty()
                                           ? available
                                           : parse_scene_range(train_scenes_spec, 0);
            std::vector<dpm::TrainScene> scenes = dpm::load_train_scenes(train_data, indices);
            if (tr.checkpoint_every > 0) tr.checkpoint_stem = train_out;

            std::ofstream log_file;
            std::ostream* log = &std::cerr;
            if (!train_log.empty()) {
                log_file.open(train_log);
                if (!log_file) throw std::runtime_error("cannot open log file " + train_log);
                log = &log_file;
            }
            dpm::TrainResult result = dpm::train(scenes, tr, log);
            dpm::save_model(train_out, result.net);
            std::cout << "trained " << (tr.direct ? "direct" : "kernel") << " net K=" << tr.K
                      << ", final loss " << (result.log.empty() ? 0.0 : result.log.back().loss)
                      << " -> " << train_out << "\n";
            return 0;
        }

        if (*eval_cmd) {
            ecfg.seed = seed;
            ecfg.threads = threads;
            dpm::DatasetManifest manifest = dpm::load_manifest(eval_data);
            ecfg.filter = eval_filter.empty() ? manifest.config.filter
                                              : dpm::parse_store_filter(eval_filter);
            std::vector<int> available;
            for (const auto& e : manifest.entries) available.push_back(e.index);
            std::vector<int> indices = eval_scenes_spec.empty()
                                           ? available
                                           : parse_scene_range(eval_scenes_spec, 0);
            std::vector<dpm::MethodSpec> methods;
            std::stringstream ss(eval_methods);
            std::string tok;
            while (std::getline(ss, tok, ',')) methods.push_back(dpm::parse_method(tok));

            dpm::MetricsReport report = dpm::evaluate(eval_data, indices, methods, ecfg);
            dpm::write_report_text(std::cout, report);
            if (!eval_out.empty()) {
                std::ofstream os(eval_out);
                if (!os) throw std::runtime_error("cannot write report " + eval_out);
                dpm::write_report_tsv(os, report);
            }
            return report.rows.empty() ? 1 : 0;
        }

        if (*selftest) return run_selftest(seed, threads);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
