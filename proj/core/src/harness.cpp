#include "gcslab/harness.hpp"

#include "gcslab/adam.hpp"
#include "gcslab/beg.hpp"
#include "gcslab/image_io.hpp"
#include "gcslab/rng.hpp"
#include "gcslab/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>

namespace gcslab {

namespace fs = std::filesystem;

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << text;
    if (!out) throw std::runtime_error("failed writing file: " + path);
}

} // namespace

FitResult fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
    require(xs.size() == ys.size() && xs.size() >= 2, "fit_line needs >= 2 points");
    double n = double(xs.size());
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    require(sxx > 0.0, "fit_line: degenerate x values");
    FitResult fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        double resid = ys[i] - (fit.intercept + fit.slope * xs[i]);
        ss_res += resid * resid;
    }
    fit.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
    if (xs.size() > 2) {
        fit.slope_stderr = std::sqrt(ss_res / (n - 2.0) / sxx);
    }
    return fit;
}

void ExperimentPreset::validate() const {
    require(!values.empty(), "experiment preset needs >= 1 swept value");
    Config keys = base.to_config();
    require(keys.has(swept_key), "swept parameter not a RunConfig key: " + swept_key);
}

std::vector<RunConfig> ExperimentPreset::materialize() const {
    validate();
    std::vector<RunConfig> out;
    std::vector<std::uint64_t> use_seeds = seeds.empty()
        ? std::vector<std::uint64_t>{base.seed} : seeds;
    for (const std::string& value : values) {
        for (std::uint64_t seed : use_seeds) {
            Config cfg = base.to_config();
            cfg.set(swept_key, value);
            cfg.set("train.seed", seed);
            out.push_back(RunConfig::from_config(cfg));
        }
    }
    return out;
}

std::string resolve_out_dir(const std::string& out_dir) {
    const char* root = std::getenv("GCSLAB_OUT");
    fs::path p(out_dir);
    if (root != nullptr && *root != '\0' && p.is_relative()) {
        return (fs::path(root) / p).string();
    }
    return out_dir;
}

namespace {

// Seeded scene with splats spread over the canvas; the hidden reference the
// teacher's target views are rendered from.
SplatScene procedural_scene(const RunConfig& cfg, std::uint64_t seed, int n_splats) {
    Rng rng(seed);
    SplatScene scene;
    scene.canvas = cfg.canvas;
    for (int i = 0; i < n_splats; ++i) {
        Splat s;
        s.position = Vec2(rng.uniform(1.0, cfg.canvas.width - 1.0),
                          rng.uniform(1.0, cfg.canvas.height - 1.0));
        s.log_scales = Vec2(std::log(rng.uniform(1.0, 2.5)), std::log(rng.uniform(1.0, 2.5)));
        s.rotation = rng.uniform(0.0, 3.141592653589793);
        s.color = Vec(cfg.canvas.channels);
        for (int c = 0; c < cfg.canvas.channels; ++c) s.color[c] = rng.uniform(-0.9, 0.9);
        s.opacity_logit = rng.uniform(0.5, 1.5);
        s.depth_rank = i;
        scene.splats.push_back(std::move(s));
    }
    return scene;
}

} // namespace

GmmTeacher build_reference_teacher(const RunConfig& cfg) {
    SplatScene reference = procedural_scene(cfg, cfg.seed * 7919ull + 1ull, 24);
    SplatScene decoy = procedural_scene(cfg, cfg.seed * 104729ull + 2ull, 24);
    std::vector<LatentImage> targets, distractors;
    for (int k = 0; k < cfg.n_poses; ++k) {
        targets.push_back(render(reference, make_view(k, cfg.n_poses)));
        distractors.push_back(render(decoy, make_view(k, cfg.n_poses)));
    }
    return build_teacher(targets, distractors, cfg.teacher_variance);
}

GmmTeacher load_or_build_teacher(RunConfig& cfg, const std::string& out_dir) {
    if (!cfg.teacher_file.empty()) return GmmTeacher::load(cfg.teacher_file);
    GmmTeacher teacher = build_reference_teacher(cfg);
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        std::string path = (fs::path(out_dir) / "teacher.txt").string();
        teacher.save(path);
        cfg.teacher_file = path;
    }
    return teacher;
}

TrainOutput run_train(RunConfig cfg) {
    TrainOutput out;
    out.out_dir = resolve_out_dir(cfg.out_dir);
    fs::create_directories(out.out_dir);
    cfg.out_dir = out.out_dir;

    GmmTeacher teacher = load_or_build_teacher(cfg, out.out_dir);
    Decoder decoder(cfg.canvas, DecoderConfig{cfg.decoder_upsample, true, false,
                                              cfg.decoder_seed});

    out.lock_path = (fs::path(out.out_dir) / "run.lock").string();
    cfg.to_config().write(out.lock_path);

    out.result = train(cfg, teacher, decoder);

    out.metrics_path = (fs::path(out.out_dir) / "metrics.csv").string();
    write_metrics_csv(out.metrics_path, out.result.metrics);
    emit_plotdata((fs::path(out.out_dir) / "loss_curves.csv").string(),
                  out.result.metrics, PlotKind::LossCurves);
    emit_plotdata((fs::path(out.out_dir) / "brightness.csv").string(),
                  out.result.metrics, PlotKind::Brightness);
    return out;
}

namespace {

struct SweepScenario {
    NoiseSchedule sched;
    GmmTeacher teacher;
    std::vector<Vec> starts;
    int t_start;
};

SweepScenario sweep_scenario(RunConfig& cfg, int n_starts) {
    NoiseSchedule sched = make_schedule(cfg.schedule_kind, cfg.schedule_steps);
    GmmTeacher teacher = load_or_build_teacher(cfg, "");
    int t_start = int(std::lround(0.9 * sched.max_index()));
    Rng rng(cfg.seed * 31337ull + 5ull);
    std::vector<Vec> starts;
    for (int i = 0; i < n_starts; ++i) {
        int comp = rng.uniform_int(0, teacher.component_count() - 1);
        const auto& c = teacher.component(comp);
        double a = sched.alpha(t_start), s = sched.sigma(t_start);
        double marg = std::sqrt(a * a * c.variance + s * s);
        starts.push_back(a * c.mean + marg * rng.normal_vec(teacher.dim()));
    }
    return SweepScenario{std::move(sched), std::move(teacher), std::move(starts), t_start};
}

double sup_endpoint_error(const SweepScenario& sc, int e, int n_steps, int order) {
    double worst = 0.0;
    for (const Vec& x : sc.starts) {
        Vec end = run_trajectory(sc.teacher, sc.sched, x, sc.t_start, e, n_steps,
                                 Condition::null(), 1.0, CfgMode::PerStep, order);
        Vec ref = rk4_reference(sc.teacher, sc.sched, x, sc.t_start, e, 2000);
        worst = std::max(worst, (end - ref).norm());
    }
    return worst;
}

} // namespace

SweepDtResult run_sweep_dt(RunConfig cfg, const std::vector<int>& deltas, int order,
                           const std::string& csv_path) {
    require(!deltas.empty(), "sweep-dt needs at least one delta");
    SweepScenario sc = sweep_scenario(cfg, 4);
    int e = int(std::lround(0.1 * sc.sched.max_index()));

    SweepDtResult out;
    std::vector<double> log_dt, log_err;
    for (int delta : deltas) {
        require(delta >= 1, "sweep-dt deltas must be >= 1");
        int n_steps = std::max(1, int(std::lround(double(sc.t_start - e) / delta)));
        double actual_dt = double(sc.t_start - e) / double(n_steps);
        double err = sup_endpoint_error(sc, e, n_steps, order);
        out.deltas.push_back(actual_dt);
        out.errors.push_back(err);
        log_dt.push_back(std::log(actual_dt));
        log_err.push_back(std::log(std::max(err, 1e-300)));
    }
    out.fit = fit_line(log_dt, log_err);

    if (!csv_path.empty()) {
        std::string csv = "x,y,series\n";
        for (size_t i = 0; i < out.deltas.size(); ++i) {
            csv += format_double(out.deltas[i]) + "," + format_double(out.errors[i]) +
                   ",order" + std::to_string(order) + "\n";
        }
        write_text(csv_path, csv);
        fs::path fit_path = fs::path(csv_path).parent_path() /
                            (fs::path(csv_path).stem().string() + "_fit.csv");
        emit_slope_fit(fit_path.string(), out.fit);
    }
    return out;
}

VerifyBoundResult run_verify_bound(RunConfig cfg) {
    std::vector<int> deltas = {25, 50, 100, 200};
    VerifyBoundResult out;
    out.order1 = run_sweep_dt(cfg, deltas, 1).fit;
    out.order2 = run_sweep_dt(cfg, deltas, 2).fit;

    // Affine growth in (T - e) at fixed step size.
    SweepScenario sc = sweep_scenario(cfg, 4);
    int grid = sc.sched.max_index();
    std::vector<double> spans, errs;
    for (double frac : {0.7, 0.5, 0.3, 0.1}) {
        int e = int(std::lround(frac * grid));
        int n_steps = std::max(1, (sc.t_start - e) / 50);
        spans.push_back(double(sc.t_start - e));
        errs.push_back(sup_endpoint_error(sc, e, n_steps, 1));
    }
    out.growth = fit_line(spans, errs);
    return out;
}

BegAbResult run_beg_ab(RunConfig cfg, int epochs) {
    GmmTeacher teacher = load_or_build_teacher(cfg, "");
    Decoder decoder(cfg.canvas, DecoderConfig{cfg.decoder_upsample, true, false,
                                              cfg.decoder_seed});
    int npix = decoder.out_height() * decoder.out_width();

    auto drive = [&](bool beg_on) {
        SplatScene scene = init_scene(teacher, cfg.canvas, cfg.n_splats, cfg.seed,
                                      cfg.condition_label);
        // Positive starting colors so the ascent inflates brightness from the
        // first epoch.
        for (Splat& s : scene.splats) s.color = s.color.cwiseAbs().array() + 0.15;
        Rng rng(cfg.seed * 77ull + 3ull);
        std::vector<double> p85;
        for (int epoch = 0; epoch < epochs; ++epoch) {
            std::vector<int> poses(cfg.batch);
            for (int b = 0; b < cfg.batch; ++b) poses[b] = rng.uniform_int(0, cfg.n_poses - 1);

            // Gradient ascent on mean decoded brightness, colors only.
            for (int b = 0; b < cfg.batch; ++b) {
                View view = make_view(poses[b], cfg.n_poses);
                LatentImage img = render(scene, view);
                Vec cot = Vec::Constant(npix * 3, 1.0 / double(3 * npix * cfg.batch));
                LatentImage upstream;
                upstream.dims = cfg.canvas;
                upstream.data = decoder.decode_vjp(img.data, cot);
                std::vector<SplatGrads> grads = render_grad(scene, view, upstream);
                for (size_t i = 0; i < grads.size(); ++i) {
                    scene.splats[i].color += 2.0 * grads[i].color;
                }
            }

            std::vector<PixelImage> decoded;
            for (int b = 0; b < cfg.batch; ++b) {
                decoded.push_back(decoder.decode_image(
                    render(scene, make_view(poses[b], cfg.n_poses))));
            }
            BrightnessReport report = beg_check(decoded, cfg.beg);
            p85.push_back(report.max);
            if (beg_on && report.triggered) scene = beg_apply(scene, cfg.beg);
        }
        return p85;
    };

    BegAbResult out;
    out.p85_disabled = drive(false);
    out.p85_enabled = drive(true);
    out.final_disabled = out.p85_disabled.back();
    out.final_enabled = out.p85_enabled.back();
    return out;
}

LossSpec ablate_preset(const std::string& token, const LossSpec& base) {
    LossSpec spec = base;
    if (token == "sds") {
        spec.kind = LossKind::SdsCfg;
        spec.cfg_weight = 100.0;
    } else if (token == "csd") {
        spec.kind = LossKind::Csd;
    } else if (token == "isd") {
        spec.kind = LossKind::IsdCfg;
        spec.cfg_weight = 7.5;
    } else if (token == "cds") {
        spec.kind = LossKind::Cds;
        spec.cfg_weight = 50.0;
    } else if (token == "cc") {
        spec.kind = LossKind::Cc;
        spec.cfg_weight = 7.5;
    } else if (token == "cc+cg") {
        spec.kind = LossKind::Gcs;
        spec.cfg_weight = 7.5;
        spec.w_cp = 0.0;
    } else if (token == "gcs") {
        spec.kind = LossKind::Gcs;
        spec.cfg_weight = 7.5;
    } else {
        throw std::invalid_argument("unknown ablation loss token: " + token);
    }
    return spec;
}

AblateResult run_ablate(RunConfig cfg, const std::vector<std::string>& tokens) {
    require(!tokens.empty(), "ablate needs at least one loss token");
    std::string out_dir = resolve_out_dir(cfg.out_dir);
    fs::create_directories(out_dir);
    cfg.out_dir = out_dir;
    GmmTeacher teacher = load_or_build_teacher(cfg, out_dir);
    Decoder decoder(cfg.canvas, DecoderConfig{cfg.decoder_upsample, true, false,
                                              cfg.decoder_seed});

    AblateResult out;
    for (const std::string& token : tokens) {
        RunConfig arm = cfg;
        arm.loss = ablate_preset(token, cfg.loss);
        arm.out_dir = ""; // no per-arm snapshots
        TrainResult r = train(arm, teacher, decoder);
        out.names.push_back(token);
        out.final_dist.push_back(r.final_dist);
        out.metrics.push_back(std::move(r.metrics));
    }
    emit_ablation((fs::path(out_dir) / "ablation.csv").string(), out);
    return out;
}

PlotKind plot_kind_from_string(const std::string& name) {
    if (name == "loss-curves") return PlotKind::LossCurves;
    if (name == "brightness") return PlotKind::Brightness;
    if (name == "slope-fit") return PlotKind::SlopeFit;
    if (name == "ablation") return PlotKind::Ablation;
    throw std::invalid_argument("unknown plot kind: " + name);
}

void emit_plotdata(const std::string& path, const std::vector<MetricsRow>& metrics,
                   PlotKind kind) {
    require(!metrics.empty(), "emit_plotdata on empty metrics table");
    std::string csv = "x,y,series\n";
    if (kind == PlotKind::LossCurves) {
        for (const MetricsRow& r : metrics) {
            csv += std::to_string(r.epoch) + "," + format_double(r.loss_total) + ",loss_total\n";
            csv += std::to_string(r.epoch) + "," + format_double(r.loss_cc) + ",loss_cc\n";
            csv += std::to_string(r.epoch) + "," + format_double(r.loss_cg) + ",loss_cg\n";
            csv += std::to_string(r.epoch) + "," + format_double(r.loss_cp) + ",loss_cp\n";
        }
    } else if (kind == PlotKind::Brightness) {
        for (const MetricsRow& r : metrics) {
            csv += std::to_string(r.epoch) + "," + format_double(r.p85_max) + ",p85_max\n";
        }
    } else {
        throw std::invalid_argument("emit_plotdata: kind needs its dedicated writer");
    }
    write_text(path, csv);
}

void emit_slope_fit(const std::string& path, const FitResult& fit) {
    std::string csv = "slope,intercept,r2\n";
    csv += format_double(fit.slope) + "," + format_double(fit.intercept) + "," +
           format_double(fit.r2) + "\n";
    write_text(path, csv);
}

void emit_ablation(const std::string& path, const AblateResult& result) {
    std::string csv = "x,y,series\n";
    for (size_t i = 0; i < result.names.size(); ++i) {
        for (const MetricsRow& r : result.metrics[i]) {
            csv += std::to_string(r.epoch) + "," + format_double(r.dist_mode_mean) + "," +
                   result.names[i] + "\n";
        }
    }
    write_text(path, csv);
}

} // namespace gcslab
