#include "gcslab/trainer.hpp"

#include "gcslab/adam.hpp"
#include "gcslab/beg.hpp"
#include "gcslab/image_io.hpp"
#include "gcslab/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace gcslab {

namespace {

constexpr double kScaleClampLo = -6.5; // exp(-6.5) ~ 1.5e-3, above the 1e-3 floor
double scale_clamp_hi(const CanvasDims& cv) {
    return std::log(double(std::max(cv.width, cv.height)));
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// 3x3 box blur over a pixel density map, zero-padded.
std::vector<double> box_blur(const std::vector<double>& in, int h, int w) {
    std::vector<double> out(in.size(), 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    int yy = y + dy, xx = x + dx;
                    if (yy >= 0 && yy < h && xx >= 0 && xx < w) acc += in[yy * w + xx];
                }
            }
            out[y * w + x] = acc / 9.0;
        }
    }
    return out;
}

} // namespace

bool uses_pinned_noise(LossKind kind) {
    switch (kind) {
        case LossKind::Isd:
        case LossKind::IsdCfg:
        case LossKind::Cc:
        case LossKind::Cg:
        case LossKind::Cp:
        case LossKind::Gcs:
            return true;
        default:
            return false;
    }
}

SplatScene init_scene(const GmmTeacher& teacher, const CanvasDims& canvas, int n_splats,
                      std::uint64_t seed, const std::string& condition_label) {
    require(n_splats >= 1, "init_scene needs n_splats >= 1");
    const std::vector<int>& subset = teacher.condition_subset(Condition::of(condition_label));
    const Vec& mode = teacher.component(subset.front()).mean;
    require(int(mode.size()) == canvas.size(), "teacher mode does not match canvas");

    // Density over pixels: blurred channel-absolute-sum of the mode image.
    int h = canvas.height, w = canvas.width, c = canvas.channels;
    std::vector<double> density(h * w, 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = 0; k < c; ++k) acc += std::abs(mode[(y * w + x) * c + k]);
            density[y * w + x] = acc;
        }
    }
    density = box_blur(density, h, w);
    double total = 0.0;
    int argmax = 0;
    for (int i = 0; i < h * w; ++i) {
        total += density[i];
        if (density[i] > density[argmax]) argmax = i;
    }

    Rng rng(seed);
    SplatScene scene;
    scene.canvas = canvas;
    for (int i = 0; i < n_splats; ++i) {
        int pix;
        if (i == 0 || total <= 0.0) {
            pix = argmax;
        } else {
            double draw = rng.uniform() * total;
            double acc = 0.0;
            pix = h * w - 1;
            for (int p = 0; p < h * w; ++p) {
                acc += density[p];
                if (draw <= acc) {
                    pix = p;
                    break;
                }
            }
        }
        Splat s;
        s.position = Vec2((pix % w) + 0.25 + 0.5 * rng.uniform(),
                          (pix / w) + 0.25 + 0.5 * rng.uniform());
        s.log_scales = Vec2(std::log(1.2) + 0.2 * rng.normal(),
                            std::log(1.2) + 0.2 * rng.normal());
        s.rotation = rng.uniform(0.0, 3.141592653589793);
        s.color = 0.05 * rng.normal_vec(c);
        s.opacity_logit = 0.0;
        s.depth_rank = i;
        scene.splats.push_back(std::move(s));
    }
    scene.validate();
    return scene;
}

namespace {

struct ParamGroups {
    Vec positions, log_scales, rotations, colors, opacities;

    static ParamGroups from_scene(const SplatScene& scene) {
        int n = int(scene.splats.size());
        int c = scene.canvas.channels;
        ParamGroups g;
        g.positions = Vec(2 * n);
        g.log_scales = Vec(2 * n);
        g.rotations = Vec(n);
        g.colors = Vec(c * n);
        g.opacities = Vec(n);
        for (int i = 0; i < n; ++i) {
            const Splat& s = scene.splats[i];
            g.positions.segment<2>(2 * i) = s.position;
            g.log_scales.segment<2>(2 * i) = s.log_scales;
            g.rotations[i] = s.rotation;
            g.colors.segment(c * i, c) = s.color;
            g.opacities[i] = s.opacity_logit;
        }
        return g;
    }

    void write_back(SplatScene& scene) const {
        int n = int(scene.splats.size());
        int c = scene.canvas.channels;
        double hi = scale_clamp_hi(scene.canvas);
        for (int i = 0; i < n; ++i) {
            Splat& s = scene.splats[i];
            s.position = positions.segment<2>(2 * i);
            s.log_scales[0] = std::clamp(log_scales[2 * i], kScaleClampLo, hi);
            s.log_scales[1] = std::clamp(log_scales[2 * i + 1], kScaleClampLo, hi);
            s.rotation = rotations[i];
            s.color = colors.segment(c * i, c);
            s.opacity_logit = opacities[i];
        }
    }
};

ParamGroups grads_to_groups(const std::vector<SplatGrads>& grads, int channels) {
    int n = int(grads.size());
    ParamGroups g;
    g.positions = Vec::Zero(2 * n);
    g.log_scales = Vec::Zero(2 * n);
    g.rotations = Vec::Zero(n);
    g.colors = Vec::Zero(channels * n);
    g.opacities = Vec::Zero(n);
    for (int i = 0; i < n; ++i) {
        g.positions.segment<2>(2 * i) = grads[i].position;
        g.log_scales.segment<2>(2 * i) = grads[i].log_scales;
        g.rotations[i] = grads[i].rotation;
        g.colors.segment(channels * i, channels) = grads[i].color;
        g.opacities[i] = grads[i].opacity_logit;
    }
    return g;
}

double mean_distance_over_poses(const SplatScene& scene, const GmmTeacher& teacher,
                                const Condition& y, int n_poses) {
    double acc = 0.0;
    for (int k = 0; k < n_poses; ++k) {
        LatentImage img = render(scene, make_view(k, n_poses));
        acc += teacher.distance_to_nearest_mode(img.data, y);
    }
    return acc / double(n_poses);
}

} // namespace

TrainResult train(const RunConfig& cfg, const GmmTeacher& teacher, const Decoder& decoder) {
    cfg.validate();
    NoiseSchedule sched = make_schedule(cfg.schedule_kind, cfg.schedule_steps);
    LossContext ctx{teacher, sched, &decoder};
    Condition y = Condition::of(cfg.condition_label);
    int latent_dim = cfg.canvas.size();
    require(teacher.dim() == latent_dim, "teacher latent dim does not match canvas");

    TrainResult result;
    result.scene = init_scene(teacher, cfg.canvas, cfg.n_splats, cfg.seed,
                              cfg.condition_label);
    result.initial_dist = mean_distance_over_poses(result.scene, teacher, y, cfg.n_poses);

    // eps* is sampled once per view and pinned for the whole run.
    std::vector<Vec> eps_star(cfg.n_poses);
    for (int v = 0; v < cfg.n_poses; ++v) {
        Rng view_rng(cfg.seed * 1000003ull + std::uint64_t(v) + 17ull);
        eps_star[v] = view_rng.normal_vec(latent_dim);
        result.eps_star_hashes.push_back(hash_vec(eps_star[v]));
    }

    bool pinned = uses_pinned_noise(cfg.loss.kind);
    Rng rng(cfg.seed);
    TimestepSampler sampler;

    ParamGroups params = ParamGroups::from_scene(result.scene);
    int n = cfg.n_splats, c = cfg.canvas.channels;
    Adam adam_pos(2 * n, {cfg.lr_position});
    Adam adam_scale(2 * n, {cfg.lr_scale});
    Adam adam_rot(n, {cfg.lr_rotation});
    Adam adam_color(c * n, {cfg.lr_color});
    Adam adam_op(n, {cfg.lr_opacity});

    std::filesystem::path out_root;
    if (!cfg.out_dir.empty()) {
        out_root = cfg.out_dir;
        std::filesystem::create_directories(out_root);
    }

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto t0 = std::chrono::steady_clock::now();
        TimestepTriple triple = sampler.sample(rng, epoch, cfg.delta);

        std::vector<int> poses(cfg.batch);
        for (int b = 0; b < cfg.batch; ++b) poses[b] = rng.uniform_int(0, cfg.n_poses - 1);

        ParamGroups grad_acc = grads_to_groups(std::vector<SplatGrads>(n), c);
        double loss_total = 0.0, loss_cc = 0.0, loss_cg = 0.0, loss_cp = 0.0;

        for (int b = 0; b < cfg.batch; ++b) {
            View view = make_view(poses[b], cfg.n_poses);
            LatentImage x_pi = render(result.scene, view);

            Vec eps;
            if (pinned) {
                require(hash_vec(eps_star[poses[b]]) == result.eps_star_hashes[poses[b]],
                        "pinned eps* drifted between epochs");
                eps = eps_star[poses[b]];
            } else {
                eps = rng.normal_vec(latent_dim);
            }

            LossResult loss = evaluate_loss(ctx, cfg.loss, x_pi.data, triple, y, eps);
            if (!std::isfinite(loss.value) || !loss.grad_x_pi.allFinite()) {
                std::ostringstream dump;
                dump << "non-finite loss at epoch " << epoch << ", triple (" << triple.t
                     << ", " << triple.s << ", " << triple.e << ")";
                for (const auto& [k, v] : loss.diagnostics) dump << ", " << k << "=" << v;
                throw std::runtime_error(dump.str());
            }
            loss_total += loss.value / cfg.batch;
            auto diag = [&](const char* key) {
                auto it = loss.diagnostics.find(key);
                return it == loss.diagnostics.end() ? 0.0 : it->second;
            };
            loss_cc += diag("cc") / cfg.batch;
            loss_cg += diag("cg") / cfg.batch;
            loss_cp += diag("cp") / cfg.batch;

            LatentImage upstream;
            upstream.dims = cfg.canvas;
            upstream.data = loss.grad_x_pi / cfg.batch;
            std::vector<SplatGrads> grads = render_grad(result.scene, view, upstream);
            ParamGroups gg = grads_to_groups(grads, c);
            grad_acc.positions += gg.positions;
            grad_acc.log_scales += gg.log_scales;
            grad_acc.rotations += gg.rotations;
            grad_acc.colors += gg.colors;
            grad_acc.opacities += gg.opacities;
        }

        adam_pos.step(params.positions, grad_acc.positions);
        adam_scale.step(params.log_scales, grad_acc.log_scales);
        adam_rot.step(params.rotations, grad_acc.rotations);
        adam_color.step(params.colors, grad_acc.colors);
        adam_op.step(params.opacities, grad_acc.opacities);
        params.write_back(result.scene);

        // BEG hook: decode the epoch's views from the updated scene.
        std::vector<PixelImage> decoded;
        double dist_acc = 0.0;
        for (int b = 0; b < cfg.batch; ++b) {
            LatentImage img = render(result.scene, make_view(poses[b], cfg.n_poses));
            dist_acc += teacher.distance_to_nearest_mode(img.data, y);
            decoded.push_back(decoder.decode_image(img));
        }
        BrightnessReport report = beg_check(decoded, cfg.beg);
        if (cfg.beg_enabled && report.triggered) {
            result.scene = beg_apply(result.scene, cfg.beg);
            params = ParamGroups::from_scene(result.scene);
        }

        auto t1 = std::chrono::steady_clock::now();
        MetricsRow row;
        row.epoch = epoch;
        row.loss_total = loss_total;
        row.loss_cc = loss_cc;
        row.loss_cg = loss_cg;
        row.loss_cp = loss_cp;
        row.dist_mode_mean = dist_acc / cfg.batch;
        row.p85_max = report.max;
        row.beg_triggered = report.triggered;
        row.ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        result.metrics.push_back(row);

        if (!out_root.empty() && cfg.snapshot_every > 0 &&
            (epoch + 1) % cfg.snapshot_every == 0) {
            char name[64];
            std::snprintf(name, sizeof(name), "scene_%06d.txt", epoch + 1);
            result.scene.save((out_root / name).string());
        }
    }

    result.final_dist = mean_distance_over_poses(result.scene, teacher, y, cfg.n_poses);

    if (!out_root.empty()) {
        result.scene.save((out_root / "scene_final.txt").string());
        for (int k = 0; k < cfg.n_poses; ++k) {
            LatentImage img = render(result.scene, make_view(k, cfg.n_poses));
            char name[64];
            std::snprintf(name, sizeof(name), "render_pose%d.ppm", k);
            write_ppm((out_root / name).string(), decoder.decode_image(img));
        }
    }
    return result;
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
    std::string out =
        "epoch,loss_total,loss_cc,loss_cg,loss_cp,dist_mode_mean,p85_max,beg_triggered,ms\n";
    for (const MetricsRow& r : rows) {
        out += std::to_string(r.epoch);
        out += ",";
        out += format_double(r.loss_total);
        out += ",";
        out += format_double(r.loss_cc);
        out += ",";
        out += format_double(r.loss_cg);
        out += ",";
        out += format_double(r.loss_cp);
        out += ",";
        out += format_double(r.dist_mode_mean);
        out += ",";
        out += format_double(r.p85_max);
        out += ",";
        out += r.beg_triggered ? "1" : "0";
        out += ",";
        out += format_double(r.ms);
        out += "\n";
    }
    return out;
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write metrics file: " + path);
    out << metrics_csv(rows);
    if (!out) throw std::runtime_error("failed writing metrics file: " + path);
}

} // namespace gcslab
