#include "gcslab/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace gcslab {

namespace {

constexpr double kMinScale = 1e-3;
constexpr double kTwoPi = 6.283185307179586;

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

Mat2 rot2(double a) {
    Mat2 r;
    r << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    return r;
}

std::vector<int> composite_order(const SplatScene& scene) {
    std::vector<int> order(scene.splats.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return scene.splats[a].depth_rank < scene.splats[b].depth_rank;
    });
    return order;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

void SplatScene::validate() const {
    double max_side = double(std::max(canvas.width, canvas.height));
    std::vector<int> ranks;
    for (const Splat& s : splats) {
        require(int(s.color.size()) == canvas.channels, "splat color channel mismatch");
        for (int k = 0; k < 2; ++k) {
            double scale = std::exp(s.log_scales[k]);
            require(scale >= kMinScale && scale <= max_side,
                    "splat scale out of [1e-3, canvas size]");
        }
        ranks.push_back(s.depth_rank);
    }
    std::sort(ranks.begin(), ranks.end());
    for (int i = 0; i < int(ranks.size()); ++i) {
        require(ranks[i] == i, "depth ranks must form a permutation");
    }
}

View make_view(int pose_id, int n_poses) {
    require(n_poses >= 1, "need at least one pose bucket");
    return View{kTwoPi * double(pose_id) / double(n_poses), pose_id};
}

SplatScene pre_rotated(const SplatScene& scene, const View& view) {
    SplatScene out = scene;
    Vec2 center(0.5 * scene.canvas.width, 0.5 * scene.canvas.height);
    Mat2 rv = rot2(view.pose_angle);
    for (Splat& s : out.splats) {
        s.position = rv * (s.position - center) + center;
        s.rotation += view.pose_angle;
    }
    return out;
}

LatentImage render(const SplatScene& scene, const View& view) {
    scene.validate();
    const CanvasDims& cv = scene.canvas;
    LatentImage img = LatentImage::zeros(cv);
    if (scene.splats.empty()) return img;

    Vec2 center(0.5 * cv.width, 0.5 * cv.height);
    Mat2 rv = rot2(view.pose_angle);
    std::vector<int> order = composite_order(scene);

    for (int y = 0; y < cv.height; ++y) {
        for (int x = 0; x < cv.width; ++x) {
            Vec2 q(x + 0.5, y + 0.5);
            double transmit = 1.0;
            for (int i : order) {
                const Splat& s = scene.splats[i];
                Vec2 pos = rv * (s.position - center) + center;
                Mat2 rt = rot2(s.rotation + view.pose_angle).transpose();
                Vec2 u = rt * (q - pos);
                double inv0 = std::exp(-2.0 * s.log_scales[0]);
                double inv1 = std::exp(-2.0 * s.log_scales[1]);
                double w = std::exp(-0.5 * (u[0] * u[0] * inv0 + u[1] * u[1] * inv1));
                double a = sigmoid(s.opacity_logit) * w;
                for (int c = 0; c < cv.channels; ++c) {
                    img.at(y, x, c) += s.color[c] * a * transmit;
                }
                transmit *= 1.0 - a;
            }
        }
    }
    return img;
}

std::vector<SplatGrads> render_grad(const SplatScene& scene, const View& view,
                                    const LatentImage& upstream) {
    scene.validate();
    require(upstream.dims == scene.canvas, "upstream cotangent shape mismatch");
    const CanvasDims& cv = scene.canvas;
    int n = int(scene.splats.size());

    std::vector<SplatGrads> grads(n);
    for (int i = 0; i < n; ++i) grads[i].color = Vec::Zero(cv.channels);
    if (n == 0) return grads;

    Vec2 center(0.5 * cv.width, 0.5 * cv.height);
    Mat2 rv = rot2(view.pose_angle);
    std::vector<int> order = composite_order(scene);

    // Per-pixel forward state, reused in the backward sweep.
    std::vector<double> alpha(n), transmit(n), weight(n);
    std::vector<Vec2> local(n);

    for (int y = 0; y < cv.height; ++y) {
        for (int x = 0; x < cv.width; ++x) {
            Vec2 q(x + 0.5, y + 0.5);
            double t_run = 1.0;
            for (int k = 0; k < n; ++k) {
                const Splat& s = scene.splats[order[k]];
                Vec2 pos = rv * (s.position - center) + center;
                Mat2 rt = rot2(s.rotation + view.pose_angle).transpose();
                Vec2 u = rt * (q - pos);
                double inv0 = std::exp(-2.0 * s.log_scales[0]);
                double inv1 = std::exp(-2.0 * s.log_scales[1]);
                double w = std::exp(-0.5 * (u[0] * u[0] * inv0 + u[1] * u[1] * inv1));
                double a = sigmoid(s.opacity_logit) * w;
                local[k] = u;
                weight[k] = w;
                alpha[k] = a;
                transmit[k] = t_run;
                t_run *= 1.0 - a;
            }

            // Backward over the compositing chain: suffix accumulates the
            // contribution of splats behind k per channel.
            Vec suffix = Vec::Zero(cv.channels);
            for (int k = n - 1; k >= 0; --k) {
                int si = order[k];
                const Splat& s = scene.splats[si];
                SplatGrads& g = grads[si];

                double d_alpha = 0.0;
                for (int c = 0; c < cv.channels; ++c) {
                    double up = upstream.at(y, x, c);
                    g.color[c] += up * alpha[k] * transmit[k];
                    d_alpha += up * (s.color[c] * transmit[k]
                                     - suffix[c] / (1.0 - alpha[k]));
                    suffix[c] += s.color[c] * alpha[k] * transmit[k];
                }

                double op = sigmoid(s.opacity_logit);
                double d_w = d_alpha * op;
                g.opacity_logit += d_alpha * weight[k] * op * (1.0 - op);

                const Vec2& u = local[k];
                double inv0 = std::exp(-2.0 * s.log_scales[0]);
                double inv1 = std::exp(-2.0 * s.log_scales[1]);
                Vec2 dw_du(-weight[k] * u[0] * inv0, -weight[k] * u[1] * inv1);

                g.log_scales[0] += d_w * weight[k] * u[0] * u[0] * inv0;
                g.log_scales[1] += d_w * weight[k] * u[1] * u[1] * inv1;

                double a = s.rotation + view.pose_angle;
                Mat2 r = rot2(a);
                Vec2 pos = rv * (s.position - center) + center;
                Vec2 d = q - pos;
                // u = R^T d; dR^T/da applied to d.
                Mat2 drt;
                drt << -std::sin(a), std::cos(a), -std::cos(a), -std::sin(a);
                g.rotation += d_w * dw_du.dot(drt * d);

                Vec2 dw_dd = r * dw_du;
                g.position += d_w * (-(rv.transpose() * dw_dd));
            }
        }
    }
    return grads;
}

void SplatScene::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write scene file: " + path);
    out << canvas.height << " " << canvas.width << " " << canvas.channels << " "
        << splats.size() << "\n";
    for (const Splat& s : splats) {
        out << format_double(s.position[0]) << " " << format_double(s.position[1]) << " "
            << format_double(s.log_scales[0]) << " " << format_double(s.log_scales[1])
            << " " << format_double(s.rotation);
        for (int c = 0; c < int(s.color.size()); ++c) {
            out << " " << format_double(s.color[c]);
        }
        out << " " << format_double(s.opacity_logit) << " " << s.depth_rank << "\n";
    }
    if (!out) throw std::runtime_error("failed writing scene file: " + path);
}

SplatScene SplatScene::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open scene file: " + path);
    SplatScene scene;
    size_t count = 0;
    in >> scene.canvas.height >> scene.canvas.width >> scene.canvas.channels >> count;
    if (!in) throw std::runtime_error("malformed scene header in " + path);
    for (size_t i = 0; i < count; ++i) {
        Splat s;
        s.color = Vec(scene.canvas.channels);
        in >> s.position[0] >> s.position[1] >> s.log_scales[0] >> s.log_scales[1]
            >> s.rotation;
        for (int c = 0; c < scene.canvas.channels; ++c) in >> s.color[c];
        in >> s.opacity_logit >> s.depth_rank;
        if (!in) throw std::runtime_error("malformed splat line in " + path);
        scene.splats.push_back(std::move(s));
    }
    scene.validate();
    return scene;
}

} // namespace gcslab
