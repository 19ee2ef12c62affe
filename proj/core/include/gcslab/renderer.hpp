#pragma once

#include "gcslab/types.hpp"

#include <string>
#include <vector>

namespace gcslab {

/// One anisotropic 2D Gaussian splat. Colors live in latent channels;
/// depth_rank fixes the compositing order (lower rank composites first).
struct Splat {
    Vec2 position = Vec2::Zero();     // canvas units
    Vec2 log_scales = Vec2::Zero();
    double rotation = 0.0;            // radians
    Vec color;                        // latent channels
    double opacity_logit = 0.0;
    int depth_rank = 0;
};

/// Learnable 2D-splat scene, the 3DGS analog.
struct SplatScene {
    CanvasDims canvas;
    std::vector<Splat> splats;

    /// Checks scale bounds, color dims, and that depth ranks form a
    /// permutation. Throws on violation.
    void validate() const;

    void save(const std::string& path) const;
    static SplatScene load(const std::string& path);
};

/// Rotational pose bucket standing in for a camera.
struct View {
    double pose_angle = 0.0;
    int pose_id = 0;
};

View make_view(int pose_id, int n_poses);

/// Rasterizes the scene from the view: splat positions and orientations are
/// rotated about the canvas center, footprints composited front-to-back in
/// depth_rank order over a zero background.
LatentImage render(const SplatScene& scene, const View& view);

struct SplatGrads {
    Vec2 position = Vec2::Zero();
    Vec2 log_scales = Vec2::Zero();
    double rotation = 0.0;
    Vec color;
    double opacity_logit = 0.0;
};

/// Exact analytic gradients of render() w.r.t. every splat parameter,
/// contracted with the upstream latent-shaped cotangent.
std::vector<SplatGrads> render_grad(const SplatScene& scene, const View& view,
                                    const LatentImage& upstream);

/// Applies the view rotation to the scene parameters; render(scene, view)
/// equals render(pre_rotated(scene, view), pose 0).
SplatScene pre_rotated(const SplatScene& scene, const View& view);

} // namespace gcslab
