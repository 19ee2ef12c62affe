#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace gcslab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Canvas geometry of a latent image (row-major H x W x C).
struct CanvasDims {
    int height = 16;
    int width = 16;
    int channels = 4;

    int pixel_count() const { return height * width; }
    int size() const { return height * width * channels; }
    bool operator==(const CanvasDims&) const = default;
};

/// Rendered view in latent space, flattened row-major (y, x, c).
struct LatentImage {
    CanvasDims dims;
    Vec data;

    static LatentImage zeros(CanvasDims d) {
        LatentImage img;
        img.dims = d;
        img.data = Vec::Zero(d.size());
        return img;
    }

    double& at(int y, int x, int c) {
        return data[(y * dims.width + x) * dims.channels + c];
    }
    double at(int y, int x, int c) const {
        return data[(y * dims.width + x) * dims.channels + c];
    }
};

/// Decoded RGB image, flattened row-major (y, x, c), 3 channels.
/// Values live in [0,1] after the decoder sigmoid; clamping to [0,1]
/// happens only at export.
struct PixelImage {
    int height = 0;
    int width = 0;
    Vec data;

    static PixelImage zeros(int h, int w) {
        PixelImage img;
        img.height = h;
        img.width = w;
        img.data = Vec::Zero(h * w * 3);
        return img;
    }

    double& at(int y, int x, int c) { return data[(y * width + x) * 3 + c]; }
    double at(int y, int x, int c) const { return data[(y * width + x) * 3 + c]; }
};

/// Conditioning label y. The null condition selects the teacher's full
/// component set.
struct Condition {
    std::string label;
    bool is_null = false;

    static Condition null() { return Condition{"", true}; }
    static Condition of(std::string name) { return Condition{std::move(name), false}; }

    bool operator==(const Condition& other) const {
        if (is_null || other.is_null) return is_null == other.is_null;
        return label == other.label;
    }
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

} // namespace gcslab
