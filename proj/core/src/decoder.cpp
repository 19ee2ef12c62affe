#include "gcslab/decoder.hpp"

#include "gcslab/rng.hpp"

#include <cmath>

namespace gcslab {

namespace {

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

} // namespace

Decoder::Decoder(CanvasDims latent_dims, DecoderConfig config)
    : latent_dims_(latent_dims), config_(config) {
    require(config_.upsample >= 1, "decoder upsample factor must be >= 1");
    int c = latent_dims_.channels;
    if (config_.identity_mixing) {
        require(c == 3, "identity mixing requires 3 latent channels");
        mixing_ = Mat::Identity(3, 3);
        return;
    }
    Rng rng(config_.seed);
    mixing_ = Mat(3, c);
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < c; ++j) mixing_(i, j) = rng.normal();
        double l1 = mixing_.row(i).cwiseAbs().sum();
        if (l1 > 0.0) mixing_.row(i) *= 2.0 / l1;
    }
}

Vec Decoder::pre_activation(const Vec& latent) const {
    require(int(latent.size()) == latent_dims_.size(), "decoder latent shape mismatch");
    int h = latent_dims_.height, w = latent_dims_.width, c = latent_dims_.channels;
    int f = config_.upsample;
    Vec out(h * f * w * f * 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            Eigen::Map<const Vec> chan(latent.data() + (y * w + x) * c, c);
            Eigen::Vector3d rgb = mixing_ * chan;
            for (int dy = 0; dy < f; ++dy) {
                for (int dx = 0; dx < f; ++dx) {
                    int base = ((y * f + dy) * (w * f) + (x * f + dx)) * 3;
                    out[base + 0] = rgb[0];
                    out[base + 1] = rgb[1];
                    out[base + 2] = rgb[2];
                }
            }
        }
    }
    return out;
}

Vec Decoder::decode(const Vec& latent) const {
    Vec out = pre_activation(latent);
    if (config_.sigmoid) {
        for (long i = 0; i < out.size(); ++i) out[i] = sigmoid(out[i]);
    }
    return out;
}

Vec Decoder::decode_jvp(const Vec& latent, const Vec& tangent) const {
    Vec out = pre_activation(tangent);
    if (config_.sigmoid) {
        Vec z = pre_activation(latent);
        for (long i = 0; i < out.size(); ++i) {
            double s = sigmoid(z[i]);
            out[i] *= s * (1.0 - s);
        }
    }
    return out;
}

Vec Decoder::decode_vjp(const Vec& latent, const Vec& cot) const {
    int h = latent_dims_.height, w = latent_dims_.width, c = latent_dims_.channels;
    int f = config_.upsample;
    require(int(cot.size()) == h * f * w * f * 3, "decoder cotangent shape mismatch");

    Vec scaled = cot;
    if (config_.sigmoid) {
        Vec z = pre_activation(latent);
        for (long i = 0; i < scaled.size(); ++i) {
            double s = sigmoid(z[i]);
            scaled[i] *= s * (1.0 - s);
        }
    }
    Vec out = Vec::Zero(latent.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            Eigen::Vector3d acc = Eigen::Vector3d::Zero();
            for (int dy = 0; dy < f; ++dy) {
                for (int dx = 0; dx < f; ++dx) {
                    int base = ((y * f + dy) * (w * f) + (x * f + dx)) * 3;
                    acc += Eigen::Vector3d(scaled[base], scaled[base + 1], scaled[base + 2]);
                }
            }
            Eigen::Map<Vec>(out.data() + (y * w + x) * c, c) += mixing_.transpose() * acc;
        }
    }
    return out;
}

PixelImage Decoder::decode_image(const LatentImage& latent) const {
    require(latent.dims == latent_dims_, "decoder latent dims mismatch");
    PixelImage img;
    img.height = out_height();
    img.width = out_width();
    img.data = decode(latent.data);
    return img;
}

} // namespace gcslab
