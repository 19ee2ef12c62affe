#pragma once

#include "gcslab/types.hpp"

#include <cstdint>

namespace gcslab {

struct DecoderConfig {
    int upsample = 2;            // nearest-neighbor factor
    bool sigmoid = true;
    bool identity_mixing = false; // requires 3 latent channels
    std::uint64_t seed = 7;
};

/// Fixed nonlinear map from latent images to RGB pixel images: a seeded
/// dense channel mix per pixel, nearest upsample, then elementwise sigmoid.
/// Frozen per run; rows of the mixing matrix are scaled so the decoder is
/// (well under) 1-Lipschitz in sup norm after the sigmoid.
class Decoder {
public:
    Decoder(CanvasDims latent_dims, DecoderConfig config = {});

    const CanvasDims& latent_dims() const { return latent_dims_; }
    int out_height() const { return latent_dims_.height * config_.upsample; }
    int out_width() const { return latent_dims_.width * config_.upsample; }
    const Mat& mixing() const { return mixing_; }

    /// Flattened-latent form used by the losses.
    Vec decode(const Vec& latent) const;
    Vec decode_jvp(const Vec& latent, const Vec& tangent) const;
    Vec decode_vjp(const Vec& latent, const Vec& cot) const;

    PixelImage decode_image(const LatentImage& latent) const;

private:
    Vec pre_activation(const Vec& latent) const;

    CanvasDims latent_dims_;
    DecoderConfig config_;
    Mat mixing_; // 3 x channels
};

} // namespace gcslab
