#pragma once

#include "gcslab/renderer.hpp"
#include "gcslab/types.hpp"

#include <vector>

namespace gcslab {

struct BegConfig {
    double m = 85.0;    // percentile
    double t_gs = 0.9;  // detection threshold on max(P_m)
    double t_b = 0.8;   // multiplicative reset factor

    void validate() const;
};

struct BrightnessReport {
    std::vector<double> percentiles; // p_m per image
    double max = 0.0;
    bool triggered = false;
};

/// Per-pixel mean of the three channels.
Vec brightness(const PixelImage& img);

/// Nearest-rank percentile: sorted value at index ceil(m/100 * n) - 1.
double percentile(const Vec& values, double m);

/// Over-exposure detection on a rendered batch: triggered iff
/// max over images of the m-th brightness percentile exceeds t_gs (strict).
BrightnessReport beg_check(const std::vector<PixelImage>& batch, const BegConfig& cfg);

/// Multiplies every splat's color by t_b; everything else unchanged.
SplatScene beg_apply(const SplatScene& scene, const BegConfig& cfg);

} // namespace gcslab
