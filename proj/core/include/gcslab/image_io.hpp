#pragma once

#include "gcslab/types.hpp"

#include <string>

namespace gcslab {

/// Binary PPM P6 (8-bit, max 255, row-major, no comments). Values are
/// clamped to [0,1] here and nowhere earlier.
std::string ppm_bytes(const PixelImage& img);
void write_ppm(const std::string& path, const PixelImage& img);

/// Raw latent preview: channels 0..2 clamped to [0,1] as RGB.
std::string ppm_bytes(const LatentImage& img);
void write_ppm(const std::string& path, const LatentImage& img);

/// Binary PGM P5 of one latent channel, clamped to [0,1].
std::string pgm_bytes(const LatentImage& img, int channel);
void write_pgm(const std::string& path, const LatentImage& img, int channel);

} // namespace gcslab
