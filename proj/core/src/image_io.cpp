#include "gcslab/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace gcslab {

namespace {

unsigned char to_byte(double v) {
    double c = std::clamp(v, 0.0, 1.0);
    return static_cast<unsigned char>(std::lround(c * 255.0));
}

void write_bytes(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write image file: " + path);
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out) throw std::runtime_error("failed writing image file: " + path);
}

} // namespace

std::string ppm_bytes(const PixelImage& img) {
    std::string out = "P6\n" + std::to_string(img.width) + " " +
                      std::to_string(img.height) + "\n255\n";
    out.reserve(out.size() + size_t(img.data.size()));
    for (long i = 0; i < img.data.size(); ++i) out.push_back(char(to_byte(img.data[i])));
    return out;
}

void write_ppm(const std::string& path, const PixelImage& img) {
    write_bytes(path, ppm_bytes(img));
}

std::string ppm_bytes(const LatentImage& img) {
    require(img.dims.channels >= 3, "latent PPM preview needs >= 3 channels");
    std::string out = "P6\n" + std::to_string(img.dims.width) + " " +
                      std::to_string(img.dims.height) + "\n255\n";
    for (int y = 0; y < img.dims.height; ++y) {
        for (int x = 0; x < img.dims.width; ++x) {
            for (int c = 0; c < 3; ++c) out.push_back(char(to_byte(img.at(y, x, c))));
        }
    }
    return out;
}

void write_ppm(const std::string& path, const LatentImage& img) {
    write_bytes(path, ppm_bytes(img));
}

std::string pgm_bytes(const LatentImage& img, int channel) {
    require(channel >= 0 && channel < img.dims.channels, "PGM channel out of range");
    std::string out = "P5\n" + std::to_string(img.dims.width) + " " +
                      std::to_string(img.dims.height) + "\n255\n";
    for (int y = 0; y < img.dims.height; ++y) {
        for (int x = 0; x < img.dims.width; ++x) {
            out.push_back(char(to_byte(img.at(y, x, channel))));
        }
    }
    return out;
}

void write_pgm(const std::string& path, const LatentImage& img, int channel) {
    write_bytes(path, pgm_bytes(img, channel));
}

} // namespace gcslab
