#include "gcslab/beg.hpp"

#include <algorithm>
#include <cmath>

namespace gcslab {

void BegConfig::validate() const {
    require(m > 0.0 && m < 100.0, "beg percentile must be in (0, 100)");
    require(t_gs > 0.0 && t_gs <= 1.0, "beg t_gs must be in (0, 1]");
    require(t_b > 0.0 && t_b <= 1.0, "beg t_b must be in (0, 1]");
}

Vec brightness(const PixelImage& img) {
    require(img.data.size() == long(img.height) * img.width * 3,
            "brightness expects a 3-channel image");
    int n = img.height * img.width;
    Vec out(n);
    for (int i = 0; i < n; ++i) {
        out[i] = (img.data[i * 3] + img.data[i * 3 + 1] + img.data[i * 3 + 2]) / 3.0;
    }
    return out;
}

double percentile(const Vec& values, double m) {
    require(values.size() > 0, "percentile of empty input");
    require(m > 0.0 && m <= 100.0, "percentile rank out of range");
    std::vector<double> sorted(values.data(), values.data() + values.size());
    std::sort(sorted.begin(), sorted.end());
    long rank = long(std::ceil(m / 100.0 * double(sorted.size())));
    rank = std::clamp(rank, 1L, long(sorted.size()));
    return sorted[rank - 1];
}

BrightnessReport beg_check(const std::vector<PixelImage>& batch, const BegConfig& cfg) {
    cfg.validate();
    require(!batch.empty(), "beg_check on empty batch");
    BrightnessReport report;
    report.max = -std::numeric_limits<double>::infinity();
    for (const PixelImage& img : batch) {
        double p = percentile(brightness(img), cfg.m);
        report.percentiles.push_back(p);
        report.max = std::max(report.max, p);
    }
    report.triggered = report.max > cfg.t_gs;
    return report;
}

SplatScene beg_apply(const SplatScene& scene, const BegConfig& cfg) {
    cfg.validate();
    SplatScene out = scene;
    for (Splat& s : out.splats) s.color *= cfg.t_b;
    return out;
}

} // namespace gcslab
