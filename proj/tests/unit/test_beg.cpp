#include "gcslab/beg.hpp"

#include "gcslab/decoder.hpp"
#include "gcslab/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace gcslab;

namespace {

PixelImage constant_image(int h, int w, double v) {
    PixelImage img = PixelImage::zeros(h, w);
    img.data.setConstant(v);
    return img;
}

} // namespace

TEST_CASE("brightness is the channel mean") {
    PixelImage img = PixelImage::zeros(1, 1);
    img.data << 0.2, 0.4, 0.6;
    CHECK(brightness(img)[0] == doctest::Approx(0.4));

    PixelImage gray = constant_image(4, 4, 0.37);
    Vec b = brightness(gray);
    for (int i = 0; i < b.size(); ++i) CHECK(b[i] == doctest::Approx(0.37));

    PixelImage scaled = gray;
    scaled.data *= 2.0;
    CHECK((brightness(scaled) - 2.0 * brightness(gray)).norm() < 1e-15);
}

TEST_CASE("nearest-rank percentile") {
    SUBCASE("constant field") {
        Vec v = Vec::Constant(17, 0.42);
        for (double m : {10.0, 50.0, 85.0, 99.0}) {
            CHECK(percentile(v, m) == doctest::Approx(0.42));
        }
    }
    SUBCASE("hand-computed rank on ten values") {
        Vec v(10);
        v << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0;
        // ceil(0.85 * 10) = 9 -> ninth smallest.
        CHECK(percentile(v, 85.0) == doctest::Approx(0.9));
    }
    SUBCASE("permutation invariance") {
        Rng rng(3);
        Vec v = rng.normal_vec(64);
        Vec shuffled = v;
        for (int i = 63; i > 0; --i) std::swap(shuffled[i], shuffled[rng.uniform_int(0, i)]);
        CHECK(percentile(v, 85.0) == percentile(shuffled, 85.0));
    }
    SUBCASE("empty input rejected") {
        CHECK_THROWS_AS(percentile(Vec(), 85.0), std::invalid_argument);
    }
}

TEST_CASE("beg_check trigger semantics") {
    BegConfig cfg;
    SUBCASE("above threshold triggers") {
        BrightnessReport r = beg_check({constant_image(4, 4, 0.95)}, cfg);
        CHECK(r.triggered);
        CHECK(r.max == doctest::Approx(0.95));
    }
    SUBCASE("below threshold does not trigger") {
        BrightnessReport r = beg_check({constant_image(4, 4, 0.85)}, cfg);
        CHECK_FALSE(r.triggered);
    }
    SUBCASE("exactly at threshold does not trigger (strict inequality)") {
        BrightnessReport r = beg_check({constant_image(4, 4, 0.9)}, cfg);
        CHECK_FALSE(r.triggered);
    }
    SUBCASE("max over the batch") {
        BrightnessReport r =
            beg_check({constant_image(4, 4, 0.5), constant_image(4, 4, 0.95)}, cfg);
        CHECK(r.triggered);
        CHECK(r.percentiles.size() == 2);
        CHECK(r.max == doctest::Approx(0.95));
    }
    SUBCASE("empty batch rejected") {
        CHECK_THROWS_AS(beg_check({}, cfg), std::invalid_argument);
    }
}

TEST_CASE("beg_check is monotone under pointwise-brighter batches") {
    Rng rng(7);
    BegConfig cfg;
    for (int trial = 0; trial < 200; ++trial) {
        PixelImage img = PixelImage::zeros(4, 4);
        for (long i = 0; i < img.data.size(); ++i) img.data[i] = rng.uniform();
        PixelImage brighter = img;
        for (long i = 0; i < img.data.size(); ++i) brighter.data[i] += rng.uniform() * 0.2;
        bool a = beg_check({img}, cfg).triggered;
        bool b = beg_check({brighter}, cfg).triggered;
        if (a) CHECK(b);
    }
}

TEST_CASE("beg_apply") {
    CanvasDims cv{8, 8, 4};
    Rng rng(11);
    SplatScene scene;
    scene.canvas = cv;
    for (int i = 0; i < 4; ++i) {
        Splat s;
        s.position = Vec2(rng.uniform(1.0, 7.0), rng.uniform(1.0, 7.0));
        s.log_scales = Vec2(0.0, 0.2);
        s.rotation = 0.4 * i;
        s.color = rng.normal_vec(4);
        s.opacity_logit = 0.3;
        s.depth_rank = i;
        scene.splats.push_back(s);
    }
    BegConfig cfg;

    SUBCASE("colors scaled by t_b, everything else untouched") {
        SplatScene out = beg_apply(scene, cfg);
        Vec expected(4);
        expected << 0.8, 0.4, 0.2, 0.08;
        SplatScene probe = scene;
        probe.splats[0].color << 1.0, 0.5, 0.25, 0.1;
        SplatScene probe_out = beg_apply(probe, cfg);
        CHECK((probe_out.splats[0].color - expected).norm() < 1e-15);
        for (size_t i = 0; i < scene.splats.size(); ++i) {
            CHECK((out.splats[i].color - cfg.t_b * scene.splats[i].color).norm() == 0.0);
            CHECK(out.splats[i].position == scene.splats[i].position);
            CHECK(out.splats[i].opacity_logit == scene.splats[i].opacity_logit);
        }
    }
    SUBCASE("t_b = 1 is the identity") {
        BegConfig id = cfg;
        id.t_b = 1.0;
        SplatScene out = beg_apply(scene, id);
        for (size_t i = 0; i < scene.splats.size(); ++i) {
            CHECK((out.splats[i].color - scene.splats[i].color).norm() == 0.0);
        }
    }
    SUBCASE("render commutes with the reset: render(beg_apply(s)) = t_b render(s)") {
        View view = make_view(3, 8);
        LatentImage before = render(scene, view);
        LatentImage after = render(beg_apply(scene, cfg), view);
        CHECK((after.data - 0.8 * before.data).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("applying twice scales colors by t_b^2") {
        SplatScene twice = beg_apply(beg_apply(scene, cfg), cfg);
        for (size_t i = 0; i < scene.splats.size(); ++i) {
            CHECK((twice.splats[i].color - cfg.t_b * cfg.t_b * scene.splats[i].color)
                      .cwiseAbs()
                      .maxCoeff() < 1e-15);
        }
    }
    SUBCASE("invalid configs rejected") {
        BegConfig bad = cfg;
        bad.t_b = 0.0;
        CHECK_THROWS_AS(beg_apply(scene, bad), std::invalid_argument);
        bad = cfg;
        bad.m = 100.0;
        CHECK_THROWS_AS(beg_apply(scene, bad), std::invalid_argument);
    }
}

TEST_CASE("reset scales brightness percentiles exactly in linear-decoder mode") {
    CanvasDims cv{8, 8, 4};
    Rng rng(13);
    SplatScene scene;
    scene.canvas = cv;
    for (int i = 0; i < 5; ++i) {
        Splat s;
        s.position = Vec2(rng.uniform(1.0, 7.0), rng.uniform(1.0, 7.0));
        s.log_scales = Vec2(0.1, 0.3);
        s.rotation = 0.2 * i;
        s.color = rng.normal_vec(4).cwiseAbs();
        s.opacity_logit = 0.5;
        s.depth_rank = i;
        scene.splats.push_back(s);
    }
    Decoder linear(cv, DecoderConfig{2, false, false, 21});
    BegConfig cfg;

    auto p85 = [&](const SplatScene& sc) {
        PixelImage px = linear.decode_image(render(sc, make_view(0, 8)));
        return percentile(brightness(px), cfg.m);
    };
    double before = p85(scene);
    double after = p85(beg_apply(scene, cfg));
    CHECK(after == doctest::Approx(cfg.t_b * before).epsilon(1e-12));
}
