#include "gcslab/renderer.hpp"

#include "gcslab/decoder.hpp"
#include "gcslab/image_io.hpp"
#include "gcslab/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace gcslab;

namespace {

SplatScene random_scene(CanvasDims cv, int n, std::uint64_t seed) {
    Rng rng(seed);
    SplatScene scene;
    scene.canvas = cv;
    for (int i = 0; i < n; ++i) {
        Splat s;
        s.position = Vec2(rng.uniform(1.0, cv.width - 1.0), rng.uniform(1.0, cv.height - 1.0));
        s.log_scales = Vec2(std::log(rng.uniform(0.8, 2.0)), std::log(rng.uniform(0.8, 2.0)));
        s.rotation = rng.uniform(0.0, 3.141592653589793);
        s.color = rng.normal_vec(cv.channels);
        s.opacity_logit = rng.uniform(-1.0, 1.0);
        s.depth_rank = i;
        scene.splats.push_back(std::move(s));
    }
    return scene;
}

double scene_param(SplatScene& scene, int splat, int slot) {
    Splat& s = scene.splats[splat];
    switch (slot) {
        case 0: return s.position[0];
        case 1: return s.position[1];
        case 2: return s.log_scales[0];
        case 3: return s.log_scales[1];
        case 4: return s.rotation;
        case 5: return s.opacity_logit;
        default: return s.color[slot - 6];
    }
}

void set_scene_param(SplatScene& scene, int splat, int slot, double v) {
    Splat& s = scene.splats[splat];
    switch (slot) {
        case 0: s.position[0] = v; break;
        case 1: s.position[1] = v; break;
        case 2: s.log_scales[0] = v; break;
        case 3: s.log_scales[1] = v; break;
        case 4: s.rotation = v; break;
        case 5: s.opacity_logit = v; break;
        default: s.color[slot - 6] = v; break;
    }
}

double grad_param(const SplatGrads& g, int slot) {
    switch (slot) {
        case 0: return g.position[0];
        case 1: return g.position[1];
        case 2: return g.log_scales[0];
        case 3: return g.log_scales[1];
        case 4: return g.rotation;
        case 5: return g.opacity_logit;
        default: return g.color[slot - 6];
    }
}

double loss_under(const SplatScene& scene, const View& view, const LatentImage& upstream) {
    LatentImage img = render(scene, view);
    return img.data.dot(upstream.data);
}

} // namespace

TEST_CASE("empty scene renders zeros") {
    SplatScene scene;
    scene.canvas = CanvasDims{8, 8, 4};
    LatentImage img = render(scene, make_view(0, 8));
    CHECK(img.data.norm() == 0.0);
}

TEST_CASE("single centered isotropic splat") {
    CanvasDims cv{16, 16, 4};
    SplatScene scene;
    scene.canvas = cv;
    Splat s;
    s.position = Vec2(8.0, 8.0);
    s.log_scales = Vec2(std::log(2.0), std::log(2.0));
    s.rotation = 0.0;
    s.color = Vec(4);
    s.color << 0.9, 0.4, -0.3, 0.7;
    s.opacity_logit = 30.0; // opacity -> 1
    s.depth_rank = 0;
    scene.splats.push_back(s);

    LatentImage img = render(scene, View{0.0, 0});
    // Pixel (8,8) has its center at (8.5, 8.5), squared distance 0.5.
    double w_center = std::exp(-0.5 * 0.5 / 4.0);
    for (int c = 0; c < 4; ++c) {
        CHECK(img.at(8, 8, c) == doctest::Approx(s.color[c] * w_center).epsilon(1e-9));
    }
    // Radial decay exp(-r^2 / 2s^2) further out.
    double r2 = std::pow(3.5 - 8.0, 2) + std::pow(8.5 - 8.0, 2);
    CHECK(img.at(8, 3, 0) == doctest::Approx(s.color[0] * std::exp(-0.5 * r2 / 4.0)).epsilon(1e-9));
}

TEST_CASE("compositing is linear in color") {
    SplatScene scene = random_scene(CanvasDims{12, 12, 3}, 6, 101);
    View view = make_view(2, 8);
    LatentImage base = render(scene, view);
    SplatScene scaled = scene;
    for (Splat& s : scaled.splats) s.color *= 2.5;
    LatentImage out = render(scaled, view);
    CHECK((out.data - 2.5 * base.data).norm() < 1e-12 * (1.0 + out.data.norm()));
}

TEST_CASE("rendering is equivariant to pose rotation") {
    SplatScene scene = random_scene(CanvasDims{16, 16, 4}, 8, 103);
    for (int pose = 0; pose < 8; ++pose) {
        View view = make_view(pose, 8);
        LatentImage direct = render(scene, view);
        LatentImage pre = render(pre_rotated(scene, view), View{0.0, 0});
        CHECK((direct.data - pre.data).norm() < 1e-10);
    }
}

TEST_CASE("render_grad matches central finite differences") {
    CanvasDims cv{8, 8, 3};
    Rng rng(107);
    int checked = 0;
    for (int trial = 0; trial < 20; ++trial) {
        SplatScene scene = random_scene(cv, 3, 200 + trial);
        View view = make_view(trial % 8, 8);
        LatentImage upstream;
        upstream.dims = cv;
        upstream.data = rng.normal_vec(cv.size());

        std::vector<SplatGrads> grads = render_grad(scene, view, upstream);
        int slots = 6 + cv.channels;
        for (int splat = 0; splat < 3; ++splat) {
            for (int slot = 0; slot < slots; ++slot) {
                double v = scene_param(scene, splat, slot);
                double delta = 1e-5 * std::max(1.0, std::abs(v));
                SplatScene up = scene, dn = scene;
                set_scene_param(up, splat, slot, v + delta);
                set_scene_param(dn, splat, slot, v - delta);
                double fd = (loss_under(up, view, upstream) - loss_under(dn, view, upstream)) /
                            (2.0 * delta);
                double an = grad_param(grads[splat], slot);
                double tol = (slot >= 6 ? 1e-6 : 1e-4) * std::max(1.0, std::abs(fd));
                CHECK(std::abs(fd - an) <= tol);
                ++checked;
            }
        }
    }
    CHECK(checked >= 20 * 3 * 9);
}

TEST_CASE("zero upstream gives zero gradients") {
    CanvasDims cv{8, 8, 3};
    SplatScene scene = random_scene(cv, 4, 109);
    LatentImage upstream = LatentImage::zeros(cv);
    for (const SplatGrads& g : render_grad(scene, make_view(1, 8), upstream)) {
        CHECK(g.position.norm() == 0.0);
        CHECK(g.color.norm() == 0.0);
        CHECK(g.rotation == 0.0);
        CHECK(g.opacity_logit == 0.0);
    }
}

TEST_CASE("scene validation catches bad scales and ranks") {
    CanvasDims cv{8, 8, 3};
    SplatScene scene = random_scene(cv, 3, 113);
    SUBCASE("scale out of range") {
        scene.splats[0].log_scales[0] = std::log(1e-5);
        CHECK_THROWS_AS(scene.validate(), std::invalid_argument);
    }
    SUBCASE("depth ranks must be a permutation") {
        scene.splats[1].depth_rank = 0;
        CHECK_THROWS_AS(scene.validate(), std::invalid_argument);
    }
}

TEST_CASE("scene serialization round-trips exactly") {
    SplatScene scene = random_scene(CanvasDims{8, 8, 4}, 5, 127);
    std::string path = (std::filesystem::temp_directory_path() / "gcslab_scene.txt").string();
    scene.save(path);
    SplatScene loaded = SplatScene::load(path);
    REQUIRE(loaded.splats.size() == scene.splats.size());
    for (size_t i = 0; i < scene.splats.size(); ++i) {
        CHECK((loaded.splats[i].position - scene.splats[i].position).norm() == 0.0);
        CHECK((loaded.splats[i].color - scene.splats[i].color).norm() == 0.0);
        CHECK(loaded.splats[i].rotation == scene.splats[i].rotation);
        CHECK(loaded.splats[i].opacity_logit == scene.splats[i].opacity_logit);
        CHECK(loaded.splats[i].depth_rank == scene.splats[i].depth_rank);
    }
    std::filesystem::remove(path);
}

TEST_CASE("decoder") {
    CanvasDims cv{6, 6, 4};
    Rng rng(131);

    SUBCASE("identity configuration is the identity map") {
        CanvasDims rgb{6, 6, 3};
        Decoder dec(rgb, DecoderConfig{1, false, true, 0});
        Vec latent = rng.normal_vec(rgb.size());
        CHECK((dec.decode(latent) - latent).norm() == 0.0);
    }
    SUBCASE("deterministic for identical input and seed") {
        Decoder dec(cv, DecoderConfig{2, true, false, 9});
        Vec latent = rng.normal_vec(cv.size());
        CHECK((dec.decode(latent) - dec.decode(latent)).norm() == 0.0);
        Decoder dec2(cv, DecoderConfig{2, true, false, 9});
        CHECK((dec.decode(latent) - dec2.decode(latent)).norm() == 0.0);
    }
    SUBCASE("jvp matches finite differences") {
        Decoder dec(cv, DecoderConfig{2, true, false, 11});
        Vec latent = rng.normal_vec(cv.size());
        Vec tangent = rng.normal_vec(cv.size());
        double delta = 1e-6;
        Vec fd = (dec.decode(latent + delta * tangent) - dec.decode(latent - delta * tangent)) /
                 (2.0 * delta);
        Vec jvp = dec.decode_jvp(latent, tangent);
        CHECK((fd - jvp).norm() < 1e-5 * (1.0 + jvp.norm()));
    }
    SUBCASE("vjp is the adjoint of jvp") {
        Decoder dec(cv, DecoderConfig{2, true, false, 13});
        Vec latent = rng.normal_vec(cv.size());
        Vec tangent = rng.normal_vec(cv.size());
        Vec cot = rng.normal_vec(cv.height * 2 * cv.width * 2 * 3);
        double a = dec.decode_jvp(latent, tangent).dot(cot);
        double b = dec.decode_vjp(latent, cot).dot(tangent);
        CHECK(a == doctest::Approx(b).epsilon(1e-12));
    }
    SUBCASE("1-Lipschitz in sup norm on random pairs") {
        Decoder dec(cv, DecoderConfig{2, true, false, 17});
        for (int i = 0; i < 50; ++i) {
            Vec a = rng.normal_vec(cv.size()), b = rng.normal_vec(cv.size());
            double out_gap = (dec.decode(a) - dec.decode(b)).cwiseAbs().maxCoeff();
            double in_gap = (a - b).cwiseAbs().maxCoeff();
            CHECK(out_gap <= in_gap + 1e-12);
        }
    }
    SUBCASE("shape mismatch rejected") {
        Decoder dec(cv, DecoderConfig{});
        CHECK_THROWS_AS(dec.decode(rng.normal_vec(7)), std::invalid_argument);
    }
}

TEST_CASE("image export formats") {
    SUBCASE("ppm header and payload") {
        PixelImage img = PixelImage::zeros(2, 3);
        img.data.setConstant(1.0);
        std::string bytes = ppm_bytes(img);
        CHECK(bytes.substr(0, 11) == "P6\n3 2\n255\n");
        CHECK(bytes.size() == 11 + 2 * 3 * 3);
        for (size_t i = 11; i < bytes.size(); ++i) {
            CHECK(static_cast<unsigned char>(bytes[i]) == 255);
        }
    }
    SUBCASE("latent preview clamps to [0,1]") {
        LatentImage img = LatentImage::zeros(CanvasDims{1, 1, 4});
        img.data << -1.0, 0.5, 2.0, 0.0;
        std::string bytes = ppm_bytes(img);
        CHECK(static_cast<unsigned char>(bytes[bytes.size() - 3]) == 0);
        CHECK(static_cast<unsigned char>(bytes[bytes.size() - 2]) == 128);
        CHECK(static_cast<unsigned char>(bytes[bytes.size() - 1]) == 255);
    }
    SUBCASE("pgm per-channel export") {
        LatentImage img = LatentImage::zeros(CanvasDims{2, 2, 2});
        for (int y = 0; y < 2; ++y) {
            for (int x = 0; x < 2; ++x) img.at(y, x, 1) = 1.0;
        }
        std::string bytes = pgm_bytes(img, 1);
        CHECK(bytes.substr(0, 11) == "P5\n2 2\n255\n");
        for (size_t i = 11; i < bytes.size(); ++i) {
            CHECK(static_cast<unsigned char>(bytes[i]) == 255);
        }
        CHECK_THROWS_AS(pgm_bytes(img, 5), std::invalid_argument);
    }
}
