#include "gcslab/trainer.hpp"

#include "gcslab/adam.hpp"
#include "gcslab/harness.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>

using namespace gcslab;

namespace {

// Reference Adam written out longhand, independent of the library path.
void reference_adam(Vec& theta, const Vec& g, Vec& m, Vec& v, int step, double lr,
                    double b1, double b2, double eps) {
    for (int i = 0; i < theta.size(); ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        double mhat = m[i] / (1.0 - std::pow(b1, step));
        double vhat = v[i] / (1.0 - std::pow(b2, step));
        theta[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

RunConfig tiny_config(std::uint64_t seed) {
    RunConfig cfg;
    cfg.seed = seed;
    cfg.epochs = 5;
    cfg.batch = 2;
    cfg.n_splats = 6;
    cfg.n_poses = 4;
    cfg.canvas = CanvasDims{6, 6, 3};
    cfg.teacher_variance = 0.04;
    cfg.loss.kind = LossKind::Gcs;
    cfg.loss.cfg_weight = 7.5;
    cfg.out_dir = "";
    cfg.snapshot_every = 0;
    return cfg;
}

} // namespace

TEST_CASE("adam matches the bias-corrected reference formula on two parameters") {
    AdamConfig cfg{0.1, 0.9, 0.999, 1e-8};
    Adam opt(2, cfg);
    Vec theta(2), m = Vec::Zero(2), v = Vec::Zero(2), ref = Vec::Zero(2);
    theta << 1.0, -2.0;
    ref = theta;

    Vec g1(2), g2(2);
    g1 << 0.5, -0.25;
    g2 << -0.1, 0.75;

    opt.step(theta, g1);
    reference_adam(ref, g1, m, v, 1, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
    CHECK((theta - ref).cwiseAbs().maxCoeff() < 1e-10);

    opt.step(theta, g2);
    reference_adam(ref, g2, m, v, 2, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
    CHECK((theta - ref).cwiseAbs().maxCoeff() < 1e-10);

    // First step against hand numbers: theta -= lr * sign-ish update.
    Vec fresh(2);
    fresh << 1.0, -2.0;
    Adam once(2, cfg);
    once.step(fresh, g1);
    CHECK(fresh[0] == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8)).epsilon(1e-12));
    CHECK(fresh[1] == doctest::Approx(-2.0 + 0.1 * 0.25 / (0.25 + 1e-8)).epsilon(1e-12));
}

TEST_CASE("init_scene") {
    RunConfig cfg = tiny_config(7);
    GmmTeacher teacher = build_reference_teacher(cfg);

    SUBCASE("deterministic per seed") {
        SplatScene a = init_scene(teacher, cfg.canvas, 8, 42);
        SplatScene b = init_scene(teacher, cfg.canvas, 8, 42);
        REQUIRE(a.splats.size() == b.splats.size());
        for (size_t i = 0; i < a.splats.size(); ++i) {
            CHECK((a.splats[i].position - b.splats[i].position).norm() == 0.0);
            CHECK((a.splats[i].color - b.splats[i].color).norm() == 0.0);
        }
        SplatScene c = init_scene(teacher, cfg.canvas, 8, 43);
        double diff = 0.0;
        for (size_t i = 0; i < a.splats.size(); ++i) {
            diff += (a.splats[i].position - c.splats[i].position).norm();
        }
        CHECK(diff > 0.0);
    }
    SUBCASE("single splat lands at the density argmax") {
        SplatScene one = init_scene(teacher, cfg.canvas, 1, 11);
        REQUIRE(one.splats.size() == 1);

        const Vec& mode = teacher.component(0).mean;
        // Recompute the blurred density argmax independently.
        int h = cfg.canvas.height, w = cfg.canvas.width, ch = cfg.canvas.channels;
        double best = -1.0;
        int best_pix = 0;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        int yy = y + dy, xx = x + dx;
                        if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
                        for (int k = 0; k < ch; ++k) {
                            acc += std::abs(mode[(yy * w + xx) * ch + k]);
                        }
                    }
                }
                if (acc > best) {
                    best = acc;
                    best_pix = y * w + x;
                }
            }
        }
        int px = best_pix % w, py = best_pix / w;
        CHECK(one.splats[0].position[0] >= px);
        CHECK(one.splats[0].position[0] <= px + 1);
        CHECK(one.splats[0].position[1] >= py);
        CHECK(one.splats[0].position[1] <= py + 1);
    }
    SUBCASE("rejects zero splats") {
        CHECK_THROWS_AS(init_scene(teacher, cfg.canvas, 0, 1), std::invalid_argument);
    }
}

TEST_CASE("train is deterministic per seed") {
    RunConfig cfg = tiny_config(21);
    GmmTeacher teacher = build_reference_teacher(cfg);
    Decoder decoder(cfg.canvas, DecoderConfig{2, true, false, cfg.decoder_seed});

    TrainResult a = train(cfg, teacher, decoder);
    TrainResult b = train(cfg, teacher, decoder);
    REQUIRE(a.metrics.size() == b.metrics.size());
    for (size_t i = 0; i < a.metrics.size(); ++i) {
        CHECK(a.metrics[i].loss_total == b.metrics[i].loss_total);
        CHECK(a.metrics[i].dist_mode_mean == b.metrics[i].dist_mode_mean);
        CHECK(a.metrics[i].p85_max == b.metrics[i].p85_max);
        CHECK(a.metrics[i].beg_triggered == b.metrics[i].beg_triggered);
    }
    CHECK(a.eps_star_hashes == b.eps_star_hashes);
    for (size_t i = 0; i < a.scene.splats.size(); ++i) {
        CHECK((a.scene.splats[i].color - b.scene.splats[i].color).norm() == 0.0);
    }
}

TEST_CASE("metrics stay finite across fuzzed configurations") {
    for (std::uint64_t seed : {101ull, 202ull}) {
        for (LossKind kind : {LossKind::SdsCfg, LossKind::Cds, LossKind::Cc, LossKind::Gcs}) {
            RunConfig cfg = tiny_config(seed);
            cfg.loss.kind = kind;
            cfg.epochs = 3;
            GmmTeacher teacher = build_reference_teacher(cfg);
            Decoder decoder(cfg.canvas, DecoderConfig{2, true, false, cfg.decoder_seed});
            TrainResult r = train(cfg, teacher, decoder);
            for (const MetricsRow& row : r.metrics) {
                CHECK(std::isfinite(row.loss_total));
                CHECK(std::isfinite(row.dist_mode_mean));
                CHECK(std::isfinite(row.p85_max));
            }
        }
    }
}

TEST_CASE("non-finite losses abort with a diagnostic dump") {
    RunConfig cfg = tiny_config(31);
    cfg.loss.kind = LossKind::SdsCfg;
    // A teacher mean far beyond double range blows up the posterior.
    std::vector<GmmTeacher::Component> comps;
    comps.push_back({1.0, 0.1, Vec::Constant(cfg.canvas.size(), 1e308), {"target"}});
    GmmTeacher teacher(std::move(comps), cfg.canvas.size());
    Decoder decoder(cfg.canvas, DecoderConfig{2, true, false, cfg.decoder_seed});
    CHECK_THROWS_WITH_AS(train(cfg, teacher, decoder),
                         doctest::Contains("non-finite loss"), std::runtime_error);
}

TEST_CASE("metrics csv schema") {
    std::vector<MetricsRow> rows(2);
    rows[0].epoch = 0;
    rows[1].epoch = 1;
    rows[1].beg_triggered = true;
    std::string csv = metrics_csv(rows);
    CHECK(csv.rfind("epoch,loss_total,loss_cc,loss_cg,loss_cp,dist_mode_mean,p85_max,"
                    "beg_triggered,ms\n",
                    0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    CHECK(csv.find("\r") == std::string::npos);
}
