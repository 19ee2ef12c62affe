#pragma once

#include "gcslab/config.hpp"
#include "gcslab/decoder.hpp"
#include "gcslab/losses.hpp"
#include "gcslab/renderer.hpp"
#include "gcslab/teacher.hpp"

#include <cstdint>
#include <vector>

namespace gcslab {

struct MetricsRow {
    int epoch = 0;
    double loss_total = 0.0;
    double loss_cc = 0.0;
    double loss_cg = 0.0;
    double loss_cp = 0.0;
    double dist_mode_mean = 0.0;
    double p85_max = 0.0;
    bool beg_triggered = false;
    double ms = 0.0;
};

struct TrainResult {
    SplatScene scene;
    std::vector<MetricsRow> metrics;
    double initial_dist = 0.0; // mean over all poses, before training
    double final_dist = 0.0;   // mean over all poses, after training
    std::vector<std::uint64_t> eps_star_hashes;
};

/// Splats sampled from a blurred target-mode density; colors small random,
/// opacities mid-range. Deterministic per seed; a single splat lands at the
/// density argmax.
SplatScene init_scene(const GmmTeacher& teacher, const CanvasDims& canvas, int n_splats,
                      std::uint64_t seed, const std::string& condition_label = "target");

/// The optimization loop: per epoch samples views and a timestep triple,
/// evaluates the configured loss with the per-view pinned noise, backprops
/// through the renderer, applies per-group Adam updates, then runs the BEG
/// hook. Deterministic per seed. Writes scene snapshots and final renders
/// under cfg.out_dir when it is non-empty.
TrainResult train(const RunConfig& cfg, const GmmTeacher& teacher, const Decoder& decoder);

/// metrics.csv serialization (RFC-4180, LF endings).
std::string metrics_csv(const std::vector<MetricsRow>& rows);
void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows);

/// Whether a loss kind consumes the run-pinned eps* instead of fresh noise.
bool uses_pinned_noise(LossKind kind);

} // namespace gcslab
