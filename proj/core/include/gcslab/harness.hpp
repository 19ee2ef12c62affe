#pragma once

#include "gcslab/config.hpp"
#include "gcslab/trainer.hpp"

#include <string>
#include <vector>

namespace gcslab {

/// Least-squares line fit with R^2 and the slope's standard error.
struct FitResult {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    double slope_stderr = 0.0;
};

FitResult fit_line(const std::vector<double>& xs, const std::vector<double>& ys);

/// A named sweep over one RunConfig key.
struct ExperimentPreset {
    std::string name;
    RunConfig base;
    std::string swept_key;
    std::vector<std::string> values;
    std::vector<std::uint64_t> seeds;

    void validate() const;
    std::vector<RunConfig> materialize() const;
};

/// Output root resolution: relative out.dir is rooted at $GCSLAB_OUT when set.
std::string resolve_out_dir(const std::string& out_dir);

/// Procedurally built mixture teacher: renders of a hidden reference scene
/// per pose (targets) plus renders of a decoy scene (distractors).
GmmTeacher build_reference_teacher(const RunConfig& cfg);

/// Loads cfg.teacher_file, or builds the reference teacher and saves it to
/// <out_dir>/teacher.txt, updating cfg.teacher_file for the run.lock echo.
GmmTeacher load_or_build_teacher(RunConfig& cfg, const std::string& out_dir);

struct TrainOutput {
    TrainResult result;
    std::string out_dir;
    std::string metrics_path;
    std::string lock_path;
};

/// Full training entry point: resolves outputs, pins run.lock, trains,
/// writes metrics.csv and plot data.
TrainOutput run_train(RunConfig cfg);

struct SweepDtResult {
    std::vector<double> deltas;  // actual grid spacing per run
    std::vector<double> errors;  // sup endpoint error vs rk4
    FitResult fit;               // log-log
};

SweepDtResult run_sweep_dt(RunConfig cfg, const std::vector<int>& deltas, int order,
                           const std::string& csv_path = "");

struct VerifyBoundResult {
    FitResult order1;
    FitResult order2;
    FitResult growth; // endpoint error vs (T - e) at fixed delta-t
};

/// The Lemma-style empirical check: endpoint error vs rk4 over a delta-t
/// ladder for both solver orders, plus the affine-in-(T - e) growth fit.
VerifyBoundResult run_verify_bound(RunConfig cfg);

struct BegAbResult {
    std::vector<double> p85_disabled;
    std::vector<double> p85_enabled;
    double final_disabled = 0.0;
    double final_enabled = 0.0;
};

/// Brightness-inflating driver (gradient ascent on decoded brightness) run
/// twice from the same seed, with and without the BEG hook.
BegAbResult run_beg_ab(RunConfig cfg, int epochs = 200);

struct AblateResult {
    std::vector<std::string> names;
    std::vector<double> final_dist;
    std::vector<std::vector<MetricsRow>> metrics;
};

/// Loss-zoo comparison presets: sds (DreamFusion-style, w=100), isd
/// (LucidDreamer-style, w=7.5), cds (Consistent3D-style, w=50), cc, cc+cg,
/// gcs (w=7.5).
LossSpec ablate_preset(const std::string& token, const LossSpec& base);
AblateResult run_ablate(RunConfig cfg, const std::vector<std::string>& tokens);

enum class PlotKind { LossCurves, Brightness, SlopeFit, Ablation };
PlotKind plot_kind_from_string(const std::string& name);

/// Tidy (x, y, series) CSV for the metrics-table kinds.
void emit_plotdata(const std::string& path, const std::vector<MetricsRow>& metrics,
                   PlotKind kind);
void emit_slope_fit(const std::string& path, const FitResult& fit);
void emit_ablation(const std::string& path, const AblateResult& result);

} // namespace gcslab
