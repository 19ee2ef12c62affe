#pragma once

#include "gcslab/decoder.hpp"
#include "gcslab/schedule.hpp"
#include "gcslab/solver.hpp"
#include "gcslab/teacher.hpp"
#include "gcslab/types.hpp"

#include <map>
#include <string>

namespace gcslab {

enum class LossKind { Sds, SdsCfg, Csd, Isd, IsdCfg, Cds, Cc, Cg, Cp, Gcs };

LossKind loss_kind_from_string(const std::string& name);
std::string to_string(LossKind kind);

enum class WeightFn { Unit, Snr };

WeightFn weight_fn_from_string(const std::string& name);
std::string to_string(WeightFn fn);

struct LossSpec {
    LossKind kind = LossKind::Gcs;
    double cfg_weight = 7.5;       // w
    double w_cc = 1.0, w_cg = 1.0, w_cp = 1.0;
    WeightFn omega = WeightFn::Unit;
    WeightFn c_fn = WeightFn::Unit;
    GradMode grad_mode = GradMode::StopGrad;
    double cg_cfg_weight = 7.5;    // CFG inside the CG/CP solution step
    CfgMode cfg_mode = CfgMode::OneStep;
    int solver_order = 1;
    int inversion_steps = 2;       // e -> s -> t by default; > 2 for ablations

    void validate() const;
};

struct LossResult {
    double value = 0.0;
    Vec grad_x_pi;
    std::map<std::string, double> diagnostics;
};

struct LossContext {
    const ScoreModel& model;
    const NoiseSchedule& sched;
    const Decoder* decoder = nullptr;
};

// Every loss returns its scalar value and the gradient with respect to the
// rendered view x_pi. In stop-grad mode the target branch is frozen and the
// gradient chains through the online branch's affine (alpha/sigma) trajectory
// dependence with all eps evaluations treated as constants; exact-jacobian
// mode differentiates the full objective through the teacher's closed-form
// Jacobian.

LossResult sds(const LossContext& ctx, const Vec& x_pi, int t, const Condition& y,
               const Vec& eps, const LossSpec& spec);
LossResult sds_cfg(const LossContext& ctx, const Vec& x_pi, int t, const Condition& y,
                   const Vec& eps, const LossSpec& spec);
LossResult csd(const LossContext& ctx, const Vec& x_pi, int t, const Condition& y,
               const Vec& eps, const LossSpec& spec);
LossResult isd(const LossContext& ctx, const Vec& x_pi, const TimestepTriple& triple,
               const Condition& y, const Vec& eps_star, const LossSpec& spec);
LossResult isd_cfg(const LossContext& ctx, const Vec& x_pi, const TimestepTriple& triple,
                   const Condition& y, const Vec& eps_star, const LossSpec& spec);
LossResult cds(const LossContext& ctx, const Vec& x_pi, int t, int s, const Condition& y,
               const Vec& eps, const LossSpec& spec);
LossResult cc(const LossContext& ctx, const Vec& x_pi, const TimestepTriple& triple,
              const Condition& y, const Vec& eps_star, const LossSpec& spec);
LossResult cg(const LossContext& ctx, const Vec& x_pi, const TimestepTriple& triple,
              const Condition& y, const Vec& eps_star, const LossSpec& spec);
LossResult cp(const LossContext& ctx, const Vec& x_pi, const TimestepTriple& triple,
              const Condition& y, const Vec& eps_star, const LossSpec& spec);
LossResult gcs(const LossContext& ctx, const Vec& x_pi, const TimestepTriple& triple,
               const Condition& y, const Vec& eps_star, const LossSpec& spec);

/// Dispatch on spec.kind; sds/csd-style losses read t (and s) from the triple.
LossResult evaluate_loss(const LossContext& ctx, const LossSpec& spec, const Vec& x_pi,
                         const TimestepTriple& triple, const Condition& y, const Vec& eps);

/// c(t) weight: 1, or alpha^2/sigma^2 for the snr option.
double loss_c_weight(const LossSpec& spec, const NoiseSchedule& sched, int t);

} // namespace gcslab
