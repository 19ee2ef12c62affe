#pragma once

#include "gcslab/schedule.hpp"
#include "gcslab/teacher.hpp"
#include "gcslab/types.hpp"

#include <vector>

namespace gcslab {

/// How CFG is distributed over a multi-step denoising ladder: in every step
/// (CDS mode) or only in the single designated step (CC mode).
enum class CfgMode { OneStep, PerStep };

CfgMode cfg_mode_from_string(const std::string& name);
std::string to_string(CfgMode mode);

struct SolverConfig {
    int order = 1;          // 1 or 2
    double cfg_weight = 1.0;
    Condition condition = Condition::null();
};

/// Whether a backward pass treats the teacher's noise prediction as a
/// constant (score-distillation practice) or differentiates it exactly
/// through the analytic Jacobian.
enum class GradMode { StopGrad, ExactJacobian };

GradMode grad_mode_from_string(const std::string& name);
std::string to_string(GradMode mode);

struct TrajectoryPoint {
    Vec x;
    int t = 0;
};

// ---- single-step primitives (schedule-point based) ----

/// One-step x0 prediction F = (x - sigma eps_hat) / alpha, with optional
/// CFG substituted into eps_hat.
Vec f_pred(const ScoreModel& model, const SchedulePoint& pt, const Vec& x,
           const Condition& y, double cfg_weight = 1.0);
Vec f_pred_vjp(const ScoreModel& model, const SchedulePoint& pt, const Vec& x,
               const Condition& y, double cfg_weight, const Vec& cot, GradMode mode);

/// DDIM update between two arbitrary schedule points, in either time
/// direction: x_to = alpha_to F(x) + sigma_to eps_hat(x). The same eps_hat
/// evaluation feeds both terms.
Vec ddim_update(const ScoreModel& model, const SchedulePoint& from, const SchedulePoint& to,
                const Vec& x, const Condition& y, double cfg_weight = 1.0);
Vec ddim_update_vjp(const ScoreModel& model, const SchedulePoint& from,
                    const SchedulePoint& to, const Vec& x, const Condition& y,
                    double cfg_weight, const Vec& cot, GradMode mode);

// ---- grid-index API ----

Vec f_pred(const ScoreModel& model, const NoiseSchedule& sched, const Vec& x, int t,
           const Condition& y, double cfg_weight = 1.0);

/// Denoising step t -> s, s <= t.
Vec ddim_step(const ScoreModel& model, const NoiseSchedule& sched, const Vec& x, int t,
              int s, const Condition& y, double cfg_weight = 1.0);

/// DDIM inversion step s -> t, t >= s, run with the update's eps evaluated
/// at the current point. Null-conditioned unless allow_conditioned is set.
Vec ddim_invert_step(const ScoreModel& model, const NoiseSchedule& sched, const Vec& x,
                     int s, int t, const Condition& y = Condition::null(),
                     bool allow_conditioned = false);

/// Exponential-integrator solution function jumping t -> s. Order 1 is the
/// first-order DPM-Solver step in x0-prediction form (algebraically the DDIM
/// update under VP); order 2 adds one extra eps evaluation at the log-SNR
/// midpoint.
Vec g_solution(const ScoreModel& model, const NoiseSchedule& sched, const Vec& x, int t,
               int s, const Condition& y, const SolverConfig& config);
Vec g_solution_vjp(const ScoreModel& model, const NoiseSchedule& sched, const Vec& x,
                   int t, int s, const Condition& y, const SolverConfig& config,
                   const Vec& cot, GradMode mode);

/// Multi-step trajectory t -> e over a ladder spaced uniformly in grid
/// index. cfg_mode selects per-step CFG (CDS) or CFG in the first step only
/// (CC); non-CFG steps run plain conditional.
Vec run_trajectory(const ScoreModel& model, const NoiseSchedule& sched, const Vec& x,
                   int t, int e, int n_steps, const Condition& y, double cfg_weight,
                   CfgMode cfg_mode = CfgMode::PerStep, int order = 1,
                   std::vector<TrajectoryPoint>* path = nullptr);

/// High-accuracy RK4 integration of the PF-ODE in x0-prediction form over
/// log-SNR. Test/metric reference only.
Vec rk4_reference(const ScoreModel& model, const NoiseSchedule& sched, const Vec& x,
                  int t, int e, int n_substeps, const Condition& y = Condition::null(),
                  double cfg_weight = 1.0);

} // namespace gcslab
