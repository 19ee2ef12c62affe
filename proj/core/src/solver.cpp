#include "gcslab/solver.hpp"

#include <cmath>

namespace gcslab {

CfgMode cfg_mode_from_string(const std::string& name) {
    if (name == "one-step") return CfgMode::OneStep;
    if (name == "per-step") return CfgMode::PerStep;
    throw std::invalid_argument("unknown cfg mode: " + name);
}

std::string to_string(CfgMode mode) {
    return mode == CfgMode::OneStep ? "one-step" : "per-step";
}

GradMode grad_mode_from_string(const std::string& name) {
    if (name == "stop-grad") return GradMode::StopGrad;
    if (name == "exact-jacobian") return GradMode::ExactJacobian;
    throw std::invalid_argument("unknown grad mode: " + name);
}

std::string to_string(GradMode mode) {
    return mode == GradMode::StopGrad ? "stop-grad" : "exact-jacobian";
}

Vec f_pred(const ScoreModel& model, const SchedulePoint& pt, const Vec& x,
           const Condition& y, double cfg_weight) {
    Vec eps = epsilon_cfg(model, x, pt, y, cfg_weight);
    return (x - pt.sigma * eps) / pt.alpha;
}

Vec f_pred_vjp(const ScoreModel& model, const SchedulePoint& pt, const Vec& x,
               const Condition& y, double cfg_weight, const Vec& cot, GradMode mode) {
    Vec out = cot / pt.alpha;
    if (mode == GradMode::ExactJacobian) {
        out -= (pt.sigma / pt.alpha) * epsilon_cfg_vjp(model, x, pt, y, cfg_weight, cot);
    }
    return out;
}

Vec ddim_update(const ScoreModel& model, const SchedulePoint& from, const SchedulePoint& to,
                const Vec& x, const Condition& y, double cfg_weight) {
    if (to.index == from.index && to.index >= 0) return x;
    Vec eps = epsilon_cfg(model, x, from, y, cfg_weight);
    return to.alpha * ((x - from.sigma * eps) / from.alpha) + to.sigma * eps;
}

Vec ddim_update_vjp(const ScoreModel& model, const SchedulePoint& from,
                    const SchedulePoint& to, const Vec& x, const Condition& y,
                    double cfg_weight, const Vec& cot, GradMode mode) {
    if (to.index == from.index && to.index >= 0) return cot;
    double a = to.alpha / from.alpha;
    Vec out = a * cot;
    if (mode == GradMode::ExactJacobian) {
        double b = to.sigma - to.alpha * from.sigma / from.alpha;
        out += b * epsilon_cfg_vjp(model, x, from, y, cfg_weight, cot);
    }
    return out;
}

Vec f_pred(const ScoreModel& model, const NoiseSchedule& sched, const Vec& x, int t,
           const Condition& y, double cfg_weight) {
    return f_pred(model, sched.point(t), x, y, cfg_weight);
}

Vec ddim_step(const ScoreModel& model, const NoiseSchedule& sched, const Vec& x, int t,
              int s, const Condition& y, double cfg_weight) {
    require(s <= t, "ddim_step requires s <= t (use ddim_invert_step)");
    return ddim_update(model, sched.point(t), sched.point(s), x, y, cfg_weight);
}

Vec ddim_invert_step(const ScoreModel& model, const NoiseSchedule& sched, const Vec& x,
                     int s, int t, const Condition& y, bool allow_conditioned) {
    require(t >= s, "ddim_invert_step requires t >= s");
    require(y.is_null || allow_conditioned,
            "DDIM inversion steps are null-conditioned by default");
    return ddim_update(model, sched.point(s), sched.point(t), x, y, 1.0);
}

namespace {

// x_s = (sigma_s / sigma_t) x_t - alpha_s (e^{-h} - 1) x0_pred, h = lambda_s
// - lambda_t. Exact once x0_pred is the integrand at the right node.
Vec exp_int_step(const SchedulePoint& from, const SchedulePoint& to, const Vec& x,
                 const Vec& x0_pred) {
    double h = to.lambda - from.lambda;
    double coef = -to.alpha * std::expm1(-h);
    return (to.sigma / from.sigma) * x + coef * x0_pred;
}

} // namespace

Vec g_solution(const ScoreModel& model, const NoiseSchedule& sched, const Vec& x, int t,
               int s, const Condition& y, const SolverConfig& config) {
    require(s <= t, "g_solution requires s <= t");
    require(config.order == 1 || config.order == 2, "unsupported solver order");
    SchedulePoint pt = sched.point(t);
    SchedulePoint ps = sched.point(s);
    if (s == t) return x;

    if (config.order == 1) {
        return exp_int_step(pt, ps, x, f_pred(model, pt, x, y, config.cfg_weight));
    }
    // Midpoint correction: one extra evaluation at the log-SNR midpoint.
    SchedulePoint pm = NoiseSchedule::point_at_lambda(0.5 * (pt.lambda + ps.lambda));
    Vec u = exp_int_step(pt, pm, x, f_pred(model, pt, x, y, config.cfg_weight));
    return exp_int_step(pt, ps, x, f_pred(model, pm, u, y, config.cfg_weight));
}

Vec g_solution_vjp(const ScoreModel& model, const NoiseSchedule& sched, const Vec& x,
                   int t, int s, const Condition& y, const SolverConfig& config,
                   const Vec& cot, GradMode mode) {
    require(s <= t, "g_solution requires s <= t");
    require(config.order == 1 || config.order == 2, "unsupported solver order");
    if (s == t) return cot;
    SchedulePoint pt = sched.point(t);
    SchedulePoint ps = sched.point(s);
    double w = config.cfg_weight;

    if (config.order == 1) {
        // Same affine structure as the DDIM update.
        return ddim_update_vjp(model, pt, ps, x, y, w, cot, mode);
    }

    double h = ps.lambda - pt.lambda;
    SchedulePoint pm = NoiseSchedule::point_at_lambda(0.5 * (pt.lambda + ps.lambda));
    double coef_mid = -pm.alpha * std::expm1(-0.5 * h);
    double coef_end = -ps.alpha * std::expm1(-h);

    Vec out = (ps.sigma / pt.sigma) * cot;
    // cotangent into F(u, mid), then through u back to x.
    Vec cot_f = coef_end * cot;
    if (mode == GradMode::StopGrad) {
        // F(u, mid) depends on x only through u's affine part.
        Vec cot_u = cot_f / pm.alpha;
        out += (pm.sigma / pt.sigma) * cot_u + (coef_mid / pt.alpha) * cot_u;
        return out;
    }
    Vec u = exp_int_step(pt, pm, x, f_pred(model, pt, x, y, w));
    Vec cot_u = f_pred_vjp(model, pm, u, y, w, cot_f, mode);
    out += (pm.sigma / pt.sigma) * cot_u;
    out += f_pred_vjp(model, pt, x, y, w, coef_mid * cot_u, mode);
    return out;
}

Vec run_trajectory(const ScoreModel& model, const NoiseSchedule& sched, const Vec& x,
                   int t, int e, int n_steps, const Condition& y, double cfg_weight,
                   CfgMode cfg_mode, int order, std::vector<TrajectoryPoint>* path) {
    require(e <= t, "run_trajectory requires e <= t");
    require(n_steps >= 1, "run_trajectory requires n_steps >= 1");
    Vec cur = x;
    int cur_t = t;
    if (path) path->push_back({cur, cur_t});
    for (int k = 1; k <= n_steps; ++k) {
        int next_t = t + int(std::lround(double(k) * double(e - t) / double(n_steps)));
        double w = (cfg_mode == CfgMode::PerStep || k == 1) ? cfg_weight : 1.0;
        SolverConfig step{order, w, y};
        cur = g_solution(model, sched, cur, cur_t, next_t, y, step);
        cur_t = next_t;
        if (path) path->push_back({cur, cur_t});
    }
    return cur;
}

Vec rk4_reference(const ScoreModel& model, const NoiseSchedule& sched, const Vec& x,
                  int t, int e, int n_substeps, const Condition& y, double cfg_weight) {
    require(e <= t, "rk4_reference requires e <= t");
    require(n_substeps >= 100, "rk4_reference requires n_substeps >= 100");
    if (e == t) return x;

    // In z = x / sigma the PF-ODE reads dz/dlambda = e^lambda x0_pred, the
    // quadrature behind the exponential integrator.
    auto deriv = [&](double lambda, const Vec& z) {
        SchedulePoint p = NoiseSchedule::point_at_lambda(lambda);
        Vec xv = p.sigma * z;
        return std::exp(lambda) * f_pred(model, p, xv, y, cfg_weight);
    };

    double l0 = sched.lambda(t);
    double l1 = sched.lambda(e);
    double hstep = (l1 - l0) / double(n_substeps);
    Vec z = x / sched.sigma(t);
    double lam = l0;
    for (int i = 0; i < n_substeps; ++i) {
        Vec k1 = deriv(lam, z);
        Vec k2 = deriv(lam + 0.5 * hstep, z + 0.5 * hstep * k1);
        Vec k3 = deriv(lam + 0.5 * hstep, z + 0.5 * hstep * k2);
        Vec k4 = deriv(lam + hstep, z + hstep * k3);
        z += (hstep / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        lam += hstep;
    }
    return sched.sigma(e) * z;
}

} // namespace gcslab
