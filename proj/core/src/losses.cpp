#include "gcslab/losses.hpp"

#include <cmath>

namespace gcslab {

LossKind loss_kind_from_string(const std::string& name) {
    if (name == "sds") return LossKind::Sds;
    if (name == "sds-cfg") return LossKind::SdsCfg;
    if (name == "csd") return LossKind::Csd;
    if (name == "isd") return LossKind::Isd;
    if (name == "isd-cfg") return LossKind::IsdCfg;
    if (name == "cds") return LossKind::Cds;
    if (name == "cc") return LossKind::Cc;
    if (name == "cg") return LossKind::Cg;
    if (name == "cp") return LossKind::Cp;
    if (name == "gcs") return LossKind::Gcs;
    throw std::invalid_argument("unknown loss kind: " + name);
}

std::string to_string(LossKind kind) {
    switch (kind) {
        case LossKind::Sds: return "sds";
        case LossKind::SdsCfg: return "sds-cfg";
        case LossKind::Csd: return "csd";
        case LossKind::Isd: return "isd";
        case LossKind::IsdCfg: return "isd-cfg";
        case LossKind::Cds: return "cds";
        case LossKind::Cc: return "cc";
        case LossKind::Cg: return "cg";
        case LossKind::Cp: return "cp";
        case LossKind::Gcs: return "gcs";
    }
    return "?";
}

WeightFn weight_fn_from_string(const std::string& name) {
    if (name == "unit") return WeightFn::Unit;
    if (name == "snr") return WeightFn::Snr;
    throw std::invalid_argument("unknown weight function: " + name);
}

std::string to_string(WeightFn fn) { return fn == WeightFn::Unit ? "unit" : "snr"; }

void LossSpec::validate() const {
    require(cfg_weight >= 0.0, "loss cfg weight must be >= 0");
    require(w_cc >= 0.0 && w_cg >= 0.0 && w_cp >= 0.0, "term weights must be >= 0");
    require(cg_cfg_weight >= 0.0, "cg cfg weight must be >= 0");
    require(solver_order == 1 || solver_order == 2, "solver order must be 1 or 2");
    require(inversion_steps >= 1, "inversion ladder needs >= 1 step");
}

double loss_c_weight(const LossSpec& spec, const NoiseSchedule& sched, int t) {
    if (spec.c_fn == WeightFn::Unit) return 1.0;
    double a = sched.alpha(t), s = sched.sigma(t);
    return a * a / (s * s);
}

namespace {

LossResult finish(double value, Vec grad, std::map<std::string, double> diag = {}) {
    require(std::isfinite(value), "loss value must be finite");
    require(grad.allFinite(), "loss gradient must be finite");
    LossResult out;
    out.value = value;
    out.grad_x_pi = std::move(grad);
    out.diagnostics = std::move(diag);
    return out;
}

// Null-conditioned DDIM inversion ladder from x_{pi,e} up to t. With the
// default two steps the path is e -> s -> t; finer ladders space uniformly
// in grid index.
struct Ladder {
    std::vector<int> ts;  // ascending, ts.front() == e, ts.back() == t
    std::vector<Vec> xs;  // xs[0] = add_noise(x_pi, e, eps*)
};

Ladder invert_ladder(const LossContext& ctx, const Vec& x_pi, const Vec& eps_star,
                     const TimestepTriple& triple, int n_steps) {
    require(triple.t >= triple.s && triple.s >= triple.e && triple.e >= 0,
            "timestep triple ordering violated");
    Ladder lad;
    if (n_steps == 2) {
        lad.ts = {triple.e, triple.s, triple.t};
    } else {
        for (int k = 0; k <= n_steps; ++k) {
            lad.ts.push_back(triple.e + int(std::lround(
                double(k) * double(triple.t - triple.e) / double(n_steps))));
        }
    }
    lad.xs.push_back(add_noise(ctx.sched, x_pi, triple.e, eps_star));
    for (size_t i = 0; i + 1 < lad.ts.size(); ++i) {
        lad.xs.push_back(ddim_invert_step(ctx.model, ctx.sched, lad.xs[i], lad.ts[i],
                                          lad.ts[i + 1]));
    }
    return lad;
}

// Reverse sweep over the inversion ladder: propagates cotangents injected at
// ladder nodes down to x_pi (through the add_noise alpha_e factor).
Vec ladder_vjp(const LossContext& ctx, const Ladder& lad, std::vector<Vec> node_cots,
               GradMode mode) {
    Vec cot = std::move(node_cots.back());
    for (int i = int(lad.ts.size()) - 2; i >= 0; --i) {
        cot = ddim_update_vjp(ctx.model, ctx.sched.point(lad.ts[i]),
                              ctx.sched.point(lad.ts[i + 1]), lad.xs[i],
                              Condition::null(), 1.0, cot, mode);
        if (node_cots[i].size() > 0) cot += node_cots[i];
    }
    return ctx.sched.alpha(lad.ts.front()) * cot;
}

} // namespace

LossResult sds(const LossContext& ctx, const Vec& x_pi, int t, const Condition& y,
               const Vec& eps, const LossSpec& spec) {
    spec.validate();
    double c = loss_c_weight(spec, ctx.sched, t);
    SchedulePoint pt = ctx.sched.point(t);
    Vec x_t = add_noise(ctx.sched, x_pi, t, eps);
    Vec f = f_pred(ctx.model, pt, x_t, y);
    Vec r = x_pi - f;
    double value = c * r.squaredNorm();

    Vec grad = 2.0 * c * r;
    if (spec.grad_mode == GradMode::ExactJacobian) {
        grad -= 2.0 * c * pt.alpha
                * f_pred_vjp(ctx.model, pt, x_t, y, 1.0, r, spec.grad_mode);
    }
    return finish(value, std::move(grad), {{"residual_norm", r.norm()}});
}

LossResult sds_cfg(const LossContext& ctx, const Vec& x_pi, int t, const Condition& y,
                   const Vec& eps, const LossSpec& spec) {
    spec.validate();
    double c = loss_c_weight(spec, ctx.sched, t);
    double w = spec.cfg_weight;
    SchedulePoint pt = ctx.sched.point(t);
    Vec x_t = add_noise(ctx.sched, x_pi, t, eps);
    Vec f_y = f_pred(ctx.model, pt, x_t, y);
    Vec f_0 = f_pred(ctx.model, pt, x_t, Condition::null());
    Vec generator = x_pi - f_y;
    Vec classifier = f_0 - f_y;
    Vec r = generator + w * classifier;
    double value = c * r.squaredNorm();

    Vec grad = 2.0 * c * r;
    if (spec.grad_mode == GradMode::ExactJacobian) {
        Vec vy = f_pred_vjp(ctx.model, pt, x_t, y, 1.0, r, spec.grad_mode);
        Vec v0 = f_pred_vjp(ctx.model, pt, x_t, Condition::null(), 1.0, r, spec.grad_mode);
        grad += 2.0 * c * pt.alpha * (w * v0 - (1.0 + w) * vy);
    }
    return finish(value, std::move(grad),
                  {{"generator_norm", generator.norm()},
                   {"classifier_norm", classifier.norm()}});
}

LossResult csd(const LossContext& ctx, const Vec& x_pi, int t, const Condition& y,
               const Vec& eps, const LossSpec& spec) {
    spec.validate();
    double c = loss_c_weight(spec, ctx.sched, t);
    SchedulePoint pt = ctx.sched.point(t);
    Vec x_t = add_noise(ctx.sched, x_pi, t, eps);
    Vec f_0 = f_pred(ctx.model, pt, x_t, Condition::null());
    Vec f_y = f_pred(ctx.model, pt, x_t, y);
    Vec r = f_0 - f_y;
    double value = c * r.squaredNorm();

    Vec grad;
    if (spec.grad_mode == GradMode::StopGrad) {
        // dF/dx_pi through the affine x_t dependence is alpha_t / alpha_t.
        grad = 2.0 * c * r;
    } else {
        Vec v0 = f_pred_vjp(ctx.model, pt, x_t, Condition::null(), 1.0, r, spec.grad_mode);
        Vec vy = f_pred_vjp(ctx.model, pt, x_t, y, 1.0, r, spec.grad_mode);
        grad = 2.0 * c * pt.alpha * (v0 - vy);
    }
    return finish(value, std::move(grad), {{"residual_norm", r.norm()}});
}

LossResult isd(const LossContext& ctx, const Vec& x_pi, const TimestepTriple& triple,
               const Condition& y, const Vec& eps_star, const LossSpec& spec) {
    spec.validate();
    require(triple.t >= triple.s, "isd requires t >= s");
    double c = loss_c_weight(spec, ctx.sched, triple.t);
    Ladder lad = invert_ladder(ctx, x_pi, eps_star, triple, 2);
    const Vec& x_s = lad.xs[1];
    const Vec& x_t = lad.xs[2];
    SchedulePoint ps = ctx.sched.point(triple.s);
    SchedulePoint pt = ctx.sched.point(triple.t);
    Vec f_s0 = f_pred(ctx.model, ps, x_s, Condition::null());
    Vec f_ty = f_pred(ctx.model, pt, x_t, y);
    Vec r = f_s0 - f_ty;
    double value = c * r.squaredNorm();

    Vec grad;
    if (spec.grad_mode == GradMode::StopGrad) {
        grad = 2.0 * c * r;
    } else {
        std::vector<Vec> cots(3);
        cots[1] = f_pred_vjp(ctx.model, ps, x_s, Condition::null(), 1.0, r, spec.grad_mode);
        cots[2] = -f_pred_vjp(ctx.model, pt, x_t, y, 1.0, r, spec.grad_mode);
        grad = 2.0 * c * ladder_vjp(ctx, lad, std::move(cots), spec.grad_mode);
    }
    return finish(value, std::move(grad), {{"residual_norm", r.norm()}});
}

LossResult isd_cfg(const LossContext& ctx, const Vec& x_pi, const TimestepTriple& triple,
                   const Condition& y, const Vec& eps_star, const LossSpec& spec) {
    spec.validate();
    require(triple.t >= triple.s, "isd requires t >= s");
    double c = loss_c_weight(spec, ctx.sched, triple.t);
    double w = spec.cfg_weight;
    Ladder lad = invert_ladder(ctx, x_pi, eps_star, triple, 2);
    const Vec& x_s = lad.xs[1];
    const Vec& x_t = lad.xs[2];
    SchedulePoint ps = ctx.sched.point(triple.s);
    SchedulePoint pt = ctx.sched.point(triple.t);
    Vec f_s0 = f_pred(ctx.model, ps, x_s, Condition::null());
    Vec f_t0 = f_pred(ctx.model, pt, x_t, Condition::null());
    Vec f_ty = f_pred(ctx.model, pt, x_t, y);
    Vec generator = f_s0 - f_t0;
    Vec classifier = f_t0 - f_ty;
    Vec r = generator + w * classifier;
    double value = c * r.squaredNorm();

    Vec grad;
    if (spec.grad_mode == GradMode::StopGrad) {
        grad = 2.0 * c * r;
    } else {
        std::vector<Vec> cots(3);
        cots[1] = f_pred_vjp(ctx.model, ps, x_s, Condition::null(), 1.0, r, spec.grad_mode);
        Vec v0 = f_pred_vjp(ctx.model, pt, x_t, Condition::null(), 1.0, r, spec.grad_mode);
        Vec vy = f_pred_vjp(ctx.model, pt, x_t, y, 1.0, r, spec.grad_mode);
        cots[2] = (w - 1.0) * v0 - w * vy;
        grad = 2.0 * c * ladder_vjp(ctx, lad, std::move(cots), spec.grad_mode);
    }
    return finish(value, std::move(grad),
                  {{"generator_norm", generator.norm()},
                   {"classifier_norm", classifier.norm()}});
}

LossResult cds(const LossContext& ctx, const Vec& x_pi, int t, int s, const Condition& y,
               const Vec& eps, const LossSpec& spec) {
    spec.validate();
    require(t >= s, "cds requires t >= s");
    double c = loss_c_weight(spec, ctx.sched, t);
    double w = spec.cfg_weight;
    SchedulePoint pt = ctx.sched.point(t);
    SchedulePoint ps = ctx.sched.point(s);
    Vec x_t = add_noise(ctx.sched, x_pi, t, eps);
    Vec x_bar = ddim_step(ctx.model, ctx.sched, x_t, t, s, y, w);
    Vec f_a = f_pred(ctx.model, pt, x_t, y);
    Vec f_b = f_pred(ctx.model, ps, x_bar, y);
    Vec r = f_a - f_b;
    double value = c * r.squaredNorm();

    Vec grad;
    if (spec.grad_mode == GradMode::StopGrad) {
        grad = 2.0 * c * r;
    } else {
        Vec cot = f_pred_vjp(ctx.model, pt, x_t, y, 1.0, r, spec.grad_mode);
        Vec cot_bar = -f_pred_vjp(ctx.model, ps, x_bar, y, 1.0, r, spec.grad_mode);
        cot += ddim_update_vjp(ctx.model, pt, ps, x_t, y, w, cot_bar, spec.grad_mode);
        grad = 2.0 * c * pt.alpha * cot;
    }
    return finish(value, std::move(grad), {{"residual_norm", r.norm()}});
}

LossResult cc(const LossContext& ctx, const Vec& x_pi, const TimestepTriple& triple,
              const Condition& y, const Vec& eps_star, const LossSpec& spec) {
    spec.validate();
    bool per_step = spec.cfg_mode == CfgMode::PerStep;
    Ladder lad = invert_ladder(ctx, x_pi, eps_star, triple, spec.inversion_steps);
    const Vec& x_hat_t = lad.xs.back();

    // One-step mode keeps CFG in the single t -> s denoising step; per-step
    // mode (the Fig. 3 ablation arm) also pushes it into both solution jumps.
    SolverConfig g_a{spec.solver_order, per_step ? spec.cfg_weight : 1.0,
                     per_step ? y : Condition::null()};
    SolverConfig g_b = g_a;
    Condition cond_a = per_step ? y : Condition::null();

    Vec x_bar = ddim_step(ctx.model, ctx.sched, x_hat_t, triple.t, triple.s, y,
                          spec.cfg_weight);
    Vec a = g_solution(ctx.model, ctx.sched, x_hat_t, triple.t, triple.e, cond_a, g_a);
    Vec b = g_solution(ctx.model, ctx.sched, x_bar, triple.s, triple.e, cond_a, g_b);
    Vec r = a - b;
    double value = r.squaredNorm();

    Vec grad;
    if (spec.grad_mode == GradMode::StopGrad) {
        // Online branch G(x_hat_t; t, e) chains alpha_e through add_noise,
        // ladder, and jump.
        grad = 2.0 * ctx.sched.alpha(triple.e) * r;
    } else {
        Vec cot_t = g_solution_vjp(ctx.model, ctx.sched, x_hat_t, triple.t, triple.e,
                                   cond_a, g_a, r, spec.grad_mode);
        Vec cot_bar = g_solution_vjp(ctx.model, ctx.sched, x_bar, triple.s, triple.e,
                                     cond_a, g_b, -r, spec.grad_mode);
        cot_t += ddim_update_vjp(ctx.model, ctx.sched.point(triple.t),
                                 ctx.sched.point(triple.s), x_hat_t, y, spec.cfg_weight,
                                 cot_bar, spec.grad_mode);
        std::vector<Vec> cots(lad.ts.size());
        cots.back() = std::move(cot_t);
        grad = 2.0 * ladder_vjp(ctx, lad, std::move(cots), spec.grad_mode);
    }
    return finish(value, std::move(grad), {{"branch_gap", r.norm()}});
}

namespace {

// Shared structure of cg and cp: the unconditional prediction at e and the
// conditional prediction carried down from t through the solution function.
struct CgBranches {
    Ladder lad;
    Vec g_out;
    Vec x_tilde;  // F(x_{pi,e}; e, null) - the online branch
    Vec x_dot;    // F(G(x_hat_t; t, e, y); e, y)
};

CgBranches cg_branches(const LossContext& ctx, const Vec& x_pi,
                       const TimestepTriple& triple, const Condition& y,
                       const Vec& eps_star, const LossSpec& spec) {
    CgBranches br;
    br.lad = invert_ladder(ctx, x_pi, eps_star, triple, spec.inversion_steps);
    SchedulePoint pe = ctx.sched.point(triple.e);
    SolverConfig g_cfg{spec.solver_order, spec.cg_cfg_weight, y};
    br.g_out = g_solution(ctx.model, ctx.sched, br.lad.xs.back(), triple.t, triple.e, y,
                          g_cfg);
    br.x_tilde = f_pred(ctx.model, pe, br.lad.xs.front(), Condition::null());
    br.x_dot = f_pred(ctx.model, pe, br.g_out, y);
    return br;
}

// Exact-mode reverse sweep shared by cg and cp, given cotangents on x_tilde
// and x_dot.
Vec cg_branches_vjp(const LossContext& ctx, const CgBranches& br,
                    const TimestepTriple& triple, const Condition& y,
                    const LossSpec& spec, const Vec& cot_tilde, const Vec& cot_dot) {
    SchedulePoint pe = ctx.sched.point(triple.e);
    SolverConfig g_cfg{spec.solver_order, spec.cg_cfg_weight, y};
    std::vector<Vec> cots(br.lad.ts.size());
    Vec cot_g = f_pred_vjp(ctx.model, pe, br.g_out, y, 1.0, cot_dot, spec.grad_mode);
    cots.back() = g_solution_vjp(ctx.model, ctx.sched, br.lad.xs.back(), triple.t,
                                 triple.e, y, g_cfg, cot_g, spec.grad_mode);
    cots.front() = f_pred_vjp(ctx.model, pe, br.lad.xs.front(), Condition::null(), 1.0,
                              cot_tilde, spec.grad_mode);
    return ladder_vjp(ctx, br.lad, std::move(cots), spec.grad_mode);
}

} // namespace

LossResult cg(const LossContext& ctx, const Vec& x_pi, const TimestepTriple& triple,
              const Condition& y, const Vec& eps_star, const LossSpec& spec) {
    spec.validate();
    CgBranches br = cg_branches(ctx, x_pi, triple, y, eps_star, spec);
    Vec r = br.x_tilde - br.x_dot;
    double value = r.squaredNorm();

    Vec grad;
    if (spec.grad_mode == GradMode::StopGrad) {
        // Online branch F(x_{pi,e}; e, null) chains alpha_e * (1/alpha_e).
        grad = 2.0 * r;
    } else {
        grad = 2.0 * cg_branches_vjp(ctx, br, triple, y, spec, r, -r);
    }
    return finish(value, std::move(grad), {{"branch_gap", r.norm()}});
}

LossResult cp(const LossContext& ctx, const Vec& x_pi, const TimestepTriple& triple,
              const Condition& y, const Vec& eps_star, const LossSpec& spec) {
    spec.validate();
    require(ctx.decoder != nullptr, "cp requires a decoder");
    const Decoder& dec = *ctx.decoder;
    CgBranches br = cg_branches(ctx, x_pi, triple, y, eps_star, spec);
    Vec d_dot = dec.decode(br.x_dot);
    Vec d_tilde = dec.decode(br.x_tilde);
    Vec r = d_dot - d_tilde;
    double value = r.squaredNorm();

    Vec grad;
    if (spec.grad_mode == GradMode::StopGrad) {
        // Same online branch as cg, pushed through the decoder.
        grad = 2.0 * dec.decode_vjp(br.x_tilde, -r);
    } else {
        Vec cot_tilde = dec.decode_vjp(br.x_tilde, -r);
        Vec cot_dot = dec.decode_vjp(br.x_dot, r);
        grad = 2.0 * cg_branches_vjp(ctx, br, triple, y, spec, cot_tilde, cot_dot);
    }
    return finish(value, std::move(grad), {{"branch_gap", r.norm()}});
}

LossResult gcs(const LossContext& ctx, const Vec& x_pi, const TimestepTriple& triple,
               const Condition& y, const Vec& eps_star, const LossSpec& spec) {
    spec.validate();
    LossResult out;
    out.value = 0.0;
    out.grad_x_pi = Vec::Zero(x_pi.size());
    double terms[3] = {0.0, 0.0, 0.0};

    if (spec.w_cc > 0.0) {
        LossResult r = cc(ctx, x_pi, triple, y, eps_star, spec);
        terms[0] = r.value;
        out.value += spec.w_cc * r.value;
        out.grad_x_pi += spec.w_cc * r.grad_x_pi;
    }
    if (spec.w_cg > 0.0) {
        LossResult r = cg(ctx, x_pi, triple, y, eps_star, spec);
        terms[1] = r.value;
        out.value += spec.w_cg * r.value;
        out.grad_x_pi += spec.w_cg * r.grad_x_pi;
    }
    if (spec.w_cp > 0.0) {
        LossResult r = cp(ctx, x_pi, triple, y, eps_star, spec);
        terms[2] = r.value;
        out.value += spec.w_cp * r.value;
        out.grad_x_pi += spec.w_cp * r.grad_x_pi;
    }
    out.diagnostics = {{"cc", terms[0]}, {"cg", terms[1]}, {"cp", terms[2]}};
    return out;
}

LossResult evaluate_loss(const LossContext& ctx, const LossSpec& spec, const Vec& x_pi,
                         const TimestepTriple& triple, const Condition& y, const Vec& eps) {
    switch (spec.kind) {
        case LossKind::Sds: return sds(ctx, x_pi, triple.t, y, eps, spec);
        case LossKind::SdsCfg: return sds_cfg(ctx, x_pi, triple.t, y, eps, spec);
        case LossKind::Csd: return csd(ctx, x_pi, triple.t, y, eps, spec);
        case LossKind::Isd: return isd(ctx, x_pi, triple, y, eps, spec);
        case LossKind::IsdCfg: return isd_cfg(ctx, x_pi, triple, y, eps, spec);
        case LossKind::Cds: return cds(ctx, x_pi, triple.t, triple.s, y, eps, spec);
        case LossKind::Cc: return cc(ctx, x_pi, triple, y, eps, spec);
        case LossKind::Cg: return cg(ctx, x_pi, triple, y, eps, spec);
        case LossKind::Cp: return cp(ctx, x_pi, triple, y, eps, spec);
        case LossKind::Gcs: return gcs(ctx, x_pi, triple, y, eps, spec);
    }
    throw std::invalid_argument("unknown loss kind");
}

} // namespace gcslab
