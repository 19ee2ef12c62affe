#include "gcslab/schedule.hpp"

#include <algorithm>
#include <cmath>

namespace gcslab {

namespace {

constexpr double kAlphaFloor = 1e-4;
constexpr double kSigmaFloor = 1e-6;
constexpr double kPi = 3.14159265358979323846;

// DDPM linear-beta constants; the integral form below keeps the terminal
// noise level independent of the grid size.
constexpr double kBeta0 = 1e-4;
constexpr double kBeta1 = 0.02;
constexpr double kBetaSteps = 1000.0;

double alpha_bar_linear(double tau) {
    // exp(-integral of 1000 * beta(u) du), beta linear in u over [0, 1].
    return std::exp(-kBetaSteps * (kBeta0 * tau + 0.5 * (kBeta1 - kBeta0) * tau * tau));
}

double alpha_bar_cosine(double tau) {
    const double s = 0.008;
    double f = std::cos((tau + s) / (1.0 + s) * kPi / 2.0);
    double f0 = std::cos(s / (1.0 + s) * kPi / 2.0);
    double r = f / f0;
    return std::max(r * r, 0.0);
}

} // namespace

ScheduleKind schedule_kind_from_string(const std::string& name) {
    if (name == "vp-linear") return ScheduleKind::VpLinear;
    if (name == "vp-cosine") return ScheduleKind::VpCosine;
    throw std::invalid_argument("unknown schedule kind: " + name);
}

std::string to_string(ScheduleKind kind) {
    return kind == ScheduleKind::VpLinear ? "vp-linear" : "vp-cosine";
}

NoiseSchedule::NoiseSchedule(ScheduleKind kind, int grid_size) : kind_(kind) {
    require(grid_size >= 2, "schedule grid_size must be >= 2");
    alpha_.resize(grid_size);
    sigma_.resize(grid_size);
    lambda_.resize(grid_size);

    for (int i = 0; i < grid_size; ++i) {
        double tau = double(i) / double(grid_size - 1);
        double abar = kind == ScheduleKind::VpLinear ? alpha_bar_linear(tau)
                                                     : alpha_bar_cosine(tau);
        double a = std::sqrt(std::max(abar, 0.0));
        double s = std::sqrt(std::max(1.0 - abar, 0.0));
        // Floors keep F_theta's division by alpha and epsilon's division by
        // sigma finite at the grid endpoints. The companion coefficient is
        // recomputed so alpha^2 + sigma^2 stays 1 exactly.
        if (s < kSigmaFloor) {
            s = kSigmaFloor;
            a = std::sqrt(1.0 - s * s);
        }
        if (a < kAlphaFloor) {
            a = kAlphaFloor;
            s = std::sqrt(1.0 - a * a);
        }
        alpha_[i] = a;
        sigma_[i] = s;
        lambda_[i] = std::log(a / s);
    }

    for (int i = 1; i < grid_size; ++i) {
        require(alpha_[i] <= alpha_[i - 1], "alpha must be non-increasing");
        require(sigma_[i] >= sigma_[i - 1], "sigma must be non-decreasing");
        require(lambda_[i] < lambda_[i - 1], "lambda must be strictly decreasing");
    }
}

int NoiseSchedule::check_index(int t) const {
    require(t >= 0 && t < grid_size(), "timestep index off the schedule grid");
    return t;
}

SchedulePoint NoiseSchedule::point(int t) const {
    check_index(t);
    return SchedulePoint{alpha_[t], sigma_[t], lambda_[t], t};
}

SchedulePoint NoiseSchedule::point_at_lambda(double lambda) {
    // alpha^2 = sigmoid(2 lambda), sigma^2 = sigmoid(-2 lambda).
    double a = 1.0 / std::sqrt(1.0 + std::exp(-2.0 * lambda));
    double s = 1.0 / std::sqrt(1.0 + std::exp(2.0 * lambda));
    return SchedulePoint{a, s, lambda, -1};
}

NoiseSchedule make_schedule(ScheduleKind kind, int grid_size) {
    return NoiseSchedule(kind, grid_size);
}

NoiseSchedule make_schedule(const std::string& kind, int grid_size) {
    return NoiseSchedule(schedule_kind_from_string(kind), grid_size);
}

Vec add_noise(const NoiseSchedule& sched, const Vec& x0, int t, const Vec& eps) {
    require(x0.size() == eps.size(), "add_noise: eps shape mismatch");
    return sched.alpha(t) * x0 + sched.sigma(t) * eps;
}

double TimestepSampler::upper_bound(int epoch) const {
    double warm = warm_init * std::max(0.0, 1.0 - double(epoch) / double(warm_epochs));
    return double(t_base) + warm;
}

TimestepTriple TimestepSampler::sample(Rng& rng, int epoch, int delta) const {
    require(epoch >= 0, "epoch must be >= 0");
    require(delta >= 10, "delta must be >= 10");

    int t_hi = int(std::lround(upper_bound(epoch)));
    int t = rng.uniform_int(t_min, t_hi);
    int s = std::max(1, t - delta);

    int e_hi = std::min(s - 1, s - delta / 10);
    int e_lo = std::max(0, s - delta);
    e_hi = std::max(e_hi, 0);
    e_lo = std::min(e_lo, e_hi);
    int e = rng.uniform_int(e_lo, e_hi);

    // Degenerate clamps can still collide; back off until t > s > e >= 0.
    if (e >= s) e = s - 1;
    if (e < 0) e = 0;
    if (s >= t) s = t - 1;
    if (e >= s) e = s - 1;
    require(t > s && s > e && e >= 0, "timestep triple ordering violated");
    return TimestepTriple{t, s, e};
}

TimestepTriple sample_timesteps(Rng& rng, int epoch, int delta) {
    return TimestepSampler{}.sample(rng, epoch, delta);
}

} // namespace gcslab
