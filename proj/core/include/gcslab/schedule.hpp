#pragma once

#include "gcslab/rng.hpp"
#include "gcslab/types.hpp"

#include <string>
#include <vector>

namespace gcslab {

enum class ScheduleKind { VpLinear, VpCosine };

ScheduleKind schedule_kind_from_string(const std::string& name);
std::string to_string(ScheduleKind kind);

/// One point of the noise schedule. alpha^2 + sigma^2 = 1 (VP), lambda is
/// the log-SNR log(alpha/sigma). index is -1 for off-grid points (e.g. the
/// lambda-midpoint of a second-order solver step).
struct SchedulePoint {
    double alpha = 1.0;
    double sigma = 0.0;
    double lambda = 0.0;
    int index = -1;
};

/// Discretized variance-preserving noise schedule. Immutable after
/// construction and safe to share across threads.
class NoiseSchedule {
public:
    NoiseSchedule(ScheduleKind kind, int grid_size);

    int grid_size() const { return int(alpha_.size()); }
    ScheduleKind kind() const { return kind_; }
    int max_index() const { return grid_size() - 1; }

    double alpha(int t) const { return alpha_[check_index(t)]; }
    double sigma(int t) const { return sigma_[check_index(t)]; }
    double lambda(int t) const { return lambda_[check_index(t)]; }

    SchedulePoint point(int t) const;

    /// Exact VP point for an arbitrary log-SNR: alpha and sigma are
    /// functions of lambda alone under alpha^2 + sigma^2 = 1.
    static SchedulePoint point_at_lambda(double lambda);

private:
    int check_index(int t) const;

    ScheduleKind kind_;
    std::vector<double> alpha_;
    std::vector<double> sigma_;
    std::vector<double> lambda_;
};

NoiseSchedule make_schedule(ScheduleKind kind, int grid_size);
NoiseSchedule make_schedule(const std::string& kind, int grid_size);

/// Forward diffusion x_t = alpha_t x0 + sigma_t eps.
Vec add_noise(const NoiseSchedule& sched, const Vec& x0, int t, const Vec& eps);

/// Grid indices t > s > e >= 0 for the three-timestep losses.
struct TimestepTriple {
    int t = 0;
    int s = 0;
    int e = 0;
};

/// Warmup constants for the training-time sampler: t ~ U(20, 500 + warm)
/// with warm decaying linearly from 480 to 0 over the first 1500 epochs.
struct TimestepSampler {
    int t_min = 20;
    int t_base = 500;
    double warm_init = 480.0;
    int warm_epochs = 1500;

    double upper_bound(int epoch) const;
    TimestepTriple sample(Rng& rng, int epoch, int delta) const;
};

/// Samples (t, s, e) with the default warmup constants.
TimestepTriple sample_timesteps(Rng& rng, int epoch, int delta);

} // namespace gcslab
