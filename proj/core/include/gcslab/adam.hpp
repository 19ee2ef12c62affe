#pragma once

#include "gcslab/types.hpp"

namespace gcslab {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Bias-corrected Adam over one flat parameter vector.
class Adam {
public:
    Adam(int dim, AdamConfig config);

    /// In-place update of params given grads.
    void step(Vec& params, const Vec& grads);

    int steps_taken() const { return steps_; }

private:
    AdamConfig config_;
    Vec m_;
    Vec v_;
    int steps_ = 0;
};

} // namespace gcslab
