#include "gcslab/adam.hpp"

#include <cmath>

namespace gcslab {

Adam::Adam(int dim, AdamConfig config)
    : config_(config), m_(Vec::Zero(dim)), v_(Vec::Zero(dim)) {
    require(dim >= 1, "adam dimension must be >= 1");
    require(config.lr > 0.0, "adam learning rate must be > 0");
}

void Adam::step(Vec& params, const Vec& grads) {
    require(params.size() == m_.size() && grads.size() == m_.size(),
            "adam parameter/gradient shape mismatch");
    ++steps_;
    m_ = config_.beta1 * m_ + (1.0 - config_.beta1) * grads;
    v_ = config_.beta2 * v_ + (1.0 - config_.beta2) * grads.cwiseProduct(grads);
    double c1 = 1.0 - std::pow(config_.beta1, steps_);
    double c2 = 1.0 - std::pow(config_.beta2, steps_);
    for (long i = 0; i < params.size(); ++i) {
        double mhat = m_[i] / c1;
        double vhat = v_[i] / c2;
        params[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
}

} // namespace gcslab
