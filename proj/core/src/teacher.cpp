#include "gcslab/teacher.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace gcslab {

Vec epsilon_cfg(const ScoreModel& model, const Vec& x, const SchedulePoint& pt,
                const Condition& y, double w) {
    require(w >= 0.0, "cfg weight must be >= 0");
    if (w == 1.0) return model.epsilon(x, pt, y);
    Vec e0 = model.epsilon(x, pt, Condition::null());
    if (w == 0.0 || y.is_null) return e0;
    Vec ey = model.epsilon(x, pt, y);
    return e0 + w * (ey - e0);
}

Vec epsilon_cfg_vjp(const ScoreModel& model, const Vec& x, const SchedulePoint& pt,
                    const Condition& y, double w, const Vec& cot) {
    if (w == 1.0) return model.epsilon_vjp(x, pt, y, cot);
    Vec v0 = model.epsilon_vjp(x, pt, Condition::null(), cot);
    if (w == 0.0 || y.is_null) return v0;
    Vec vy = model.epsilon_vjp(x, pt, y, cot);
    return v0 + w * (vy - v0);
}

GmmTeacher::GmmTeacher(std::vector<Component> components, int latent_dim)
    : components_(std::move(components)), latent_dim_(latent_dim) {
    require(!components_.empty(), "teacher needs at least one component");
    require(latent_dim_ >= 1, "latent dim must be >= 1");

    double total = 0.0;
    for (int i = 0; i < int(components_.size()); ++i) {
        const Component& c = components_[i];
        require(c.variance > 0.0, "component variance must be > 0");
        require(int(c.mean.size()) == latent_dim_, "component mean dim mismatch");
        total += c.weight;
        all_indices_.push_back(i);
        for (const std::string& tag : c.tags) subsets_[tag].push_back(i);
    }
    require(std::abs(total - 1.0) < 1e-12, "component weights must sum to 1");
}

const std::vector<int>& GmmTeacher::condition_subset(const Condition& y) const {
    if (y.is_null) return all_indices_;
    auto it = subsets_.find(y.label);
    require(it != subsets_.end(), "unknown condition label: " + y.label);
    return it->second;
}

std::vector<std::string> GmmTeacher::labels() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : subsets_) out.push_back(name);
    return out;
}

GmmTeacher::Responsibilities GmmTeacher::responsibilities(const Vec& x,
                                                          const SchedulePoint& pt,
                                                          const Condition& y) const {
    const std::vector<int>& idx = condition_subset(y);
    Responsibilities out;
    out.idx = idx;
    out.r.resize(idx.size());
    out.s2.resize(idx.size());

    double wsum = 0.0;
    for (int i : idx) wsum += components_[i].weight;

    // log p(x_t | i) + log w_i, stabilized with log-sum-exp. The marginal of
    // component i at noise level (alpha, sigma) is N(alpha mu_i, s2_i I).
    std::vector<double> logits(idx.size());
    double max_logit = -std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < idx.size(); ++k) {
        const Component& c = components_[idx[k]];
        double s2 = pt.alpha * pt.alpha * c.variance + pt.sigma * pt.sigma;
        out.s2[k] = s2;
        double sq = (x - pt.alpha * c.mean).squaredNorm();
        logits[k] = std::log(c.weight / wsum) - 0.5 * sq / s2
                    - 0.5 * double(latent_dim_) * std::log(s2);
        max_logit = std::max(max_logit, logits[k]);
    }
    double denom = 0.0;
    for (double l : logits) denom += std::exp(l - max_logit);
    for (size_t k = 0; k < idx.size(); ++k) {
        out.r[k] = std::exp(logits[k] - max_logit) / denom;
    }
    return out;
}

Vec GmmTeacher::posterior_mean(const Vec& x, const SchedulePoint& pt,
                               const Condition& y) const {
    Responsibilities resp = responsibilities(x, pt, y);
    Vec mean = Vec::Zero(latent_dim_);
    for (size_t k = 0; k < resp.idx.size(); ++k) {
        const Component& c = components_[resp.idx[k]];
        double gain = pt.alpha * c.variance / resp.s2[k];
        mean += resp.r[k] * (c.mean + gain * (x - pt.alpha * c.mean));
    }
    return mean;
}

Vec GmmTeacher::epsilon(const Vec& x, const SchedulePoint& pt, const Condition& y) const {
    return (x - pt.alpha * posterior_mean(x, pt, y)) / pt.sigma;
}

Vec GmmTeacher::epsilon_vjp(const Vec& x, const SchedulePoint& pt, const Condition& y,
                            const Vec& cot) const {
    // eps = sigma * sum_k r_k u_k with u_k = (x - alpha mu_k) / s2_k, so
    // J = sigma [ (sum r_k / s2_k) I + ubar ubar^T - sum r_k u_k u_k^T ],
    // symmetric, applied in O(K d) without forming the matrix.
    Responsibilities resp = responsibilities(x, pt, y);
    Vec ubar = Vec::Zero(latent_dim_);
    double diag = 0.0;
    Vec acc = Vec::Zero(latent_dim_);
    std::vector<Vec> us(resp.idx.size());
    for (size_t k = 0; k < resp.idx.size(); ++k) {
        const Component& c = components_[resp.idx[k]];
        us[k] = (x - pt.alpha * c.mean) / resp.s2[k];
        ubar += resp.r[k] * us[k];
        diag += resp.r[k] / resp.s2[k];
    }
    for (size_t k = 0; k < resp.idx.size(); ++k) {
        acc -= resp.r[k] * us[k] * us[k].dot(cot);
    }
    return pt.sigma * (diag * cot + ubar * ubar.dot(cot) + acc);
}

Mat GmmTeacher::score_jacobian(const Vec& x, const SchedulePoint& pt,
                               const Condition& y) const {
    require(latent_dim_ <= 4096, "score_jacobian: latent dimension cap exceeded");
    Responsibilities resp = responsibilities(x, pt, y);
    Mat jac = Mat::Zero(latent_dim_, latent_dim_);
    Vec ubar = Vec::Zero(latent_dim_);
    double diag = 0.0;
    std::vector<Vec> us(resp.idx.size());
    for (size_t k = 0; k < resp.idx.size(); ++k) {
        const Component& c = components_[resp.idx[k]];
        us[k] = (x - pt.alpha * c.mean) / resp.s2[k];
        ubar += resp.r[k] * us[k];
        diag += resp.r[k] / resp.s2[k];
    }
    jac.diagonal().array() += diag;
    jac += ubar * ubar.transpose();
    for (size_t k = 0; k < resp.idx.size(); ++k) {
        jac -= resp.r[k] * us[k] * us[k].transpose();
    }
    return pt.sigma * jac;
}

double GmmTeacher::distance_to_nearest_mode(const Vec& x, const Condition& y) const {
    double best = std::numeric_limits<double>::infinity();
    for (int i : condition_subset(y)) {
        best = std::min(best, (x - components_[i].mean).norm());
    }
    return best;
}

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

void GmmTeacher::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write teacher file: " + path);
    out << component_count() << " " << latent_dim_ << "\n";
    for (const Component& c : components_) {
        out << format_double(c.weight) << " " << format_double(c.variance);
        for (int i = 0; i < latent_dim_; ++i) out << " " << format_double(c.mean[i]);
        for (const std::string& tag : c.tags) out << " " << tag;
        out << "\n";
    }
    if (!out) throw std::runtime_error("failed writing teacher file: " + path);
}

GmmTeacher GmmTeacher::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open teacher file: " + path);
    int count = 0, dim = 0;
    in >> count >> dim;
    if (!in || count < 1 || dim < 1) {
        throw std::runtime_error("malformed teacher header in " + path);
    }
    std::string rest;
    std::getline(in, rest);
    std::vector<Component> comps;
    for (int i = 0; i < count; ++i) {
        std::string line;
        if (!std::getline(in, line)) {
            throw std::runtime_error("truncated teacher file: " + path);
        }
        std::istringstream ls(line);
        Component c;
        c.mean = Vec(dim);
        if (!(ls >> c.weight >> c.variance)) {
            throw std::runtime_error("malformed teacher component in " + path);
        }
        for (int k = 0; k < dim; ++k) {
            if (!(ls >> c.mean[k])) {
                throw std::runtime_error("malformed teacher mean in " + path);
            }
        }
        std::string tag;
        while (ls >> tag) c.tags.push_back(tag);
        comps.push_back(std::move(c));
    }
    return GmmTeacher(std::move(comps), dim);
}

GmmTeacher build_teacher(const std::vector<LatentImage>& target_views,
                         const std::vector<LatentImage>& distractor_views,
                         double variance) {
    require(!target_views.empty(), "build_teacher: need at least one target view");
    require(variance > 0.0, "build_teacher: variance must be > 0");

    int total = int(target_views.size() + distractor_views.size());
    int dim = target_views.front().dims.size();
    std::vector<GmmTeacher::Component> comps;
    comps.reserve(total);
    for (const LatentImage& v : target_views) {
        require(v.dims.size() == dim, "build_teacher: view shape mismatch");
        comps.push_back({1.0 / total, variance, v.data, {kTargetLabel}});
    }
    for (const LatentImage& v : distractor_views) {
        require(v.dims.size() == dim, "build_teacher: view shape mismatch");
        comps.push_back({1.0 / total, variance, v.data, {kDistractorLabel}});
    }
    return GmmTeacher(std::move(comps), dim);
}

} // namespace gcslab
