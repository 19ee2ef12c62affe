#pragma once

#include "gcslab/schedule.hpp"
#include "gcslab/types.hpp"

#include <map>
#include <string>
#include <vector>

namespace gcslab {

/// Noise-prediction interface the solver and losses evaluate. Implemented
/// by the analytic Gaussian-mixture teacher and by test doubles.
class ScoreModel {
public:
    virtual ~ScoreModel() = default;

    /// eps(x_t; t, y), the model's noise prediction at schedule point pt.
    virtual Vec epsilon(const Vec& x, const SchedulePoint& pt, const Condition& y) const = 0;

    /// J^T cot where J = d eps / d x_t. Exact for the analytic teacher.
    virtual Vec epsilon_vjp(const Vec& x, const SchedulePoint& pt, const Condition& y,
                            const Vec& cot) const = 0;

    virtual int dim() const = 0;
};

/// Classifier-free guidance combination eps_null + w (eps_y - eps_null).
/// w == 1 and w == 0 return the conditional / unconditional prediction
/// bit-exactly.
Vec epsilon_cfg(const ScoreModel& model, const Vec& x, const SchedulePoint& pt,
                const Condition& y, double w);
Vec epsilon_cfg_vjp(const ScoreModel& model, const Vec& x, const SchedulePoint& pt,
                    const Condition& y, double w, const Vec& cot);

/// Analytic diffusion teacher: an isotropic Gaussian mixture over flattened
/// latent images, with condition labels selecting component subsets.
/// Frozen after construction; all queries are pure.
class GmmTeacher : public ScoreModel {
public:
    struct Component {
        double weight = 1.0;
        double variance = 1.0;
        Vec mean;
        std::vector<std::string> tags;
    };

    GmmTeacher(std::vector<Component> components, int latent_dim);

    int dim() const override { return latent_dim_; }
    int component_count() const { return int(components_.size()); }
    const Component& component(int i) const { return components_[i]; }

    /// Component indices selected by y (all components for the null label),
    /// with weights renormalized over the subset.
    const std::vector<int>& condition_subset(const Condition& y) const;
    std::vector<std::string> labels() const;

    /// Exact E[x0 | x_t, y] via per-component Gaussian posteriors with
    /// log-sum-exp responsibilities.
    Vec posterior_mean(const Vec& x, const SchedulePoint& pt, const Condition& y) const;

    Vec epsilon(const Vec& x, const SchedulePoint& pt, const Condition& y) const override;
    Vec epsilon_vjp(const Vec& x, const SchedulePoint& pt, const Condition& y,
                    const Vec& cot) const override;

    /// Dense d eps / d x_t. Latent dimension capped at 4096.
    Mat score_jacobian(const Vec& x, const SchedulePoint& pt, const Condition& y) const;

    /// Distance from x to the nearest mean in the conditioned subset; the
    /// distillation-error proxy logged by the trainer.
    double distance_to_nearest_mode(const Vec& x, const Condition& y) const;

    void save(const std::string& path) const;
    static GmmTeacher load(const std::string& path);

private:
    struct Responsibilities {
        std::vector<double> r;       // softmax weights over the subset
        std::vector<double> s2;      // per-component marginal variance
        std::vector<int> idx;        // component indices
    };
    Responsibilities responsibilities(const Vec& x, const SchedulePoint& pt,
                                      const Condition& y) const;

    std::vector<Component> components_;
    int latent_dim_;
    std::vector<int> all_indices_;
    std::map<std::string, std::vector<int>> subsets_;
};

/// One mixture component per view image; condition "target" selects the
/// target renders, the null condition selects everything.
GmmTeacher build_teacher(const std::vector<LatentImage>& target_views,
                         const std::vector<LatentImage>& distractor_views,
                         double variance);

inline const char* kTargetLabel = "target";
inline const char* kDistractorLabel = "distractor";

} // namespace gcslab
