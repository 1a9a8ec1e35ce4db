#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "misspec/kernel_spec.hpp"
#include "misspec/kernels.hpp"

namespace misspec {

using MeanFunction = std::function<double(const Point&)>;

// Built-in mean functions; arbitrary callables are accepted by GaussianModel as well.
struct MeanSpec {
    enum class Kind { Zero, Constant, Linear, Kink };

    Kind kind = Kind::Zero;
    double value = 0.0;      // Constant: m(x) = value; Linear/Kink: additive offset
    Eigen::VectorXd slope;   // Linear: m(x) = value + slope . x
    Eigen::VectorXd center;  // Kink: m(x) = value + scale * |x - center|^exponent
    double scale = 1.0;
    double exponent = 0.2;

    static MeanSpec zero() { return {}; }
    static MeanSpec constant(double v) { return {Kind::Constant, v, {}, {}, 1.0, 0.2}; }
    static MeanSpec linear(double offset, Eigen::VectorXd slope) {
        return {Kind::Linear, offset, std::move(slope), {}, 1.0, 0.2};
    }
    static MeanSpec kink(Eigen::VectorXd center, double exponent, double scale = 1.0) {
        return {Kind::Kink, 0.0, {}, std::move(center), scale, exponent};
    }

    [[nodiscard]] MeanFunction function() const;
    [[nodiscard]] std::string describe() const;

    bool operator==(const MeanSpec& other) const;
};

struct ModelSpec {
    MeanSpec mean;
    KernelSpec kernel;
    std::string label;
};

struct GaussianModel {
    MeanFunction mean;
    KernelPtr kernel;
    std::string label;

    static GaussianModel from_spec(const ModelSpec& spec);
};

/// Ordered, pairwise distinct observation sites.
class Design {
public:
    Design() = default;
    explicit Design(std::vector<Point> sites);

    [[nodiscard]] std::size_t size() const { return sites_.size(); }
    [[nodiscard]] std::span<const Point> sites() const { return sites_; }
    [[nodiscard]] const Point& operator[](std::size_t i) const { return sites_[i]; }
    [[nodiscard]] double min_pairwise_distance() const;

private:
    std::vector<Point> sites_;
};

/// h = intercept + sum_l coeff_l Z(t_l).
struct TargetFunctional {
    double intercept = 0.0;
    std::vector<std::pair<Point, double>> terms;

    static TargetFunctional point(Point x) { return {0.0, {{std::move(x), 1.0}}}; }
    void validate() const;
};

/// Cholesky factor of Sigma_n + jitter I.
struct GramFactor {
    Eigen::MatrixXd lower;
    double jitter = 0.0;

    [[nodiscard]] Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
    [[nodiscard]] double reconstruction_error(const Eigen::MatrixXd& gram) const;
};

/// Factorizes a Gram matrix, escalating a diagonal jitter from 1e-12 tr/n by
/// factors of 10 up to 1e-6 tr/n when the plain factorization fails.
GramFactor factorize_gram(const Eigen::MatrixXd& gram);
GramFactor build_gram(const Design& design, const CovarianceKernel& kernel);

struct LinearPredictor {
    Design design;
    Eigen::VectorXd weights;
    double intercept = 0.0;
    std::string built_under;

    [[nodiscard]] double apply(const Eigen::VectorXd& observations) const;
};

/// The kriging predictor of `target` from observations at `design` under `model`.
LinearPredictor kriging_predictor(const TargetFunctional& target, const Design& design, const GaussianModel& model);
/// Same, reusing a factor of the model's Gram matrix on `design`.
LinearPredictor kriging_predictor(const TargetFunctional& target, const Design& design, const GaussianModel& model,
                                  const GramFactor& factor);

struct ErrorMoments {
    double mean = 0.0;
    double variance = 0.0;
    double second_moment = 0.0;
};

/// Mean, variance and second moment of pred - h when the field follows eval_model.
ErrorMoments error_moments(const LinearPredictor& pred, const TargetFunctional& target,
                           const GaussianModel& eval_model);
/// Same, with the eval model's Gram matrix on the predictor's design precomputed.
ErrorMoments error_moments(const LinearPredictor& pred, const TargetFunctional& target,
                           const GaussianModel& eval_model, const Eigen::MatrixXd& eval_gram);

/// max over probes z of |pred_hat(z) - (pred_breve(z) - bias)|, where the two
/// predictors are built under models sharing one kernel and bias is the mean
/// error of pred_breve under model_hat.
double mean_shift_identity_check(const TargetFunctional& target, const Design& design, const GaussianModel& model_hat,
                                 const GaussianModel& model_breve, std::span<const Eigen::VectorXd> probes);

}  // namespace misspec
