#include "misspec/kriging.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "misspec/errors.hpp"

namespace misspec {

namespace {

// Neumaier's compensated summation.
class CompensatedSum {
public:
    void add(double v) {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v)) {
            comp_ += (sum_ - t) + v;
        } else {
            comp_ += (v - t) + sum_;
        }
        sum_ = t;
    }
    [[nodiscard]] double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

constexpr double kNegativeVarianceTol = 1e-10;

// Index of the first leading minor that is not positive definite, or -1.
long failing_leading_minor(const Eigen::MatrixXd& a) {
    const Eigen::Index n = a.rows();
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double d = a(j, j) - l.row(j).head(j).squaredNorm();
        if (!(d > 0.0)) {
            return static_cast<long>(j) + 1;
        }
        l(j, j) = std::sqrt(d);
        const Eigen::Index rest = n - j - 1;
        if (rest > 0) {
            l.col(j).tail(rest) =
                (a.col(j).tail(rest) - l.block(j + 1, 0, rest, j) * l.row(j).head(j).transpose()) / l(j, j);
        }
    }
    return -1;
}

}  // namespace

// ---------------------------------------------------------------------------

MeanFunction MeanSpec::function() const {
    switch (kind) {
        case Kind::Zero:
            return [](const Point&) { return 0.0; };
        case Kind::Constant: {
            const double v = value;
            return [v](const Point&) { return v; };
        }
        case Kind::Linear: {
            const double v = value;
            const Eigen::VectorXd s = slope;
            return [v, s](const Point& x) {
                if (x.size() != s.size()) {
                    throw InvalidArgument("linear mean: point dimension mismatch");
                }
                return v + s.dot(x);
            };
        }
        case Kind::Kink: {
            const double v = value;
            const double c = scale;
            const double e = exponent;
            const Eigen::VectorXd x0 = center;
            return [v, c, e, x0](const Point& x) {
                if (x.size() != x0.size()) {
                    throw InvalidArgument("kink mean: point dimension mismatch");
                }
                return v + c * std::pow((x - x0).norm(), e);
            };
        }
    }
    throw InvalidArgument("MeanSpec: unknown kind");
}

std::string MeanSpec::describe() const {
    std::ostringstream os;
    switch (kind) {
        case Kind::Zero:
            return "zero";
        case Kind::Constant:
            os << "constant(" << value << ")";
            break;
        case Kind::Linear:
            os << "linear(" << value << " + slope.x)";
            break;
        case Kind::Kink:
            os << "kink(" << value << " + " << scale << "|x - x0|^" << exponent << ")";
            break;
    }
    return os.str();
}

bool MeanSpec::operator==(const MeanSpec& other) const {
    const auto same_vec = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return a.size() == b.size() && (a.size() == 0 || a == b);
    };
    if (kind != other.kind) {
        return false;
    }
    switch (kind) {
        case Kind::Zero:
            return true;
        case Kind::Constant:
            return value == other.value;
        case Kind::Linear:
            return value == other.value && same_vec(slope, other.slope);
        case Kind::Kink:
            return value == other.value && scale == other.scale && exponent == other.exponent &&
                   same_vec(center, other.center);
    }
    return false;
}

GaussianModel GaussianModel::from_spec(const ModelSpec& spec) {
    return {spec.mean.function(), make_kernel(spec.kernel), spec.label};
}

// ---------------------------------------------------------------------------

Design::Design(std::vector<Point> sites) : sites_(std::move(sites)) {
    if (sites_.empty()) {
        throw InvalidArgument("Design: at least one site is required");
    }
    const auto dim = sites_.front().size();
    for (const auto& s : sites_) {
        if (s.size() != dim || !s.allFinite()) {
            throw InvalidArgument("Design: sites must be finite and of equal dimension");
        }
    }
    if (!(min_pairwise_distance() > 0.0)) {
        throw InvalidArgument("Design: sites must be pairwise distinct");
    }
}

double Design::min_pairwise_distance() const {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < sites_.size(); ++i) {
        for (std::size_t j = i + 1; j < sites_.size(); ++j) {
            best = std::min(best, (sites_[i] - sites_[j]).norm());
        }
    }
    return best;
}

void TargetFunctional::validate() const {
    if (terms.empty()) {
        throw InvalidArgument("TargetFunctional: at least one site term is required");
    }
    bool nonzero = false;
    for (const auto& [x, b] : terms) {
        nonzero = nonzero || b != 0.0;
    }
    if (!nonzero) {
        throw InvalidArgument("TargetFunctional: at least one coefficient must be nonzero");
    }
}

// ---------------------------------------------------------------------------

Eigen::VectorXd GramFactor::solve(const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd y = lower.triangularView<Eigen::Lower>().solve(rhs);
    return lower.transpose().triangularView<Eigen::Upper>().solve(y);
}

double GramFactor::reconstruction_error(const Eigen::MatrixXd& gram) const {
    Eigen::MatrixXd shifted = gram;
    shifted.diagonal().array() += jitter;
    return (lower * lower.transpose() - shifted).cwiseAbs().maxCoeff();
}

GramFactor factorize_gram(const Eigen::MatrixXd& gram) {
    const Eigen::Index n = gram.rows();
    if (n == 0 || gram.cols() != n) {
        throw InvalidArgument("factorize_gram: expected a nonempty square matrix");
    }
    const double base = gram.trace() / static_cast<double>(n);
    const double max_diag = gram.diagonal().maxCoeff();
    std::vector<double> ladder{0.0};
    for (double j = 1e-12; j <= 1e-6 * (1.0 + 1e-9); j *= 10.0) {
        ladder.push_back(j * base);
    }
    for (const double jitter : ladder) {
        Eigen::MatrixXd shifted = gram;
        shifted.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(shifted);
        if (llt.info() != Eigen::Success) {
            continue;
        }
        GramFactor f{llt.matrixL(), jitter};
        if (f.lower.allFinite() && f.lower.diagonal().minCoeff() > 0.0 &&
            f.reconstruction_error(gram) <= 1e-8 * max_diag) {
            return f;
        }
    }
    Eigen::MatrixXd shifted = gram;
    shifted.diagonal().array() += ladder.back();
    const long minor = failing_leading_minor(shifted);
    throw IllConditionedDesign("Gram matrix is not positive definite even with jitter " +
                                   std::to_string(ladder.back()) + "; leading minor " + std::to_string(minor) +
                                   " of " + std::to_string(n) + " fails",
                               minor);
}

GramFactor build_gram(const Design& design, const CovarianceKernel& kernel) {
    return factorize_gram(kernel.gram(design.sites()));
}

// ---------------------------------------------------------------------------

double LinearPredictor::apply(const Eigen::VectorXd& observations) const {
    if (observations.size() != weights.size()) {
        throw InvalidArgument("LinearPredictor::apply: observation vector has wrong length");
    }
    return intercept + weights.dot(observations);
}

LinearPredictor kriging_predictor(const TargetFunctional& target, const Design& design, const GaussianModel& model) {
    return kriging_predictor(target, design, model, build_gram(design, *model.kernel));
}

LinearPredictor kriging_predictor(const TargetFunctional& target, const Design& design, const GaussianModel& model,
                                  const GramFactor& factor) {
    target.validate();
    const auto n = static_cast<Eigen::Index>(design.size());
    if (factor.lower.rows() != n) {
        throw InvalidArgument("kriging_predictor: factor does not match the design");
    }
    Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
    double target_mean = target.intercept;
    for (const auto& [t, beta] : target.terms) {
        c += beta * model.kernel->cross(t, design.sites());
        target_mean += beta * model.mean(t);
    }
    LinearPredictor pred;
    pred.design = design;
    pred.weights = factor.solve(c);
    Eigen::VectorXd mean_n(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        mean_n[i] = model.mean(design[static_cast<std::size_t>(i)]);
    }
    pred.intercept = target_mean - pred.weights.dot(mean_n);
    pred.built_under = model.label;
    if (!pred.weights.allFinite() || !std::isfinite(pred.intercept)) {
        throw NumericalError("kriging_predictor: non-finite weights");
    }
    return pred;
}

ErrorMoments error_moments(const LinearPredictor& pred, const TargetFunctional& target,
                           const GaussianModel& eval_model) {
    return error_moments(pred, target, eval_model, eval_model.kernel->gram(pred.design.sites()));
}

ErrorMoments error_moments(const LinearPredictor& pred, const TargetFunctional& target,
                           const GaussianModel& eval_model, const Eigen::MatrixXd& eval_gram) {
    target.validate();
    const auto sites = pred.design.sites();
    const auto n = static_cast<Eigen::Index>(sites.size());
    if (pred.weights.size() != n || eval_gram.rows() != n) {
        throw InvalidArgument("error_moments: predictor, design and Gram matrix sizes disagree");
    }
    const auto& w = pred.weights;
    const auto& rho = *eval_model.kernel;

    CompensatedSum mean;
    mean.add(pred.intercept);
    for (Eigen::Index i = 0; i < n; ++i) {
        mean.add(w[i] * eval_model.mean(sites[static_cast<std::size_t>(i)]));
    }
    mean.add(-target.intercept);
    for (const auto& [t, beta] : target.terms) {
        mean.add(-beta * eval_model.mean(t));
    }

    // w' Sigma w - 2 w' c + sum beta beta' rho(t, t')
    CompensatedSum var;
    for (Eigen::Index j = 0; j < n; ++j) {
        var.add(w[j] * w[j] * eval_gram(j, j));
        for (Eigen::Index i = j + 1; i < n; ++i) {
            var.add(2.0 * w[i] * w[j] * eval_gram(i, j));
        }
    }
    for (const auto& [t, beta] : target.terms) {
        for (Eigen::Index i = 0; i < n; ++i) {
            var.add(-2.0 * beta * w[i] * rho(t, sites[static_cast<std::size_t>(i)]));
        }
    }
    for (const auto& [t, beta] : target.terms) {
        for (const auto& [t2, beta2] : target.terms) {
            var.add(beta * beta2 * rho(t, t2));
        }
    }

    ErrorMoments m;
    m.mean = mean.value();
    m.variance = var.value();
    if (m.variance < -kNegativeVarianceTol || !std::isfinite(m.variance)) {
        throw NumericalError("error_moments: negative error variance " + std::to_string(m.variance));
    }
    m.variance = std::max(m.variance, 0.0);
    m.second_moment = m.variance + m.mean * m.mean;
    return m;
}

double mean_shift_identity_check(const TargetFunctional& target, const Design& design, const GaussianModel& model_hat,
                                 const GaussianModel& model_breve, std::span<const Eigen::VectorXd> probes) {
    const GramFactor factor = build_gram(design, *model_hat.kernel);
    const LinearPredictor pred_hat = kriging_predictor(target, design, model_hat, factor);
    const LinearPredictor pred_breve = kriging_predictor(target, design, model_breve, factor);
    const double bias = error_moments(pred_breve, target, model_hat).mean;
    double worst = 0.0;
    for (const auto& z : probes) {
        worst = std::max(worst, std::abs(pred_hat.apply(z) - (pred_breve.apply(z) - bias)));
    }
    return worst;
}

}  // namespace misspec
