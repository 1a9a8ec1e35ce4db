#include "misspec/kernel_spec.hpp"

#include <cmath>
#include <map>

#include "misspec/errors.hpp"

namespace misspec {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

AnalyticLimit invert(AnalyticLimit l) {
    switch (l.kind) {
        case LimitKind::Converges:
            return {LimitKind::Converges, 1.0 / *l.a};
        case LimitKind::DivergesToZero:
            return {LimitKind::DivergesToInfinity, std::nullopt};
        case LimitKind::DivergesToInfinity:
            return {LimitKind::DivergesToZero, std::nullopt};
        case LimitKind::Inconclusive:
            break;
    }
    return l;
}

AnalyticLimit scaled(AnalyticLimit l, double s) {
    if (l.kind == LimitKind::Converges) {
        l.a = *l.a * s;
    }
    return l;
}

// Ratio limit of two power-law families c~ (b + l^2)^-p~ / (c (b + l^2)^-p).
AnalyticLimit power_law_limit(double c, double p, double c_tilde, double p_tilde) {
    if (p_tilde > p) {
        return {LimitKind::DivergesToZero, std::nullopt};
    }
    if (p_tilde < p) {
        return {LimitKind::DivergesToInfinity, std::nullopt};
    }
    return {LimitKind::Converges, c_tilde / c};
}

}  // namespace

PeriodicSpectrum PeriodicSpec::spectrum() const { return spectrum(truncation); }

PeriodicSpectrum PeriodicSpec::spectrum(int truncation_override) const {
    if (!table.empty()) {
        std::map<std::vector<int>, double> lookup;
        for (const auto& e : table) {
            if (static_cast<int>(e.k.size()) != dim) {
                throw InvalidArgument("PeriodicSpec: table index has wrong dimension");
            }
            std::vector<int> neg(e.k);
            for (auto& v : neg) {
                v = -v;
            }
            lookup[e.k] = e.mass;
            lookup[neg] = e.mass;
        }
        return PeriodicSpectrum(dim, truncation_override, [lookup](std::span<const int> k) {
            const auto it = lookup.find(std::vector<int>(k.begin(), k.end()));
            return it == lookup.end() ? 0.0 : it->second;
        });
    }
    if (!(scale > 0.0) || !(decay > 0.0) || bump < 0.0) {
        throw InvalidArgument("PeriodicSpec: scale and decay must be positive, bump nonnegative");
    }
    const double c = scale;
    const double p = decay;
    const double b = bump;
    return PeriodicSpectrum(dim, truncation_override, [c, p, b](std::span<const int> k) {
        double k2 = 0.0;
        for (int v : k) {
            k2 += static_cast<double>(v) * v;
        }
        return c * std::pow(1.0 + k2, -p) * (1.0 + b / (1.0 + std::sqrt(k2)));
    });
}

std::string KernelSpec::family_name() const {
    return std::visit(Overloaded{
                          [](const MaternSpec&) { return std::string("matern"); },
                          [](const PeriodicSpec&) { return std::string("periodic"); },
                          [](const SphereLegendreSpec&) { return std::string("sphere_legendre_matern"); },
                          [](const SphereSpdeSpec&) { return std::string("sphere_spde"); },
                          [](const GreatCircleMaternSpec&) { return std::string("great_circle_matern"); },
                          [](const ChordalMaternSpec&) { return std::string("chordal_matern"); },
                          [](const ConstantSpec&) { return std::string("constant"); },
                      },
                      family);
}

Domain KernelSpec::domain() const {
    return std::visit(Overloaded{
                          [](const MaternSpec& s) { return s.domain; },
                          [](const PeriodicSpec& s) { return Domain::torus(s.dim); },
                          [](const ConstantSpec& s) { return s.domain; },
                          [](const auto&) { return Domain::sphere(); },
                      },
                      family);
}

KernelPtr make_kernel(const KernelSpec& spec) {
    KernelPtr k = std::visit(
        Overloaded{
            [](const MaternSpec& s) -> KernelPtr { return std::make_shared<MaternKernel>(s.params, s.domain); },
            [](const PeriodicSpec& s) -> KernelPtr { return std::make_shared<PeriodicKernel>(s.spectrum()); },
            [](const SphereLegendreSpec& s) -> KernelPtr {
                return std::make_shared<SphereLegendreMaternKernel>(s.params);
            },
            [](const SphereSpdeSpec& s) -> KernelPtr { return std::make_shared<SphereSpdeKernel>(s.params); },
            [](const GreatCircleMaternSpec& s) -> KernelPtr {
                return std::make_shared<GreatCircleMaternKernel>(s.params);
            },
            [](const ChordalMaternSpec& s) -> KernelPtr { return std::make_shared<ChordalMaternKernel>(s.params); },
            [](const ConstantSpec& s) -> KernelPtr { return std::make_shared<ConstantKernel>(s.c, s.domain); },
        },
        spec.family);
    if (spec.scale != 1.0) {
        return std::make_shared<ScaledKernel>(spec.scale, std::move(k));
    }
    return k;
}

std::optional<SpectralDensityPtr> spectral_density_of(const KernelSpec& spec) {
    if (const auto* m = std::get_if<MaternSpec>(&spec.family)) {
        return std::make_shared<MaternSpectralDensity>(m->params, spec.scale);
    }
    return std::nullopt;
}

std::optional<EigenSequence> eigen_sequence_of(const KernelSpec& spec, int terms) {
    auto scale_seq = [&](EigenSequence seq) {
        if (spec.scale != 1.0) {
            for (auto& v : seq.values) {
                v *= spec.scale;
            }
        }
        return seq;
    };
    if (const auto* p = std::get_if<PeriodicSpec>(&spec.family)) {
        return scale_seq(eigen_sequence_of(p->spectrum(terms > 0 ? terms : p->truncation)));
    }
    if (const auto* s = std::get_if<SphereLegendreSpec>(&spec.family)) {
        auto params = s->params;
        if (terms > 0) {
            params.l_max = terms;
        }
        return scale_seq(eigen_sequence_of(params));
    }
    if (const auto* s = std::get_if<SphereSpdeSpec>(&spec.family)) {
        auto params = s->params;
        if (terms > 0) {
            params.l_max = terms;
        }
        return scale_seq(eigen_sequence_of(params));
    }
    return std::nullopt;
}

bool share_eigenbasis(const KernelSpec& a, const KernelSpec& b) {
    const auto sphere_series = [](const KernelSpec& s) {
        return std::holds_alternative<SphereLegendreSpec>(s.family) || std::holds_alternative<SphereSpdeSpec>(s.family);
    };
    if (sphere_series(a) && sphere_series(b)) {
        return true;
    }
    const auto* pa = std::get_if<PeriodicSpec>(&a.family);
    const auto* pb = std::get_if<PeriodicSpec>(&b.family);
    return pa && pb && pa->dim == pb->dim;
}

AnalyticLimit analytic_limit(const KernelSpec& truth, const KernelSpec& wrong) {
    const double s = wrong.scale / truth.scale;
    if (truth.family == wrong.family) {
        return {LimitKind::Converges, s};
    }
    if (const auto* m = std::get_if<MaternSpec>(&truth.family)) {
        if (const auto* mw = std::get_if<MaternSpec>(&wrong.family)) {
            return scaled(matern_ratio_limit(m->params, mw->params), s);
        }
    }
    if (const auto* p = std::get_if<PeriodicSpec>(&truth.family)) {
        if (const auto* pw = std::get_if<PeriodicSpec>(&wrong.family)) {
            if (p->dim == pw->dim && p->table.empty() && pw->table.empty()) {
                return scaled(power_law_limit(p->scale, p->decay, pw->scale, pw->decay), s);
            }
        }
    }
    const auto* leg = std::get_if<SphereLegendreSpec>(&truth.family);
    const auto* spde = std::get_if<SphereSpdeSpec>(&truth.family);
    const auto* leg_w = std::get_if<SphereLegendreSpec>(&wrong.family);
    const auto* spde_w = std::get_if<SphereSpdeSpec>(&wrong.family);
    if (leg && spde_w) {
        return scaled(sphere_eigen_ratio_limit(leg->params, spde_w->params), s);
    }
    if (spde && leg_w) {
        return scaled(invert(sphere_eigen_ratio_limit(leg_w->params, spde->params)), s);
    }
    if (leg && leg_w) {
        const auto& a = leg->params;
        const auto& b = leg_w->params;
        return scaled(power_law_limit(a.sigma1 * a.sigma1, a.nu1, b.sigma1 * b.sigma1, b.nu1), s);
    }
    if (spde && spde_w) {
        const auto& a = spde->params;
        const auto& b = spde_w->params;
        return scaled(power_law_limit(1.0 / (a.tau * a.tau), a.nu, 1.0 / (b.tau * b.tau), b.nu), s);
    }
    return {LimitKind::Inconclusive, std::nullopt};
}

}  // namespace misspec
