#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "spinglass/errors.hpp"

namespace spinglass {

// Mixed even-spin mixture xi(x) = sum_p beta_p^2 x^{2p}.  Index p is the
// half-degree: betas()[0] is the 2-spin (SK) coefficient, betas()[1] the
// 4-spin one, and so on.  All-zero sequences are accepted so that degenerate
// reference cases stay expressible; operations that genuinely need a
// nontrivial mixture check is_trivial() themselves.
class MixtureSpec {
public:
    MixtureSpec() : betas_{0.0} {} // zero mixture

    explicit MixtureSpec(std::vector<double> betas) : betas_(std::move(betas)) {
        if (betas_.empty()) throw domain_error("MixtureSpec: empty beta sequence");
        for (double b : betas_) {
            if (!(b >= 0.0) || !std::isfinite(b))
                throw domain_error("MixtureSpec: beta_p must be finite and >= 0");
        }
        if (!std::isfinite(xi(1.0))) throw domain_error("MixtureSpec: xi(1) not finite");
    }

    const std::vector<double>& betas() const { return betas_; }
    int terms() const { return static_cast<int>(betas_.size()); }
    bool is_trivial() const {
        return std::all_of(betas_.begin(), betas_.end(), [](double b) { return b == 0.0; });
    }

    // xi, xi' or xi'' at x in [-1,1]
    double xi(double x, int order = 0) const {
        check_x(x);
        if (order < 0 || order > 2) throw domain_error("xi: order must be 0, 1 or 2");
        double acc = 0.0;
        for (int i = terms() - 1; i >= 0; --i) {
            const double b2 = betas_[i] * betas_[i];
            if (b2 == 0.0) continue;
            const int tp = 2 * (i + 1);
            switch (order) {
                case 0: acc += b2 * power(x, tp); break;
                case 1: acc += b2 * tp * power(x, tp - 1); break;
                default: acc += b2 * tp * (tp - 1) * power(x, tp - 2); break;
            }
        }
        return acc;
    }

    // theta(x) = x xi'(x) - xi(x)
    double theta(double x) const { return x * xi(x, 1) - xi(x, 0); }

    bool operator==(const MixtureSpec& o) const { return betas_ == o.betas_; }

private:
    static void check_x(double x) {
        if (!(std::fabs(x) <= 1.0)) throw domain_error("mixture: |x| must be <= 1");
    }
    static double power(double x, int e) {
        double r = 1.0;
        for (int i = 0; i < e; ++i) r *= x;
        return r;
    }

    std::vector<double> betas_;
};

// Joint law of the two external fields:
// (h^1, h^2) = (mean1 + std1*g^1, mean2 + std2*g^2) with E g^1 g^2 = corr.
struct FieldLaw {
    double mean1 = 0.0, mean2 = 0.0;
    double std1 = 0.0, std2 = 0.0;
    double corr = 0.0;

    void validate() const {
        if (!(std1 >= 0.0) || !(std2 >= 0.0)) throw domain_error("FieldLaw: std must be >= 0");
        if (!(std::fabs(corr) <= 1.0)) throw domain_error("FieldLaw: |corr| must be <= 1");
        for (double v : {mean1, mean2, std1, std2, corr})
            if (!std::isfinite(v)) throw domain_error("FieldLaw: non-finite entry");
    }
};

// Marginal of one system's field: h = mean + std * g.
struct FieldMarginal {
    double mean = 0.0;
    double std = 0.0;
    bool degenerate() const { return mean == 0.0 && std == 0.0; }
};

// Two mixtures plus the disorder correlations t_p and the joint field law.
// Sequences are padded to a common length with zeros on construction.
class CoupledModelSpec {
public:
    CoupledModelSpec(MixtureSpec spec1, MixtureSpec spec2, std::vector<double> t, FieldLaw field)
        : spec1_(std::move(spec1)), spec2_(std::move(spec2)), t_(std::move(t)), field_(field) {
        field_.validate();
        for (double tp : t_) {
            if (!(tp >= 0.0 && tp <= 1.0)) throw domain_error("CoupledModelSpec: t_p must lie in [0,1]");
        }
        const std::size_t len =
            std::max({spec1_.betas().size(), spec2_.betas().size(), t_.size()});
        spec1_ = pad(spec1_, len);
        spec2_ = pad(spec2_, len);
        t_.resize(len, 0.0);
    }

    const MixtureSpec& spec1() const { return spec1_; }
    const MixtureSpec& spec2() const { return spec2_; }
    const std::vector<double>& correlations() const { return t_; }
    const FieldLaw& field_law() const { return field_; }

    FieldMarginal field1() const { return {field_.mean1, field_.std1}; }
    FieldMarginal field2() const { return {field_.mean2, field_.std2}; }

    // xi_{1,2} and derivatives, coefficients t_p beta_{1,p} beta_{2,p}
    double cross_xi(double x, int order = 0) const {
        if (!(std::fabs(x) <= 1.0)) throw domain_error("cross_xi: |x| must be <= 1");
        if (order < 0 || order > 2) throw domain_error("cross_xi: order must be 0, 1 or 2");
        double acc = 0.0;
        for (int i = spec1_.terms() - 1; i >= 0; --i) {
            const double c = t_[i] * spec1_.betas()[i] * spec2_.betas()[i];
            if (c == 0.0) continue;
            const int tp = 2 * (i + 1);
            double xe = 1.0;
            for (int e = 0; e < tp - order; ++e) xe *= x;
            double fac = 1.0;
            for (int e = 0; e < order; ++e) fac *= tp - e;
            acc += c * fac * xe;
        }
        return acc;
    }

    double cross_theta(double x) const { return x * cross_xi(x, 1) - cross_xi(x, 0); }

    bool identical_systems() const {
        if (!(spec1_ == spec2_)) return false;
        for (int i = 0; i < spec1_.terms(); ++i)
            if (spec1_.betas()[i] != 0.0 && t_[i] != 1.0) return false;
        return true;
    }

private:
    static MixtureSpec pad(const MixtureSpec& s, std::size_t len) {
        auto b = s.betas();
        b.resize(std::max(b.size(), len), 0.0);
        return MixtureSpec(std::move(b));
    }

    MixtureSpec spec1_, spec2_;
    std::vector<double> t_;
    FieldLaw field_;
};

// xi'_{1,1}(v1)^{1/2} xi'_{2,2}(v2)^{1/2} - xi'_{1,2}(sqrt(v1 v2)),
// nonnegative for t_p in [0,1] by Cauchy-Schwarz.
inline double cauchy_schwarz_gap(const CoupledModelSpec& coupled, double v1, double v2) {
    if (!(v1 > 0.0 && v1 <= 1.0) || !(v2 > 0.0 && v2 <= 1.0))
        throw domain_error("cauchy_schwarz_gap: v1, v2 must lie in (0,1]");
    return std::sqrt(coupled.spec1().xi(v1, 1)) * std::sqrt(coupled.spec2().xi(v2, 1)) -
           coupled.cross_xi(std::sqrt(v1 * v2), 1);
}

// Structural report on the temperature sequences: the largest index subset on
// which beta_{2,p} = nu * beta_{1,p} for a common nu, plus a deviating index
// if one exists.  Density of the proportional set (the Muntz condition) is
// never verifiable from a finite truncation, so density_verifiable is false.
struct ConditionReport {
    std::optional<double> proportionality_nu;
    std::optional<int> deviating_index;       // 1-based p_0
    std::vector<int> shared_support;          // 1-based indices where both betas are nonzero
    std::vector<int> proportional_set;        // subset where beta_{2,p} = nu beta_{1,p} exactly
    bool density_verifiable = false;
    std::string notes;
};

inline ConditionReport diagnose_conditions(const CoupledModelSpec& coupled) {
    ConditionReport rep;
    const auto& b1 = coupled.spec1().betas();
    const auto& b2 = coupled.spec2().betas();
    for (std::size_t i = 0; i < b1.size(); ++i)
        if (b1[i] != 0.0 && b2[i] != 0.0) rep.shared_support.push_back(static_cast<int>(i) + 1);

    if (rep.shared_support.empty()) {
        rep.notes = "no shared support; no common proportionality constant";
        return rep;
    }

    // ratios on the shared support; the most frequent one is the candidate nu
    std::vector<double> ratios;
    for (int p : rep.shared_support) ratios.push_back(b2[p - 1] / b1[p - 1]);
    std::vector<double> sorted = ratios;
    std::sort(sorted.begin(), sorted.end());
    double best_nu = sorted[0];
    std::size_t best_count = 0;
    const double rel_tol = 1e-12;
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j < sorted.size() && std::fabs(sorted[j] - sorted[i]) <= rel_tol * std::fabs(sorted[i]))
            ++j;
        if (j - i > best_count) {
            best_count = j - i;
            best_nu = sorted[i];
        }
        i = j;
    }
    rep.proportionality_nu = best_nu;
    for (std::size_t i = 0; i < ratios.size(); ++i) {
        if (std::fabs(ratios[i] - best_nu) > rel_tol * std::max(1.0, std::fabs(best_nu))) {
            if (!rep.deviating_index) rep.deviating_index = rep.shared_support[i];
        } else {
            rep.proportional_set.push_back(rep.shared_support[i]);
        }
    }
    // indices where exactly one beta is nonzero also deviate from any common nu
    if (!rep.deviating_index) {
        for (std::size_t i = 0; i < b1.size(); ++i) {
            const bool one = b1[i] != 0.0, two = b2[i] != 0.0;
            if (one != two) {
                rep.deviating_index = static_cast<int>(i) + 1;
                break;
            }
        }
    }
    rep.notes = "finite truncation: the Muntz density requirement on the proportional set "
                "cannot be verified";
    return rep;
}

} // namespace spinglass
