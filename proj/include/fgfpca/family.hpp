#pragma once

#include <string>
#include <string_view>

namespace fgfpca {

enum class Family { binomial, poisson, gaussian };

/// Exponential family with its canonical link.
///
/// The cumulant A(eta) gives the log density up to a data-only term:
/// log f(z | eta) = (z * eta - A(eta)) / dispersion + c(z, dispersion).
/// Binomial here means Bernoulli (one trial per cell).
class LinkFamily {
public:
    constexpr LinkFamily() = default;
    constexpr explicit LinkFamily(Family f) : family_(f) {}

    static LinkFamily parse(std::string_view name);

    [[nodiscard]] constexpr Family family() const { return family_; }
    [[nodiscard]] std::string_view name() const;

    [[nodiscard]] double link(double mu) const;
    [[nodiscard]] double inverse_link(double eta) const;
    [[nodiscard]] double variance(double mu) const;

    [[nodiscard]] double cumulant(double eta) const;
    /// A'(eta), the mean.
    [[nodiscard]] double cumulant_d1(double eta) const;
    /// A''(eta), the canonical working weight.
    [[nodiscard]] double cumulant_d2(double eta) const;

    /// Full log density including normalising terms.
    [[nodiscard]] double log_density(double z, double eta, double dispersion = 1.0) const;

    [[nodiscard]] bool in_support(double z) const;
    [[nodiscard]] bool has_dispersion() const { return family_ == Family::gaussian; }

    friend constexpr bool operator==(LinkFamily a, LinkFamily b) { return a.family_ == b.family_; }

private:
    Family family_ = Family::binomial;
};

} // namespace fgfpca
