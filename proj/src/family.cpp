#include "fgfpca/family.hpp"

#include <cmath>
#include <numbers>

#include "fgfpca/errors.hpp"

namespace fgfpca {

LinkFamily LinkFamily::parse(std::string_view name)
{
    if (name == "binomial" || name == "binomial-logit") return LinkFamily{Family::binomial};
    if (name == "poisson" || name == "poisson-log") return LinkFamily{Family::poisson};
    if (name == "gaussian" || name == "gaussian-identity") return LinkFamily{Family::gaussian};
    throw ConfigError("unknown family '" + std::string(name) + "' (expected binomial, poisson or gaussian)");
}

std::string_view LinkFamily::name() const
{
    switch (family_) {
    case Family::binomial: return "binomial";
    case Family::poisson: return "poisson";
    case Family::gaussian: return "gaussian";
    }
    return "?";
}

double LinkFamily::link(double mu) const
{
    switch (family_) {
    case Family::binomial: return std::log(mu) - std::log1p(-mu);
    case Family::poisson: return std::log(mu);
    case Family::gaussian: return mu;
    }
    return mu;
}

double LinkFamily::inverse_link(double eta) const
{
    return cumulant_d1(eta);
}

double LinkFamily::variance(double mu) const
{
    switch (family_) {
    case Family::binomial: return mu * (1.0 - mu);
    case Family::poisson: return mu;
    case Family::gaussian: return 1.0;
    }
    return 1.0;
}

double LinkFamily::cumulant(double eta) const
{
    switch (family_) {
    case Family::binomial:
        // log(1 + e^eta) without overflow
        return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
    case Family::poisson: return std::exp(eta);
    case Family::gaussian: return 0.5 * eta * eta;
    }
    return 0.0;
}

double LinkFamily::cumulant_d1(double eta) const
{
    switch (family_) {
    case Family::binomial:
        if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
        else {
            const double e = std::exp(eta);
            return e / (1.0 + e);
        }
    case Family::poisson: return std::exp(eta);
    case Family::gaussian: return eta;
    }
    return eta;
}

double LinkFamily::cumulant_d2(double eta) const
{
    switch (family_) {
    case Family::binomial: {
        const double e = std::exp(-std::abs(eta));
        return e / ((1.0 + e) * (1.0 + e));
    }
    case Family::poisson: return std::exp(eta);
    case Family::gaussian: return 1.0;
    }
    return 1.0;
}

double LinkFamily::log_density(double z, double eta, double dispersion) const
{
    switch (family_) {
    case Family::binomial: return z * eta - cumulant(eta);
    case Family::poisson: return z * eta - std::exp(eta) - std::lgamma(z + 1.0);
    case Family::gaussian: {
        const double r = z - eta;
        return -0.5 * (r * r / dispersion + std::log(2.0 * std::numbers::pi * dispersion));
    }
    }
    return 0.0;
}

bool LinkFamily::in_support(double z) const
{
    if (!std::isfinite(z)) return false;
    switch (family_) {
    case Family::binomial: return z == 0.0 || z == 1.0;
    case Family::poisson: return z >= 0.0 && std::floor(z) == z;
    case Family::gaussian: return true;
    }
    return false;
}

} // namespace fgfpca
