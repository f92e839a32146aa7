#include "pmx/spectral.hpp"

#include <cmath>
#include <stdexcept>

namespace pmx {

double pareto_density(double e, double e_min, double eta) {
    if (!(e_min > 0.0 && eta > 0.0))
        throw std::invalid_argument("pareto_density: need e_min > 0 and eta > 0");
    if (e < e_min) return 0.0;
    return eta * std::pow(e_min / e, eta) / e;
}

double pareto_log_density(double e, double e_min, double eta) {
    if (!(e_min > 0.0 && eta > 0.0))
        throw std::invalid_argument("pareto_log_density: need e_min > 0 and eta > 0");
    if (e < e_min) return -std::numeric_limits<double>::infinity();
    return std::log(eta) + eta * std::log(e_min) - (eta + 1.0) * std::log(e);
}

double pareto_inverse_cdf(double e_min, double eta, double u) {
    if (!(u > 0.0 && u <= 1.0))
        throw std::invalid_argument("pareto_inverse_cdf: u must be in (0, 1]");
    return e_min * std::pow(u, -1.0 / eta);
}

double pareto_sample(double e_min, double eta, Rng& rng) {
    return pareto_inverse_cdf(e_min, eta, rng.uniform_pos());
}

std::pair<double, double> gamma_pareto_update(double a, double b,
                                              std::span<const double> energies, double e_min) {
    if (!(a > 0.0 && b > 0.0))
        throw std::invalid_argument("gamma_pareto_update: need a, b > 0");
    double log_sum = 0.0;
    for (double e : energies) {
        if (e < e_min)
            throw std::invalid_argument("gamma_pareto_update: energy below the Pareto scale");
        log_sum += std::log(e / e_min);
    }
    return {a + static_cast<double>(energies.size()), b + log_sum};
}

}  // namespace pmx
