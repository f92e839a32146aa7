#pragma once

#include <span>
#include <utility>

#include "pmx/rng.hpp"

namespace pmx {

/// Pareto density with shape eta and scale e_min: eta * e_min^eta / e^(eta+1)
/// on [e_min, inf), zero below the scale.
double pareto_density(double e, double e_min, double eta);
double pareto_log_density(double e, double e_min, double eta);

/// Inverse CDF at u in (0, 1]: e_min * u^(-1/eta).
double pareto_inverse_cdf(double e_min, double eta, double u);
double pareto_sample(double e_min, double eta, Rng& rng);

/// Conjugate Gamma update against Pareto observations:
/// (a, b) -> (a + n, b + sum_i log(E_i / e_min)). Throws if any energy is
/// below the scale.
std::pair<double, double> gamma_pareto_update(double a, double b,
                                              std::span<const double> energies, double e_min);

}  // namespace pmx
