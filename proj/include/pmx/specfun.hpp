#pragma once

namespace pmx {

/// Regularized lower incomplete gamma P(a, x).
double gamma_p(double a, double x);

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
double gamma_q(double a, double x);

/// Survival function of the chi-square distribution with k degrees of
/// freedom: Pr(X > x).
double chi2_sf(double x, double k);

}  // namespace pmx
