#pragma once

#include <array>
#include <span>

#include "pmx/geometry.hpp"
#include "pmx/rng.hpp"

namespace pmx {

/// B-spline basis of order m on m+1 strictly ascending knots, evaluated by
/// the defining recursion down to the order-1 indicator. Positive on
/// [tau_1, tau_{m+1}), zero elsewhere.
double bspline_basis(int order, std::span<const double> tau, double x);

/// Basis normalized to a density: m * B_m(x) / (tau_{m+1} - tau_1).
double normalized_bspline_density(int order, std::span<const double> tau, double x);

/// Variance of a random variable with the normalized order-m B-spline
/// density: sum_{p<q} (tau_p - tau_q)^2 / ((m+1)^2 (m+2)).
double knot_variance(std::span<const double> tau);

/// Five ascending knots along one map axis.
struct KnotVector {
    std::array<double, 5> k{};

    double operator[](std::size_t i) const { return k[i]; }
    double& operator[](std::size_t i) { return k[i]; }
    bool ascending() const {
        for (int i = 0; i < 4; ++i)
            if (!(k[i] < k[i + 1])) return false;
        return true;
    }
    double variance() const { return knot_variance(std::span<const double>(k)); }
};

/// One bivariate background kernel: order-4 spline along each axis.
struct BackgroundComponent {
    KnotVector ell;  // longitude knots
    KnotVector b;    // latitude knots
};

double bivariate_kernel(double x, double y, const BackgroundComponent& comp);

/// Both per-axis standard deviations strictly above their floors.
bool check_smoothness(const BackgroundComponent& comp, double c_ell, double c_b);

/// Knot prior on one axis: middle knot uniform over the axis, the others
/// conditionally uniform in their gaps. Output is strictly ascending.
KnotVector sample_knots_prior(double lo, double hi, Rng& rng);

/// Prior draw of a full component subject to the smoothness constraint.
/// Throws after max_attempts rejections.
BackgroundComponent sample_component_prior(const MapBounds& bounds, double c_ell, double c_b,
                                           Rng& rng, int max_attempts = 10000);

struct Interval {
    double left = 0.0, right = 0.0;
    bool empty() const { return !(left < right); }
};

/// Support of the single-knot full conditional. k is 1-based (1..5);
/// data_min/data_max are the extremes of the events currently assigned to the
/// component along this axis (ignored when has_data is false).
Interval knot_conditional_bounds(int k, const KnotVector& knots, double data_min,
                                 double data_max, bool has_data, double axis_lo,
                                 double axis_hi);

/// Log of the base-measure factor of the full conditional, as a function of
/// the candidate value of knot k (terms constant in the candidate dropped).
double knot_prior_log_factor(int k, double candidate, double axis_lo, double axis_hi);

struct KnotSamplerStats {
    long prior_resamples = 0;    // empty-support / degenerate component redraws
    long envelope_doublings = 0;  // grid envelope found violated and doubled
};

/// Rejection draw of knot k from its full conditional given the other knots
/// and the assigned events (one axis, sorted ascending). The envelope is the
/// max of the unnormalized conditional on a 512-point grid times a 1.5 safety
/// factor; a draw landing above the envelope doubles it and restarts.
/// Accepted draws satisfy the axis smoothness floor. Returns false when the
/// support interval is empty (caller redraws the component from the prior).
/// Throws after 100000 consecutive rejections.
bool sample_knot_full_conditional(int k, KnotVector& knots,
                                  std::span<const double> sorted_coords, double axis_lo,
                                  double axis_hi, double c_axis, Rng& rng,
                                  KnotSamplerStats* stats = nullptr);

/// Draw one point from the normalized order-4 spline density (grid-envelope
/// rejection, used when simulating from fitted background components).
double sample_bspline4(const KnotVector& knots, Rng& rng);

}  // namespace pmx
