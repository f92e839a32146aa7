#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <vector>

namespace pmx::oracle {

/// Composite midpoint rule; error O(h^2) on smooth integrands.
double quad_midpoint_1d(const std::function<double(double)>& f, double a, double b, int n);
double quad_midpoint_2d(const std::function<double(double, double)>& f, double x0, double x1,
                        double y0, double y1, int nx, int ny);

/// One Richardson level over the midpoint rule (n and 2n per axis), which
/// cancels the leading h^2 boundary term.
double quad_richardson_1d(const std::function<double(double)>& f, double a, double b, int n);
double quad_richardson_2d(const std::function<double(double, double)>& f, double x0, double x1,
                          double y0, double y1, int n);

/// Canonical partition encoding: label[i] is the cluster of item i, labels
/// assigned in order of first appearance (restricted growth string).
using Partition = std::vector<std::uint8_t>;

/// Exact CRP(alpha) law over set partitions of n items (n <= 10):
/// P(partition) = alpha^k * prod_c (n_c - 1)! / prod_{i=0}^{n-1} (alpha + i).
std::map<Partition, double> crp_partition_law(int n, double alpha);

/// E[k | n] = sum_{i=1}^{n} alpha / (alpha + i - 1).
double crp_expected_clusters(int n, double alpha);
double crp_expected_clusters(std::int64_t n, double alpha);

/// Discrete mixture kernel for exact micro-instances: a finite-atom base
/// measure with per-event kernel densities (piecewise-constant kernels make
/// per-cluster marginal likelihoods finite sums over the atoms).
struct DiscreteKernel {
    std::vector<double> atom_weights;                  // base-measure probabilities
    std::vector<std::vector<double>> atom_densities;   // [atom][event]

    std::size_t n_atoms() const { return atom_weights.size(); }
    std::size_t n_events() const {
        return atom_densities.empty() ? 0 : atom_densities.front().size();
    }
    /// sum_a w_a * prod_{i in members} density[a][i]
    double marginal_likelihood(const std::vector<int>& members) const;
};

/// Joint label state of a two-component micro-instance: z[i] selects the
/// level (0 = source side, 1 = background side), and each level's events are
/// partitioned canonically.
struct MicroState {
    std::uint32_t z_mask = 0;  // bit i set -> event i on side 1
    Partition part0;           // partition of side-0 events, in event order
    Partition part1;

    bool operator<(const MicroState& o) const {
        if (z_mask != o.z_mask) return z_mask < o.z_mask;
        if (part0 != o.part0) return part0 < o.part0;
        return part1 < o.part1;
    }
    bool operator==(const MicroState& o) const {
        return z_mask == o.z_mask && part0 == o.part0 && part1 == o.part1;
    }
};

/// Brute-force posterior over (z, partitions) for n <= 8 events under the
/// two-level mixture with symmetric Dirichlet(lambda) level weights and
/// CRP(alpha_j) clustering with DiscreteKernel marginal likelihoods.
std::map<MicroState, double> enumerate_exact_posterior(int n, const DiscreteKernel& side0,
                                                       const DiscreteKernel& side1,
                                                       double lambda, double alpha0,
                                                       double alpha1);

/// Total variation distance between two distributions over MicroState keys.
double total_variation(const std::map<MicroState, double>& p,
                       const std::map<MicroState, double>& q);

}  // namespace pmx::oracle
