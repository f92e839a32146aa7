#include "pmx/oracle.hpp"

#include <cmath>
#include <stdexcept>

namespace pmx::oracle {

double quad_midpoint_1d(const std::function<double(double)>& f, double a, double b, int n) {
    if (n < 1) throw std::invalid_argument("quad_midpoint_1d: n must be >= 1");
    const double h = (b - a) / n;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += f(a + (i + 0.5) * h);
    return acc * h;
}

double quad_midpoint_2d(const std::function<double(double, double)>& f, double x0, double x1,
                        double y0, double y1, int nx, int ny) {
    if (nx < 1 || ny < 1) throw std::invalid_argument("quad_midpoint_2d: need nx, ny >= 1");
    const double hx = (x1 - x0) / nx;
    const double hy = (y1 - y0) / ny;
    double acc = 0.0;
    for (int iy = 0; iy < ny; ++iy) {
        const double y = y0 + (iy + 0.5) * hy;
        double row = 0.0;
        for (int ix = 0; ix < nx; ++ix) row += f(x0 + (ix + 0.5) * hx, y);
        acc += row;
    }
    return acc * hx * hy;
}

double quad_richardson_1d(const std::function<double(double)>& f, double a, double b, int n) {
    const double coarse = quad_midpoint_1d(f, a, b, n);
    const double fine = quad_midpoint_1d(f, a, b, 2 * n);
    return (4.0 * fine - coarse) / 3.0;
}

double quad_richardson_2d(const std::function<double(double, double)>& f, double x0, double x1,
                          double y0, double y1, int n) {
    const double coarse = quad_midpoint_2d(f, x0, x1, y0, y1, n, n);
    const double fine = quad_midpoint_2d(f, x0, x1, y0, y1, 2 * n, 2 * n);
    return (4.0 * fine - coarse) / 3.0;
}

namespace {

void enumerate_partitions(int n, const std::function<void(const Partition&)>& visit) {
    Partition labels(static_cast<std::size_t>(n), 0);
    // generate restricted growth strings: labels[0] = 0, labels[i] <= 1 + max(previous)
    std::function<void(int, int)> rec = [&](int i, int max_label) {
        if (i == n) {
            visit(labels);
            return;
        }
        for (int l = 0; l <= max_label + 1; ++l) {
            labels[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(l);
            rec(i + 1, std::max(max_label, l));
        }
    };
    if (n == 0) {
        visit(labels);
        return;
    }
    rec(1, 0);
}

double log_crp_partition(const Partition& part, double alpha) {
    const int n = static_cast<int>(part.size());
    if (n == 0) return 0.0;
    int k = 0;
    std::vector<int> counts;
    for (auto l : part) {
        if (l >= counts.size()) {
            counts.push_back(0);
            ++k;
        }
        ++counts[l];
    }
    double lp = k * std::log(alpha);
    for (int c : counts) lp += std::lgamma(static_cast<double>(c));  // (n_c - 1)!
    for (int i = 0; i < n; ++i) lp -= std::log(alpha + i);
    return lp;
}

}  // namespace

std::map<Partition, double> crp_partition_law(int n, double alpha) {
    if (n < 0 || n > 10) throw std::invalid_argument("crp_partition_law: need 0 <= n <= 10");
    if (!(alpha > 0.0)) throw std::invalid_argument("crp_partition_law: alpha must be > 0");
    std::map<Partition, double> law;
    enumerate_partitions(n, [&](const Partition& p) { law[p] = std::exp(log_crp_partition(p, alpha)); });
    return law;
}

double crp_expected_clusters(int n, double alpha) {
    return crp_expected_clusters(static_cast<std::int64_t>(n), alpha);
}

double crp_expected_clusters(std::int64_t n, double alpha) {
    double e = 0.0;
    for (std::int64_t i = 1; i <= n; ++i) e += alpha / (alpha + static_cast<double>(i) - 1.0);
    return e;
}

double DiscreteKernel::marginal_likelihood(const std::vector<int>& members) const {
    double total = 0.0;
    for (std::size_t a = 0; a < n_atoms(); ++a) {
        double prod = atom_weights[a];
        for (int i : members) prod *= atom_densities[a][static_cast<std::size_t>(i)];
        total += prod;
    }
    return total;
}

std::map<MicroState, double> enumerate_exact_posterior(int n, const DiscreteKernel& side0,
                                                       const DiscreteKernel& side1,
                                                       double lambda, double alpha0,
                                                       double alpha1) {
    if (n < 1 || n > 8)
        throw std::invalid_argument("enumerate_exact_posterior: n must be in 1..8");

    std::map<MicroState, double> post;
    double total = 0.0;

    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        std::vector<int> ev0, ev1;
        for (int i = 0; i < n; ++i) ((mask >> i) & 1u ? ev1 : ev0).push_back(i);
        // symmetric Dirichlet level term, constants dropped
        const double log_level = std::lgamma(lambda + ev0.size()) +
                                 std::lgamma(lambda + ev1.size());

        auto side_weight = [&](const DiscreteKernel& kern, const std::vector<int>& evs,
                               double alpha, const Partition& part) {
            double lw = log_crp_partition(part, alpha);
            std::uint8_t k = 0;
            for (auto l : part) k = std::max<std::uint8_t>(k, static_cast<std::uint8_t>(l + 1));
            for (std::uint8_t c = 0; c < k; ++c) {
                std::vector<int> members;
                for (std::size_t j = 0; j < part.size(); ++j)
                    if (part[j] == c) members.push_back(evs[j]);
                lw += std::log(kern.marginal_likelihood(members));
            }
            return lw;
        };

        enumerate_partitions(static_cast<int>(ev0.size()), [&](const Partition& p0) {
            const double w0 = side_weight(side0, ev0, alpha0, p0);
            enumerate_partitions(static_cast<int>(ev1.size()), [&](const Partition& p1) {
                const double w1 = side_weight(side1, ev1, alpha1, p1);
                MicroState st;
                st.z_mask = mask;
                st.part0 = p0;
                st.part1 = p1;
                const double w = std::exp(log_level + w0 + w1);
                post[st] = w;
                total += w;
            });
        });
    }
    for (auto& [st, w] : post) w /= total;
    return post;
}

double total_variation(const std::map<MicroState, double>& p,
                       const std::map<MicroState, double>& q) {
    double tv = 0.0;
    auto it_p = p.begin();
    auto it_q = q.begin();
    while (it_p != p.end() || it_q != q.end()) {
        if (it_q == q.end() || (it_p != p.end() && it_p->first < it_q->first)) {
            tv += it_p->second;
            ++it_p;
        } else if (it_p == p.end() || it_q->first < it_p->first) {
            tv += it_q->second;
            ++it_q;
        } else {
            tv += std::fabs(it_p->second - it_q->second);
            ++it_p;
            ++it_q;
        }
    }
    return 0.5 * tv;
}

}  // namespace pmx::oracle
