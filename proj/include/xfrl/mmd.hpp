#pragma once

#include <cstddef>
#include <vector>

#include "xfrl/tensor.hpp"

namespace xfrl::mmd {

// Convex combination of Gaussian kernels k_u(x,y) = exp(-||x-y||^2 / gamma_u).
struct KernelBank {
    std::vector<double> gammas;
    std::vector<double> betas;

    void validate() const;  // gammas > 0, betas >= 0 summing to 1 (1e-12 slack)
};

enum class Role { source, target };

// Flat (n, dim) row-major feature matrix.
struct FeatureBatch {
    Role role = Role::source;
    std::size_t dim = 0;
    std::vector<double> data;

    FeatureBatch() = default;
    FeatureBatch(Role r, std::size_t d) : role(r), dim(d) {}

    std::size_t n() const { return dim ? data.size() / dim : 0; }
    const double* row(std::size_t i) const { return data.data() + i * dim; }
    double* row(std::size_t i) { return data.data() + i * dim; }
    void push(const double* v) { data.insert(data.end(), v, v + dim); }
    void validate() const;  // nonempty, finite, whole rows
};

double sq_dist(const double* x, const double* y, std::size_t d);
double gauss_kernel(const double* x, const double* y, std::size_t d, double gamma);
double mk_kernel(const double* x, const double* y, std::size_t d, const KernelBank& bank);

// Lower median of squared distances over distinct pairs of the joint batch;
// returns 1 when the median is zero. Feeds the kernel bank below.
double median_sq_dist(const FeatureBatch& a, const FeatureBatch& b);

// gamma_u = gamma0 * 2^(u - (U+1)/2) for u = 1..U, uniform betas.
KernelBank bank_around(double gamma0, int num_kernels = 5);

// Biased V-statistic with diagonal terms included.
double mmd2_quadratic(const FeatureBatch& src, const FeatureBatch& tgt, const KernelBank& bank);

// h(z) = k(s1,s2) + k(t1,t2) - k(s1,t2) - k(s2,t1) on one quad-tuple.
double h_tuple(const double* s1, const double* s2, const double* t1, const double* t2,
               std::size_t d, const KernelBank& bank);

// Streaming estimator: mean of h over the floor(m/2) consecutive disjoint
// quad-tuples. Requires equally sized batches; a trailing odd sample is
// dropped. May be negative.
double mmd2_linear(const FeatureBatch& src, const FeatureBatch& tgt, const KernelBank& bank);

// Analytic d(mmd2)/d(features), scaled by coeff and accumulated into gsrc and
// gtgt (both sized like the corresponding batch data).
void mmd2_quadratic_grad(const FeatureBatch& src, const FeatureBatch& tgt, const KernelBank& bank,
                         double coeff, std::vector<double>& gsrc, std::vector<double>& gtgt);
void mmd2_linear_grad(const FeatureBatch& src, const FeatureBatch& tgt, const KernelBank& bank,
                      double coeff, std::vector<double>& gsrc, std::vector<double>& gtgt);

}  // namespace xfrl::mmd
