#include "xfrl/mmd.hpp"

#include <algorithm>
#include <cmath>

#include "xfrl/error.hpp"

namespace xfrl::mmd {

void KernelBank::validate() const {
    if (gammas.empty() || gammas.size() != betas.size())
        throw value_error("KernelBank: gammas/betas must be nonempty and equally sized");
    double sum = 0.0;
    for (double g : gammas)
        if (!(g > 0.0) || !std::isfinite(g)) throw value_error("KernelBank: gammas must be positive");
    for (double b : betas) {
        if (!(b >= 0.0) || !std::isfinite(b)) throw value_error("KernelBank: betas must be >= 0");
        sum += b;
    }
    if (std::abs(sum - 1.0) > 1e-12)
        throw value_error("KernelBank: betas must sum to 1, got " + std::to_string(sum));
}

void FeatureBatch::validate() const {
    if (dim == 0 || data.empty()) throw value_error("FeatureBatch: empty batch");
    if (data.size() % dim != 0)
        throw value_error("FeatureBatch: data size not a multiple of dim");
    for (double x : data)
        if (!std::isfinite(x)) throw value_error("FeatureBatch: non-finite feature value");
}

double sq_dist(const double* x, const double* y, std::size_t d) {
    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double t = x[i] - y[i];
        acc += t * t;
    }
    return acc;
}

double gauss_kernel(const double* x, const double* y, std::size_t d, double gamma) {
    if (!(gamma > 0.0)) throw value_error("gauss_kernel: gamma must be positive");
    return std::exp(-sq_dist(x, y, d) / gamma);
}

static double mk_from_sq(double d2, const KernelBank& bank) {
    double acc = 0.0;
    for (std::size_t u = 0; u < bank.gammas.size(); ++u)
        acc += bank.betas[u] * std::exp(-d2 / bank.gammas[u]);
    return acc;
}

double mk_kernel(const double* x, const double* y, std::size_t d, const KernelBank& bank) {
    bank.validate();
    return mk_from_sq(sq_dist(x, y, d), bank);
}

// d(mk)/dx = -weight * (x - y) with this weight.
static double mk_grad_weight(double d2, const KernelBank& bank) {
    double acc = 0.0;
    for (std::size_t u = 0; u < bank.gammas.size(); ++u)
        acc += bank.betas[u] * std::exp(-d2 / bank.gammas[u]) * 2.0 / bank.gammas[u];
    return acc;
}

double median_sq_dist(const FeatureBatch& a, const FeatureBatch& b) {
    a.validate();
    b.validate();
    if (a.dim != b.dim)
        throw value_error("median_sq_dist: dimension mismatch " + std::to_string(a.dim) + " vs " +
                          std::to_string(b.dim));
    const std::size_t na = a.n(), nb = b.n(), n = na + nb;
    if (n < 2) throw value_error("median_sq_dist: need at least two vectors");
    auto row = [&](std::size_t i) { return i < na ? a.row(i) : b.row(i - na); };
    std::vector<double> d2;
    d2.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) d2.push_back(sq_dist(row(i), row(j), a.dim));
    // lower median
    const std::size_t mid = (d2.size() - 1) / 2;
    std::nth_element(d2.begin(), d2.begin() + mid, d2.end());
    const double med = d2[mid];
    return med > 0.0 ? med : 1.0;
}

KernelBank bank_around(double gamma0, int num_kernels) {
    if (!(gamma0 > 0.0)) throw value_error("bank_around: gamma0 must be positive");
    if (num_kernels < 1) throw value_error("bank_around: need at least one kernel");
    KernelBank bank;
    const double U = static_cast<double>(num_kernels);
    for (int u = 1; u <= num_kernels; ++u) {
        bank.gammas.push_back(gamma0 * std::pow(2.0, static_cast<double>(u) - (U + 1.0) / 2.0));
        bank.betas.push_back(1.0 / U);
    }
    return bank;
}

static void check_pair(const FeatureBatch& src, const FeatureBatch& tgt, const KernelBank& bank) {
    src.validate();
    tgt.validate();
    bank.validate();
    if (src.dim != tgt.dim)
        throw value_error("mmd: feature dimension mismatch " + std::to_string(src.dim) + " vs " +
                          std::to_string(tgt.dim));
}

double mmd2_quadratic(const FeatureBatch& src, const FeatureBatch& tgt, const KernelBank& bank) {
    check_pair(src, tgt, bank);
    const std::size_t m = src.n(), n = tgt.n(), d = src.dim;

    double ss = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        ss += mk_from_sq(0.0, bank);  // diagonal
        for (std::size_t j = i + 1; j < m; ++j)
            ss += 2.0 * mk_from_sq(sq_dist(src.row(i), src.row(j), d), bank);
    }
    double tt = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        tt += mk_from_sq(0.0, bank);
        for (std::size_t j = i + 1; j < n; ++j)
            tt += 2.0 * mk_from_sq(sq_dist(tgt.row(i), tgt.row(j), d), bank);
    }
    double st = 0.0;
    if (m == n) {
        // Transpose-invariant order: a swapped call accumulates the same
        // two-term sums in the same sequence (IEEE addition commutes), so
        // equal-size symmetry is bit-exact.
        for (std::size_t i = 0; i < m; ++i) {
            st += mk_from_sq(sq_dist(src.row(i), tgt.row(i), d), bank);
            for (std::size_t j = i + 1; j < n; ++j)
                st += mk_from_sq(sq_dist(src.row(i), tgt.row(j), d), bank) +
                      mk_from_sq(sq_dist(src.row(j), tgt.row(i), d), bank);
        }
    } else {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
                st += mk_from_sq(sq_dist(src.row(i), tgt.row(j), d), bank);
    }

    const double dm = static_cast<double>(m), dn = static_cast<double>(n);
    return ss / (dm * dm) + tt / (dn * dn) - 2.0 * st / (dm * dn);
}

double h_tuple(const double* s1, const double* s2, const double* t1, const double* t2,
               std::size_t d, const KernelBank& bank) {
    bank.validate();
    return mk_from_sq(sq_dist(s1, s2, d), bank) + mk_from_sq(sq_dist(t1, t2, d), bank) -
           mk_from_sq(sq_dist(s1, t2, d), bank) - mk_from_sq(sq_dist(s2, t1, d), bank);
}

double mmd2_linear(const FeatureBatch& src, const FeatureBatch& tgt, const KernelBank& bank) {
    check_pair(src, tgt, bank);
    if (src.n() != tgt.n())
        throw value_error("mmd2_linear: batch sizes must match, got " + std::to_string(src.n()) +
                          " vs " + std::to_string(tgt.n()));
    const std::size_t pairs = src.n() / 2;  // odd trailing sample dropped
    if (pairs == 0) throw value_error("mmd2_linear: need at least two samples per batch");
    const std::size_t d = src.dim;
    double acc = 0.0;
    for (std::size_t i = 0; i < pairs; ++i)
        acc += h_tuple(src.row(2 * i), src.row(2 * i + 1), tgt.row(2 * i), tgt.row(2 * i + 1), d,
                       bank);
    return acc / static_cast<double>(pairs);
}

// Adds coeff * weight * (x - y) into g (the gradient of -k(x,y) wrt x).
static void axpy_diff(double scale, const double* x, const double* y, std::size_t d, double* g) {
    for (std::size_t i = 0; i < d; ++i) g[i] += scale * (x[i] - y[i]);
}

void mmd2_quadratic_grad(const FeatureBatch& src, const FeatureBatch& tgt, const KernelBank& bank,
                         double coeff, std::vector<double>& gsrc, std::vector<double>& gtgt) {
    check_pair(src, tgt, bank);
    if (gsrc.size() != src.data.size() || gtgt.size() != tgt.data.size())
        throw value_error("mmd2_quadratic_grad: gradient buffer size mismatch");
    const std::size_t m = src.n(), n = tgt.n(), d = src.dim;
    const double dm = static_cast<double>(m), dn = static_cast<double>(n);

    // within-source pairs: d/ds_i of (1/m^2) sum k = -(2/m^2) w (s_i - s_j)
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            const double w = mk_grad_weight(sq_dist(src.row(i), src.row(j), d), bank);
            const double scale = -coeff * 2.0 / (dm * dm) * w;
            axpy_diff(scale, src.row(i), src.row(j), d, gsrc.data() + i * d);
            axpy_diff(scale, src.row(j), src.row(i), d, gsrc.data() + j * d);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double w = mk_grad_weight(sq_dist(tgt.row(i), tgt.row(j), d), bank);
            const double scale = -coeff * 2.0 / (dn * dn) * w;
            axpy_diff(scale, tgt.row(i), tgt.row(j), d, gtgt.data() + i * d);
            axpy_diff(scale, tgt.row(j), tgt.row(i), d, gtgt.data() + j * d);
        }
    }
    // cross pairs enter with -2/(mn); the sign flips twice for the s side
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double w = mk_grad_weight(sq_dist(src.row(i), tgt.row(j), d), bank);
            const double scale = coeff * 2.0 / (dm * dn) * w;
            axpy_diff(scale, src.row(i), tgt.row(j), d, gsrc.data() + i * d);
            axpy_diff(scale, tgt.row(j), src.row(i), d, gtgt.data() + j * d);
        }
    }
}

void mmd2_linear_grad(const FeatureBatch& src, const FeatureBatch& tgt, const KernelBank& bank,
                      double coeff, std::vector<double>& gsrc, std::vector<double>& gtgt) {
    check_pair(src, tgt, bank);
    if (src.n() != tgt.n()) throw value_error("mmd2_linear_grad: batch sizes must match");
    if (gsrc.size() != src.data.size() || gtgt.size() != tgt.data.size())
        throw value_error("mmd2_linear_grad: gradient buffer size mismatch");
    const std::size_t pairs = src.n() / 2;
    if (pairs == 0) throw value_error("mmd2_linear_grad: need at least two samples per batch");
    const std::size_t d = src.dim;
    const double norm = coeff / static_cast<double>(pairs);

    for (std::size_t i = 0; i < pairs; ++i) {
        const double* s1 = src.row(2 * i);
        const double* s2 = src.row(2 * i + 1);
        const double* t1 = tgt.row(2 * i);
        const double* t2 = tgt.row(2 * i + 1);
        double* gs1 = gsrc.data() + (2 * i) * d;
        double* gs2 = gsrc.data() + (2 * i + 1) * d;
        double* gt1 = gtgt.data() + (2 * i) * d;
        double* gt2 = gtgt.data() + (2 * i + 1) * d;

        // +k(s1,s2)
        double w = mk_grad_weight(sq_dist(s1, s2, d), bank);
        axpy_diff(-norm * w, s1, s2, d, gs1);
        axpy_diff(-norm * w, s2, s1, d, gs2);
        // +k(t1,t2)
        w = mk_grad_weight(sq_dist(t1, t2, d), bank);
        axpy_diff(-norm * w, t1, t2, d, gt1);
        axpy_diff(-norm * w, t2, t1, d, gt2);
        // -k(s1,t2)
        w = mk_grad_weight(sq_dist(s1, t2, d), bank);
        axpy_diff(norm * w, s1, t2, d, gs1);
        axpy_diff(norm * w, t2, s1, d, gt2);
        // -k(s2,t1)
        w = mk_grad_weight(sq_dist(s2, t1, d), bank);
        axpy_diff(norm * w, s2, t1, d, gs2);
        axpy_diff(norm * w, t1, s2, d, gt1);
    }
    // a dropped trailing sample gets no gradient
}

}  // namespace xfrl::mmd
