#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "prism/matrix.hpp"
#include "prism/rng.hpp"

namespace prism {

struct EigenDecomposition {
    std::vector<double> values;  // ascending
    Matrix vectors;              // column k is the eigenvector for values[k]
};

namespace detail {

inline void require_square_symmetric(const Matrix& s, const char* op, double tol) {
    if (s.rows != s.cols) throw std::invalid_argument(std::string(op) + ": matrix not square");
    double scale = 0.0;
    for (double v : s.data) scale = std::max(scale, std::abs(v));
    const double bound = tol * std::max(1.0, scale);
    for (int i = 0; i < s.rows; ++i)
        for (int j = i + 1; j < s.cols; ++j)
            if (std::abs(s.at(i, j) - s.at(j, i)) > bound)
                throw std::invalid_argument(std::string(op) + ": matrix not symmetric");
}

}  // namespace detail

// Cyclic Jacobi eigensolver for real symmetric matrices. Adequate and robust
// at the matrix sizes this project handles (D <= a few hundred).
inline EigenDecomposition jacobi_eigen(const Matrix& s, int max_sweeps = 100) {
    detail::require_square_symmetric(s, "jacobi_eigen", 1e-12);
    const int n = s.rows;
    Matrix a = s;
    Matrix v = Matrix::identity(n);

    auto offdiag = [&]() {
        double sum = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) sum += a.at(i, j) * a.at(i, j);
        return sum;
    };

    double norm = frobenius_norm(a);
    const double tol = 1e-30 * std::max(1.0, norm * norm);
    for (int sweep = 0; sweep < max_sweeps && offdiag() > tol; ++sweep) {
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = a.at(p, q);
                if (std::abs(apq) < 1e-300) continue;
                const double app = a.at(p, p);
                const double aqq = a.at(q, q);
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a.at(k, p);
                    const double akq = a.at(k, q);
                    a.at(k, p) = c * akp - sn * akq;
                    a.at(k, q) = sn * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a.at(p, k);
                    const double aqk = a.at(q, k);
                    a.at(p, k) = c * apk - sn * aqk;
                    a.at(q, k) = sn * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    const double vkp = v.at(k, p);
                    const double vkq = v.at(k, q);
                    v.at(k, p) = c * vkp - sn * vkq;
                    v.at(k, q) = sn * vkp + c * vkq;
                }
            }
        }
    }

    EigenDecomposition out;
    out.values.resize(n);
    for (int i = 0; i < n; ++i) out.values[i] = a.at(i, i);
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](int x, int y) { return out.values[x] < out.values[y]; });
    std::vector<double> sorted(n);
    Matrix vecs(n, n);
    for (int k = 0; k < n; ++k) {
        sorted[k] = out.values[order[k]];
        for (int i = 0; i < n; ++i) vecs.at(i, k) = v.at(i, order[k]);
    }
    out.values = std::move(sorted);
    out.vectors = std::move(vecs);
    return out;
}

inline std::vector<double> symmetric_eigenvalues(const Matrix& s) {
    return jacobi_eigen(s).values;
}

namespace detail {

// Dominant eigenvalue of a symmetric matrix by power iteration. Stops when
// the eigen-residual ||Bx - mu x|| certifies mu to within tol of a true
// eigenvalue; for symmetric matrices that criterion converges fast even when
// the top of the spectrum is (nearly) degenerate.
inline double dominant_eigenvalue(const Matrix& b, double tol, int max_iters, bool* converged) {
    const int n = b.rows;
    Rng rng(0x5eedULL);
    std::vector<double> x(n);
    for (double& v : x) v = rng.uniform(0.5, 1.5);
    double xnorm = 0.0;
    for (double v : x) xnorm += v * v;
    xnorm = std::sqrt(xnorm);
    for (double& v : x) v /= xnorm;
    double lambda = 0.0;
    double resid_checkpoint = 1e300;
    *converged = false;
    for (int it = 0; it < max_iters; ++it) {
        std::vector<double> y(n, 0.0);
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            for (int j = 0; j < n; ++j) acc += b.at(i, j) * x[j];
            y[i] = acc;
        }
        double mu = 0.0;  // Rayleigh quotient, x is unit
        for (int i = 0; i < n; ++i) mu += x[i] * y[i];
        lambda = mu;
        double resid = 0.0;
        for (int i = 0; i < n; ++i) {
            const double r = y[i] - mu * x[i];
            resid += r * r;
        }
        resid = std::sqrt(resid);
        if (resid <= tol * std::max(1.0, std::abs(mu))) {
            *converged = true;
            return lambda;
        }
        if ((it & 511) == 511) {  // stalled: let the caller fall back
            if (resid > 0.25 * resid_checkpoint) return lambda;
            resid_checkpoint = resid;
        }
        double ynorm = 0.0;
        for (double v : y) ynorm += v * v;
        ynorm = std::sqrt(ynorm);
        if (ynorm < 1e-300) {
            *converged = true;  // reached the zero map
            return 0.0;
        }
        for (int i = 0; i < n; ++i) x[i] = y[i] / ynorm;
    }
    return lambda;
}

// rho(S) for symmetric S by normalized repeated squaring: after K squarings
// ||S^(2^K)||_F pins rho to a relative factor n^(2^-K-1), machine-exact by
// K = 48. Handles degenerate and clustered spectra that stall the vector
// iteration.
inline double spectral_radius_by_squaring(Matrix b) {
    const int n = b.rows;
    if (n == 0) return 0.0;
    double log_acc = 0.0;
    double m = 1.0;
    for (int k = 0; k < 48; ++k) {
        const double f = frobenius_norm(b);
        if (f == 0.0 || !std::isfinite(f)) return 0.0;
        b = scale(b, 1.0 / f);
        log_acc += std::log(f);
        b = matmul(b, b);
        log_acc *= 2.0;
        m *= 2.0;
    }
    const double f = frobenius_norm(b);
    if (f == 0.0) return 0.0;
    return std::exp((log_acc + std::log(f)) / m);
}

}  // namespace detail

// Largest |eigenvalue| of a symmetric matrix via shifted power iteration:
// iterate on S + cI and cI - S with c >= rho(S) so both runs target a
// definite dominant mode (no deflation needed). Clustered spectra that stall
// the vector iteration fall back to matrix squaring.
inline double spectral_radius(const Matrix& s, double tol = 1e-11, int max_iters = 10000) {
    detail::require_square_symmetric(s, "spectral_radius", 1e-10);
    const int n = s.rows;
    if (n == 0) return 0.0;
    double c = 1.0;
    for (int i = 0; i < n; ++i) {
        double row = 0.0;
        for (int j = 0; j < n; ++j) row += std::abs(s.at(i, j));
        c = std::max(c, row);
    }
    c += 1.0;
    Matrix plus = s, minus = scale(s, -1.0);
    for (int i = 0; i < n; ++i) {
        plus.at(i, i) += c;
        minus.at(i, i) += c;
    }
    bool ok1 = false, ok2 = false;
    const double lam_max = detail::dominant_eigenvalue(plus, tol, max_iters, &ok1) - c;
    const double lam_min = c - detail::dominant_eigenvalue(minus, tol, max_iters, &ok2);
    if (!ok1 || !ok2) return detail::spectral_radius_by_squaring(s);
    return std::max(std::abs(lam_max), std::abs(lam_min));
}

// Operator (spectral) norm of a general matrix: power iteration on G^T G.
inline double operator_norm(const Matrix& g, double tol = 1e-10, int max_iters = 10000) {
    if (g.rows == 0 || g.cols == 0) return 0.0;
    Matrix gtg = matmul(transpose(g), g);
    bool ok = false;
    double lam = detail::dominant_eigenvalue(gtg, tol, max_iters, &ok);
    if (!ok)
        throw NumericError("operator_norm: power iteration did not converge in " +
                           std::to_string(max_iters) + " iterations");
    return std::sqrt(std::max(0.0, lam));
}

}  // namespace prism
