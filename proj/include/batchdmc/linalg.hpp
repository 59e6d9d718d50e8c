/// @file linalg.hpp
/// Dense helpers for small linear systems: matrix exponential, characteristic
/// polynomial and resolvent numerator, zero-order-hold discretization.

#pragma once

#include <batchdmc/errors.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace batchdmc {

/// Matrix exponential by scaling and squaring with a diagonal [6/6] Pade
/// approximant. The scaled argument has infinity norm <= 1/2, where the
/// truncation error of the approximant is below 1e-18.
inline Eigen::MatrixXd expm(const Eigen::MatrixXd& a)
{
    const Eigen::Index n = a.rows();
    detail::require(n == a.cols(), "expm needs a square matrix");
    if (!a.allFinite())
        throw NumericError("expm of a non-finite matrix");

    const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
    int squarings = 0;
    if (norm > 0.5)
        squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
    const Eigen::MatrixXd x = a / std::ldexp(1.0, squarings);

    // c_k = (2q - k)! q! / ((2q)! k! (q - k)!), q = 6
    constexpr double c[] = {1.0,
                            1.0 / 2.0,
                            5.0 / 44.0,
                            1.0 / 66.0,
                            1.0 / 792.0,
                            1.0 / 15840.0,
                            1.0 / 665280.0};
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd power = id;
    Eigen::MatrixXd num = id;
    Eigen::MatrixXd den = id;
    for (int k = 1; k <= 6; ++k) {
        power = power * x;
        num += c[k] * power;
        den += ((k % 2) ? -c[k] : c[k]) * power;
    }
    Eigen::MatrixXd r = den.partialPivLu().solve(num);
    for (int i = 0; i < squarings; ++i)
        r = r * r;
    return r;
}

/// Characteristic polynomial det(sI - A) and the numerator c adj(sI - A) b by
/// the Faddeev-LeVerrier recurrence. Coefficients are ordered from the highest
/// power down: den has n+1 entries with den[0] = 1, num has n entries for
/// s^(n-1) ... s^0.
struct ResolventPolynomials {
    std::vector<double> den;
    std::vector<double> num;
};

inline ResolventPolynomials faddeev_leverrier(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                              const Eigen::RowVectorXd& c)
{
    const Eigen::Index n = a.rows();
    detail::require(n == a.cols() && b.size() == n && c.size() == n, "faddeev_leverrier: dimension mismatch");

    ResolventPolynomials out;
    out.den.assign(static_cast<std::size_t>(n) + 1, 0.0);
    out.num.assign(static_cast<std::size_t>(n), 0.0);
    out.den[0] = 1.0;

    // adj(sI - A) = sum_k M_k s^(n-k), M_1 = I, M_{k+1} = A M_k + c_k I
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
    for (Eigen::Index k = 1; k <= n; ++k) {
        out.num[static_cast<std::size_t>(k - 1)] = c * m * b;
        const Eigen::MatrixXd am = a * m;
        const double coeff = -am.trace() / static_cast<double>(k);
        out.den[static_cast<std::size_t>(k)] = coeff;
        m = am + coeff * Eigen::MatrixXd::Identity(n, n);
    }
    return out;
}

/// Exact discretization of x' = A x + b u under a zero-order hold of length ts.
struct DiscreteModel {
    Eigen::MatrixXd phi;
    Eigen::VectorXd gamma;
    double ts = 0.0;
};

inline DiscreteModel zoh_discretize(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double ts)
{
    detail::require(ts > 0.0, "sampling period must be positive");
    const Eigen::Index n = a.rows();
    Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + 1, n + 1);
    aug.topLeftCorner(n, n) = a * ts;
    aug.topRightCorner(n, 1) = b * ts;
    const Eigen::MatrixXd e = expm(aug);
    return {e.topLeftCorner(n, n), e.topRightCorner(n, 1), ts};
}

/// Controllable canonical realization of num(s)/den(s), den monic of degree n
/// and num of degree < n (both highest power first).
struct Realization {
    Eigen::MatrixXd a;
    Eigen::VectorXd b;
    Eigen::RowVectorXd c;
};

inline Realization controllable_canonical(const std::vector<double>& num, const std::vector<double>& den)
{
    const auto n = static_cast<Eigen::Index>(den.size()) - 1;
    detail::require(n >= 1 && den[0] != 0.0, "denominator must have positive degree");
    detail::require(static_cast<Eigen::Index>(num.size()) <= n, "transfer function must be strictly proper");

    Realization r{Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n), Eigen::RowVectorXd::Zero(n)};
    // state z_i = s^(i) Y/den, last row carries the denominator
    for (Eigen::Index i = 0; i + 1 < n; ++i)
        r.a(i, i + 1) = 1.0;
    for (Eigen::Index j = 0; j < n; ++j)
        r.a(n - 1, j) = -den[static_cast<std::size_t>(n - j)] / den[0];
    r.b(n - 1) = 1.0 / den[0];
    const auto offset = n - static_cast<Eigen::Index>(num.size());
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(num.size()); ++k) {
        // num[k] multiplies s^(n-1-offset-k)
        const Eigen::Index power = n - 1 - offset - k;
        r.c(power) = num[static_cast<std::size_t>(k)];
    }
    return r;
}

} // namespace batchdmc
