#pragma once

// Mathematical model of the crosspoint eigenvector circuit: the implemented
// eigenvalue, the diagonal normalization U and the 2N x 2N associated matrix
//
//        | 0            I/2             |
//   M =  | U(A - L)    -(L U + I/2)     |
//
// with L = diag(lambda_G^(1..N)). A uniform system has L = lambda_G I.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>

#include "xpoint/linalg.hpp"

namespace xpoint {

/// Single-pole op-amp: L(s) = L0 / (1 + s/omega0), outputs clipped at +-v_supp.
struct OpAmpParams {
    double L0 = 1e5;
    double omega0 = 2.0 * std::numbers::pi * 160.0; // rad/s, GBW = 16 MHz
    double v_supp = 1.0;                            // V

    /// Gain-bandwidth product L0*omega0 in rad/s; the time scale of the dynamics.
    double gbw_rad() const noexcept { return L0 * omega0; }

    static OpAmpParams from_gbw_hz(double l0, double gbw_hz, double v_supp)
    {
        OpAmpParams p;
        p.L0 = l0;
        p.omega0 = 2.0 * std::numbers::pi * gbw_hz / l0;
        p.v_supp = v_supp;
        p.validate();
        return p;
    }

    void validate() const
    {
        if (!(L0 >= 1e3)) {
            throw std::invalid_argument("OpAmpParams: L0 must be >= 1e3");
        }
        if (!(omega0 > 0.0) || !std::isfinite(omega0)) {
            throw std::invalid_argument("OpAmpParams: omega0 must be positive");
        }
        if (!(v_supp > 0.0) || !std::isfinite(v_supp)) {
            throw std::invalid_argument("OpAmpParams: v_supp must be positive");
        }
    }

    friend bool operator==(const OpAmpParams&, const OpAmpParams&) = default;
};

inline double map_eigenvalue(double lambda_max, double delta)
{
    if (!(lambda_max > 0.0)) {
        throw std::invalid_argument("map_eigenvalue: lambda_max must be positive");
    }
    if (!(delta < 1.0)) {
        throw std::invalid_argument("map_eigenvalue: delta must be < 1");
    }
    return (1.0 - delta) * lambda_max;
}

namespace detail {

inline void check_lambdas(std::span<const double> lambdas, std::size_t n, const char* who)
{
    if (lambdas.size() != n) {
        throw DimensionError(std::string(who) + ": lambdas length does not match A");
    }
    for (double l : lambdas) {
        if (!(l > 0.0) || !std::isfinite(l)) {
            throw std::invalid_argument(std::string(who) + ": lambdas must be positive");
        }
    }
}

inline Vector u_diagonal(const Vector& row_sums, std::span<const double> lambdas)
{
    Vector u(row_sums.size());
    for (std::size_t k = 0; k < u.size(); ++k) {
        const double denom = lambdas[k] + row_sums[k];
        if (!(denom > 0.0)) {
            throw std::logic_error("U: non-positive denominator at row " + std::to_string(k));
        }
        u[k] = 1.0 / denom;
    }
    return u;
}

} // namespace detail

inline Matrix build_U(const Matrix& a, std::span<const double> lambdas)
{
    if (!a.square()) {
        throw DimensionError("build_U: A is not square");
    }
    detail::check_lambdas(lambdas, a.rows(), "build_U");
    return Matrix::from_diagonal(detail::u_diagonal(a.row_sums(), lambdas).span());
}

inline Matrix build_M(const Matrix& a, std::span<const double> lambdas)
{
    if (!a.square()) {
        throw DimensionError("build_M: A is not square");
    }
    detail::check_lambdas(lambdas, a.rows(), "build_M");
    const std::size_t n = a.rows();
    const Vector u = detail::u_diagonal(a.row_sums(), lambdas);
    Matrix m(2 * n, 2 * n);
    for (std::size_t k = 0; k < n; ++k) {
        m(k, n + k) = 0.5;
        for (std::size_t j = 0; j < n; ++j) {
            m(n + k, j) = u[k] * (a(k, j) - (j == k ? lambdas[k] : 0.0));
        }
        m(n + k, n + k) = -(lambdas[k] * u[k] + 0.5);
    }
    return m;
}

/// n draws of delta_i, independent and uniform on the open interval
/// (0, delta_max). Bit-identical for a given seed on every platform.
inline Vector sample_variation(double delta_max, std::size_t n, std::uint64_t seed)
{
    if (!(delta_max > 0.0)) {
        throw std::invalid_argument("sample_variation: delta_max must be positive");
    }
    if (n == 0) {
        throw std::invalid_argument("sample_variation: n must be >= 1");
    }
    std::mt19937_64 rng(seed);
    Vector out(n);
    for (std::size_t i = 0; i < n; ++i) {
        // midpoint of a 2^-53 grid cell: never 0, never 1
        const double u = (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
        out[i] = u * delta_max;
    }
    return out;
}

/// A coefficient operator together with the implemented eigenvalues and the
/// op-amp model. Acts as a SquareOperator of dimension 2N applying M, so it
/// can be handed directly to spectral_abscissa.
template <CoefficientOperator Op = Matrix>
class EigenSystem {
public:
    /// lambda_G = (1 - delta) * lambda_max on every TIA.
    static EigenSystem uniform(Op a, double lambda_max, double delta, OpAmpParams params = {})
    {
        const double lg = map_eigenvalue(lambda_max, delta);
        Vector lambdas(a.size(), lg);
        EigenSystem sys(std::move(a), lambda_max, std::move(lambdas), params);
        sys.delta_ = delta;
        return sys;
    }

    /// Per-TIA eigenvalues lambda_G^(i), one per row of M.
    static EigenSystem varied(Op a, double lambda_max, Vector lambdas, OpAmpParams params = {})
    {
        return EigenSystem(std::move(a), lambda_max, std::move(lambdas), params);
    }

    /// Per-TIA mismatches: lambda_G^(i) = (1 - deltas[i]) * lambda_max.
    static EigenSystem from_deltas(Op a, double lambda_max, std::span<const double> deltas,
                                   OpAmpParams params = {})
    {
        Vector lambdas(deltas.size());
        for (std::size_t i = 0; i < deltas.size(); ++i) {
            lambdas[i] = map_eigenvalue(lambda_max, deltas[i]);
        }
        return varied(std::move(a), lambda_max, std::move(lambdas), params);
    }

    /// Same coefficients, different uniform mismatch.
    EigenSystem with_delta(double delta) const { return uniform(a_, lambda_max_, delta, params_); }

    std::size_t n() const noexcept { return a_.size(); }
    const Op& A() const noexcept { return a_; }
    double lambda_max() const noexcept { return lambda_max_; }
    std::optional<double> delta() const noexcept { return delta_; }
    const Vector& lambdas() const noexcept { return lambdas_; }
    const Vector& u() const noexcept { return u_; }
    const OpAmpParams& params() const noexcept { return params_; }

    Matrix U() const { return Matrix::from_diagonal(u_.span()); }

    /// Dense M. Only sensible for small N.
    Matrix M() const
    {
        if constexpr (std::is_same_v<Op, Matrix>) {
            return build_M(a_, lambdas_.span());
        } else {
            return build_M(a_.dense(), lambdas_.span());
        }
    }

    // SquareOperator interface for M.
    std::size_t size() const noexcept { return 2 * n(); }

    /// out = M w with w = [x; z], using A as an operator.
    void apply(std::span<const double> w, std::span<double> out) const
    {
        const std::size_t n = this->n();
        const auto x = w.first(n);
        const auto z = w.subspan(n, n);
        auto top = out.first(n);
        auto bottom = out.subspan(n, n);
        a_.apply(x, bottom);
        for (std::size_t k = 0; k < n; ++k) {
            top[k] = 0.5 * z[k];
            bottom[k] = u_[k] * (bottom[k] - lambdas_[k] * x[k]) - lam_u_half_[k] * z[k];
        }
    }

    /// ||M||_inf without materializing M.
    double m_norm_inf() const
    {
        const Vector rs = a_.row_sums();
        const Vector d = a_.diagonal();
        double best = 0.5;
        for (std::size_t k = 0; k < n(); ++k) {
            const double off = rs[k] - d[k];
            const double row = u_[k] * (off + std::abs(d[k] - lambdas_[k])) + std::abs(lam_u_half_[k]);
            best = std::max(best, row);
        }
        return best;
    }

private:
    EigenSystem(Op a, double lambda_max, Vector lambdas, OpAmpParams params)
        : a_(std::move(a)), lambda_max_(lambda_max), lambdas_(std::move(lambdas)), params_(params)
    {
        params_.validate();
        if (a_.size() == 0) {
            throw DimensionError("EigenSystem: empty coefficient operator");
        }
        if constexpr (std::is_same_v<Op, Matrix>) {
            if (!a_.square()) {
                throw DimensionError("EigenSystem: A is not square");
            }
        }
        if (!(a_.min_entry() > 0.0)) {
            throw std::invalid_argument("EigenSystem: A must have strictly positive entries");
        }
        if (!(lambda_max > 0.0)) {
            throw std::invalid_argument("EigenSystem: lambda_max must be positive");
        }
        detail::check_lambdas(lambdas_.span(), a_.size(), "EigenSystem");
        u_ = detail::u_diagonal(a_.row_sums(), lambdas_.span());
        lam_u_half_ = Vector(u_.size());
        for (std::size_t k = 0; k < u_.size(); ++k) {
            lam_u_half_[k] = lambdas_[k] * u_[k] + 0.5;
        }
    }

    Op a_;
    double lambda_max_;
    std::optional<double> delta_;
    Vector lambdas_;
    Vector u_;
    Vector lam_u_half_;
    OpAmpParams params_;
};

/// Uniform system with lambda_max taken from power iteration on A.
inline EigenSystem<Matrix> make_system(Matrix a, double delta, OpAmpParams params = {})
{
    if (!a.square()) {
        throw DimensionError("make_system: A is not square");
    }
    if (!(a.min_entry() > 0.0)) {
        throw std::invalid_argument("make_system: A must have strictly positive entries");
    }
    const double lmax = power_iteration(a).value;
    return EigenSystem<Matrix>::uniform(std::move(a), lmax, delta, params);
}

} // namespace xpoint
