#pragma once

// Dense linear algebra kernels, the reference eigensolvers and the
// eigenvector error metric shared by the rest of the library.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace xpoint {

class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

namespace detail {

inline void require_finite(std::span<const double> values, const char* who)
{
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument(std::string(who) + ": non-finite entry");
        }
    }
}

} // namespace detail

/// Dense real vector. Entries are always finite.
class Vector {
public:
    Vector() = default;
    explicit Vector(std::size_t n, double fill = 0.0) : data_(n, fill) {}
    Vector(std::initializer_list<double> values) : data_(values)
    {
        detail::require_finite(data_, "Vector");
    }
    explicit Vector(std::vector<double> values) : data_(std::move(values))
    {
        detail::require_finite(data_, "Vector");
    }

    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }

    auto begin() noexcept { return data_.begin(); }
    auto end() noexcept { return data_.end(); }
    auto begin() const noexcept { return data_.begin(); }
    auto end() const noexcept { return data_.end(); }

    std::span<double> span() noexcept { return data_; }
    std::span<const double> span() const noexcept { return data_; }
    operator std::span<const double>() const noexcept { return data_; }

    const std::vector<double>& values() const noexcept { return data_; }

    friend bool operator==(const Vector&, const Vector&) = default;

private:
    std::vector<double> data_;
};

/// Dense row-major matrix. Entries are always finite.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill)
    {
    }
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
        : rows_(rows), cols_(cols), data_(std::move(entries))
    {
        if (data_.size() != rows_ * cols_) {
            throw DimensionError("Matrix: entry count does not match rows*cols");
        }
        detail::require_finite(data_, "Matrix");
    }
    Matrix(std::initializer_list<std::initializer_list<double>> rows)
    {
        rows_ = rows.size();
        cols_ = rows_ == 0 ? 0 : rows.begin()->size();
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_) {
                throw DimensionError("Matrix: ragged initializer");
            }
            data_.insert(data_.end(), r.begin(), r.end());
        }
        detail::require_finite(data_, "Matrix");
    }

    static Matrix identity(std::size_t n)
    {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            m(i, i) = 1.0;
        }
        return m;
    }

    static Matrix from_diagonal(std::span<const double> d)
    {
        Matrix m(d.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i) {
            m(i, i) = d[i];
        }
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool square() const noexcept { return rows_ == cols_; }

    /// Operator interface: dimension of a square matrix.
    std::size_t size() const noexcept { return rows_; }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<const double> row(std::size_t r) const noexcept
    {
        return {data_.data() + r * cols_, cols_};
    }

    const std::vector<double>& entries() const noexcept { return data_; }

    /// y = A x, no allocation.
    void apply(std::span<const double> x, std::span<double> y) const
    {
        const double* a = data_.data();
        for (std::size_t r = 0; r < rows_; ++r, a += cols_) {
            double acc = 0.0;
            for (std::size_t c = 0; c < cols_; ++c) {
                acc += a[c] * x[c];
            }
            y[r] = acc;
        }
    }

    Vector diagonal() const
    {
        Vector d(std::min(rows_, cols_));
        for (std::size_t i = 0; i < d.size(); ++i) {
            d[i] = (*this)(i, i);
        }
        return d;
    }

    double min_entry() const
    {
        return data_.empty() ? 0.0 : *std::min_element(data_.begin(), data_.end());
    }

    Vector row_sums() const
    {
        Vector s(rows_);
        for (std::size_t r = 0; r < rows_; ++r) {
            double acc = 0.0;
            for (double v : row(r)) {
                acc += v;
            }
            s[r] = acc;
        }
        return s;
    }

    /// Infinity norm (max absolute row sum).
    double norm_inf() const
    {
        double best = 0.0;
        for (std::size_t r = 0; r < rows_; ++r) {
            double acc = 0.0;
            for (double v : row(r)) {
                acc += std::abs(v);
            }
            best = std::max(best, acc);
        }
        return best;
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// A square linear map that can be applied without materializing it.
template <class Op>
concept SquareOperator = requires(const Op& op, std::span<const double> x, std::span<double> y) {
    { op.size() } -> std::convertible_to<std::size_t>;
    op.apply(x, y);
};

/// Operator that can stand in for the coefficient matrix of a circuit: the
/// diagonal, row sums and smallest entry are needed to build U and to check
/// positivity without materializing the matrix.
template <class Op>
concept CoefficientOperator = SquareOperator<Op> && requires(const Op& op) {
    { op.row_sums() } -> std::convertible_to<Vector>;
    { op.diagonal() } -> std::convertible_to<Vector>;
    { op.min_entry() } -> std::convertible_to<double>;
};

static_assert(CoefficientOperator<Matrix>);

struct EigPair {
    double value = 0.0;
    Vector vector;
};

// ---------------------------------------------------------------------------
// Small vector helpers.

inline double dot(std::span<const double> a, std::span<const double> b)
{
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double norm_inf(std::span<const double> a)
{
    double best = 0.0;
    for (double v : a) {
        best = std::max(best, std::abs(v));
    }
    return best;
}

inline double distance2(std::span<const double> a, std::span<const double> b)
{
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

/// Flip the sign so that the entry of largest magnitude is non-negative.
inline void sign_canonicalize(Vector& v)
{
    if (v.empty()) {
        return;
    }
    std::size_t arg = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (std::abs(v[i]) > std::abs(v[arg])) {
            arg = i;
        }
    }
    if (v[arg] < 0.0) {
        for (double& e : v) {
            e = -e;
        }
    }
}

// ---------------------------------------------------------------------------

inline Vector matvec(const Matrix& a, const Vector& x)
{
    if (a.cols() != x.size()) {
        throw DimensionError("matvec: A.cols != x.len");
    }
    Vector y(a.rows());
    a.apply(x.span(), y.span());
    return y;
}

struct PowerIterationOptions {
    double tol = 1e-12;
    std::size_t max_iter = 200000;
};

/// Dominant eigenpair by power iteration from the uniform start vector.
/// Accepts a result once ||Av - lv||_2 <= tol * |l| with l the Rayleigh
/// quotient of the unit iterate. Tied or complex dominant eigenvalues never
/// settle and end in ConvergenceError.
template <SquareOperator Op>
EigPair power_iteration(const Op& a, PowerIterationOptions opt = {})
{
    const std::size_t n = a.size();
    if (n == 0) {
        throw DimensionError("power_iteration: empty operator");
    }
    if (!(opt.tol > 0.0)) {
        throw std::invalid_argument("power_iteration: tol must be positive");
    }
    std::vector<double> v(n, 1.0 / std::sqrt(static_cast<double>(n)));
    std::vector<double> av(n);

    for (std::size_t it = 0; it < opt.max_iter; ++it) {
        a.apply(v, av);
        const double lambda = dot(v, av);
        double res = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = av[i] - lambda * v[i];
            res += r * r;
        }
        res = std::sqrt(res);
        if (!std::isfinite(res)) {
            throw ConvergenceError("power_iteration: iterate became non-finite");
        }
        if (res <= opt.tol * std::abs(lambda)) {
            Vector out(std::move(v));
            sign_canonicalize(out);
            return {lambda, std::move(out)};
        }
        const double nrm = norm2(av);
        if (nrm == 0.0) {
            throw ConvergenceError("power_iteration: iterate collapsed to zero");
        }
        for (std::size_t i = 0; i < n; ++i) {
            v[i] = av[i] / nrm;
        }
    }
    throw ConvergenceError("power_iteration: no convergence after " +
                           std::to_string(opt.max_iter) +
                           " iterations (tied or complex dominant eigenvalue?)");
}

inline EigPair power_iteration(const Matrix& a, double tol, std::size_t max_iter)
{
    if (!a.square()) {
        throw DimensionError("power_iteration: matrix is not square");
    }
    return power_iteration(a, PowerIterationOptions{tol, max_iter});
}

struct AbscissaOptions {
    double probe_alpha = 0.01;
    double tol = 1e-8;
    std::size_t window = 200;
    std::size_t max_iter = 2000000;
};

/// Largest real part among the eigenvalues of M, read off as the asymptotic
/// growth rate of w <- (I + probe_alpha M) w.
///
/// The per-iteration multiplier rho = ||(I + aM)w|| for unit w is evaluated
/// as rho^2 = 1 + 2a<w,Mw> + a^2||Mw||^2, so the rate (rho - 1)/a carries no
/// cancellation even when a*lambda_h is ~1e-6. Multipliers are averaged
/// geometrically over `window` iterations to smooth complex-pair beats.
/// Consecutive window estimates d_k are extrapolated (Aitken style) to bound
/// the remaining error; three windows in a row must pass before accepting.
template <SquareOperator Op>
double spectral_abscissa(const Op& m, AbscissaOptions opt = {})
{
    const std::size_t n = m.size();
    if (n == 0) {
        throw DimensionError("spectral_abscissa: empty operator");
    }
    if (!(opt.probe_alpha > 0.0) || !(opt.tol > 0.0) || opt.window == 0) {
        throw std::invalid_argument("spectral_abscissa: bad options");
    }
    const double a = opt.probe_alpha;

    std::vector<double> w(n);
    std::mt19937_64 rng(0x5eed5eedULL);
    for (double& e : w) {
        e = 0.5 + static_cast<double>(rng() >> 11) * 0x1.0p-53;
    }
    {
        const double nrm = norm2(w);
        for (double& e : w) {
            e /= nrm;
        }
    }
    std::vector<double> mw(n);

    double prev = std::numeric_limits<double>::quiet_NaN();
    double prev_diff = std::numeric_limits<double>::quiet_NaN();
    constexpr int kRequiredPasses = 3;
    int passes = 0;
    double log_sum = 0.0;
    std::size_t in_window = 0;

    for (std::size_t it = 0; it < opt.max_iter; ++it) {
        m.apply(w, mw);
        const double wmw = dot(w, mw);
        const double mm = dot(mw, mw);
        const double q = 2.0 * a * wmw + a * a * mm; // rho^2 - 1
        if (!std::isfinite(q) || q <= -1.0) {
            throw ConvergenceError("spectral_abscissa: probe step not contractive-safe; lower probe_alpha");
        }
        log_sum += 0.5 * std::log1p(q);
        const double rho = std::sqrt(1.0 + q);
        for (std::size_t i = 0; i < n; ++i) {
            w[i] = (w[i] + a * mw[i]) / rho;
        }
        if (++in_window < opt.window) {
            continue;
        }
        // rate = (rho_bar - 1)/a with rho_bar = exp(mean log rho)
        const double est = std::expm1(log_sum / static_cast<double>(in_window)) / a;
        log_sum = 0.0;
        in_window = 0;
        if (std::isnan(prev)) {
            prev = est;
            continue;
        }
        const double diff = est - prev;
        prev = est;
        const double scale = std::max(std::abs(est), 1e-12);
        bool settled = std::abs(diff) <= std::numeric_limits<double>::epsilon() * 16.0 / a;
        if (!settled && !std::isnan(prev_diff) && prev_diff != 0.0) {
            const double ratio = diff / prev_diff;
            if (ratio > 0.0 && ratio < 1.0) {
                const double remaining = std::abs(diff) * ratio / (1.0 - ratio);
                settled = remaining <= opt.tol * scale && std::abs(diff) <= opt.tol * scale;
            }
        }
        prev_diff = diff;
        // a crossing of two decaying modes can make one difference tiny
        passes = settled ? passes + 1 : 0;
        if (passes == kRequiredPasses) {
            return est;
        }
    }
    throw ConvergenceError("spectral_abscissa: growth rate did not settle");
}

inline double spectral_abscissa(const Matrix& m, double probe_alpha, double tol, std::size_t max_iter)
{
    if (!m.square()) {
        throw DimensionError("spectral_abscissa: matrix is not square");
    }
    if (probe_alpha * m.norm_inf() >= 0.5) {
        throw std::invalid_argument("spectral_abscissa: probe_alpha * ||M||_inf must be < 0.5");
    }
    AbscissaOptions opt;
    opt.probe_alpha = probe_alpha;
    opt.tol = tol;
    opt.max_iter = max_iter;
    return spectral_abscissa(m, opt);
}

/// Euclidean distance between the unit-normalized inputs after aligning the
/// sign of x with x_star.
inline double solution_error(std::span<const double> x, std::span<const double> x_star)
{
    if (x.size() != x_star.size()) {
        throw DimensionError("solution_error: length mismatch");
    }
    const double nx = norm2(x);
    const double ns = norm2(x_star);
    if (nx == 0.0 || ns == 0.0) {
        throw std::invalid_argument("solution_error: zero vector");
    }
    const double sign = dot(x, x_star) < 0.0 ? -1.0 : 1.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = sign * x[i] / nx - x_star[i] / ns;
        acc += d * d;
    }
    return std::sqrt(acc);
}

// ---------------------------------------------------------------------------
// CSV: one matrix row per line, no header. A vector is a single line.

namespace detail {

inline std::vector<double> parse_csv_line(const std::string& line, std::size_t lineno)
{
    std::vector<double> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        const auto first = cell.find_first_not_of(" \t\r");
        const auto last = cell.find_last_not_of(" \t\r");
        if (first == std::string::npos) {
            throw ParseError("empty CSV field", lineno);
        }
        const std::string trimmed = cell.substr(first, last - first + 1);
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(trimmed, &used);
        } catch (const std::exception&) {
            throw ParseError("not a number: '" + trimmed + "'", lineno);
        }
        if (used != trimmed.size() || !std::isfinite(v)) {
            throw ParseError("not a finite number: '" + trimmed + "'", lineno);
        }
        out.push_back(v);
    }
    return out;
}

} // namespace detail

inline Matrix parse_matrix_csv(std::istream& in)
{
    std::vector<double> entries;
    std::size_t cols = 0;
    std::size_t rows = 0;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        auto row = detail::parse_csv_line(line, lineno);
        if (rows == 0) {
            cols = row.size();
        } else if (row.size() != cols) {
            throw ParseError("expected " + std::to_string(cols) + " columns, got " +
                                 std::to_string(row.size()),
                             lineno);
        }
        entries.insert(entries.end(), row.begin(), row.end());
        ++rows;
    }
    if (rows == 0) {
        throw ParseError("no matrix rows", lineno);
    }
    return Matrix(rows, cols, std::move(entries));
}

inline Matrix load_matrix_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open matrix file: " + path);
    }
    return parse_matrix_csv(in);
}

inline Vector parse_vector_csv(std::istream& in)
{
    const Matrix m = parse_matrix_csv(in);
    if (m.rows() != 1) {
        throw ParseError("vector file must hold a single line", m.rows());
    }
    return Vector(m.entries());
}

inline void write_matrix_csv(std::ostream& out, const Matrix& m)
{
    out.precision(17);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            if (c) {
                out << ',';
            }
            out << m(r, c);
        }
        out << '\n';
    }
}

inline void write_vector_csv(std::ostream& out, const Vector& v)
{
    out.precision(17);
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) {
            out << ',';
        }
        out << v[i];
    }
    out << '\n';
}

} // namespace xpoint
