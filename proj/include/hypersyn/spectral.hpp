#pragma once

// Two-dimensional DFT for frequency mixing of an utterance-embedding sequence:
// a 1D DFT along the embedding axis, then along the time axis, keeping the real
// part. Sequences are short (S <= 256), so transforms are dense matrix products.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>

#include "hypersyn/autodiff.hpp"
#include "hypersyn/errors.hpp"

namespace hypersyn::spectral {

using Matrix = Eigen::MatrixXd;
using ComplexMatrix = Eigen::MatrixXcd;

/// Real and imaginary parts of the n-point DFT matrix F_jk = exp(-2 pi i jk / n),
/// returned as (cos, -sin) so that F = C + iS.
struct DftBasis {
    Matrix cos;
    Matrix sin;
};

inline DftBasis dft_basis(Eigen::Index n) {
    DftBasis b{Matrix(n, n), Matrix(n, n)};
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index k = 0; k < n; ++k) {
            // Reduce jk mod n first so large indices keep full precision.
            const double angle = -2.0 * std::numbers::pi * static_cast<double>((j * k) % n) / static_cast<double>(n);
            b.cos(j, k) = std::cos(angle);
            b.sin(j, k) = std::sin(angle);
        }
    return b;
}

/// Full complex 2D DFT: F_S X F_d.
inline ComplexMatrix dft2(const Matrix& x) {
    if (x.size() == 0) throw ContractViolation("dft2: empty input");
    const DftBasis s = dft_basis(x.rows());
    const DftBasis d = dft_basis(x.cols());
    const ComplexMatrix fs = s.cos.cast<std::complex<double>>() + std::complex<double>(0, 1) * s.sin.cast<std::complex<double>>();
    const ComplexMatrix fd = d.cos.cast<std::complex<double>>() + std::complex<double>(0, 1) * d.sin.cast<std::complex<double>>();
    return fs * x.cast<std::complex<double>>() * fd;
}

/// Re(F_S X F_d) = C_S X C_d - S_S X S_d. Shape-preserving and linear.
inline Matrix dft2_real(const Matrix& x) {
    if (x.size() == 0) throw ContractViolation("dft2_real: empty input");
    const DftBasis s = dft_basis(x.rows());
    const DftBasis d = dft_basis(x.cols());
    return s.cos * x * d.cos - s.sin * x * d.sin;
}

/// Differentiable dft2_real for an [S, d] tensor, optionally scaled.
inline ad::Tensor dft2_real(const ad::Tensor& x, double scale = 1.0) {
    if (x.shape().rank() != 2 || x.size() == 0) throw ShapeError("dft2_real expects a non-empty matrix");
    auto& tape = x.tape();
    const auto rows = static_cast<Eigen::Index>(x.shape()[0]);
    const auto cols = static_cast<Eigen::Index>(x.shape()[1]);
    const DftBasis s = dft_basis(rows);
    const DftBasis d = dft_basis(cols);
    auto as_tensor = [&](const Matrix& m, double k) {
        std::vector<double> v(static_cast<std::size_t>(m.size()));
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) v[static_cast<std::size_t>(i * m.cols() + j)] = k * m(i, j);
        return tape.constant(std::move(v), ad::Shape::matrix(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())));
    };
    const ad::Tensor cs = as_tensor(s.cos, scale);
    const ad::Tensor ss = as_tensor(s.sin, scale);
    const ad::Tensor cd = as_tensor(d.cos, 1.0);
    const ad::Tensor sd = as_tensor(d.sin, 1.0);
    return ad::matmul(ad::matmul(cs, x), cd) - ad::matmul(ad::matmul(ss, x), sd);
}

}  // namespace hypersyn::spectral
