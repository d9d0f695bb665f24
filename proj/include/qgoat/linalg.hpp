#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>

namespace qgoat {

using cplx = std::complex<double>;

/// Dense complex matrix. Gates, propagators and Hamiltonians all live here.
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

/// Fixed-size single- and two-qubit operators (hot path of the angle search).
using Gate2 = Eigen::Matrix2cd;
using Gate4 = Eigen::Matrix4cd;

inline constexpr cplx kI{0.0, 1.0};

/// Kronecker product. The first argument is the slow (left) index:
/// (a ⊗ b)(i*rb + k, j*cb + l) = a(i, j) * b(k, l).
template <class A, class B>
Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic> kron(const Eigen::MatrixBase<A>& a,
                                                         const Eigen::MatrixBase<B>& b) {
  const Eigen::Index ra = a.rows(), ca = a.cols(), rb = b.rows(), cb = b.cols();
  Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic> out(ra * rb, ca * cb);
  for (Eigen::Index i = 0; i < ra; ++i)
    for (Eigen::Index j = 0; j < ca; ++j)
      out.block(i * rb, j * cb, rb, cb) = cplx(a(i, j)) * b.template cast<cplx>();
  return out;
}

/// Two-qubit product of single-qubit operators, qubit 1 on the left.
inline Gate4 kron2(const Gate2& q1, const Gate2& q2) {
  Gate4 out;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) out.block<2, 2>(2 * i, 2 * j) = q1(i, j) * q2;
  return out;
}

template <class M>
double max_abs(const Eigen::MatrixBase<M>& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

/// ‖U†U − I‖_max
template <class M>
double unitarity_error(const Eigen::MatrixBase<M>& u) {
  if (u.rows() != u.cols()) throw std::invalid_argument("unitarity_error: matrix is not square");
  const auto n = u.rows();
  return max_abs(u.adjoint() * u - CMatrix::Identity(n, n));
}

template <class M>
bool is_unitary(const Eigen::MatrixBase<M>& u, double tol) {
  return u.rows() == u.cols() && unitarity_error(u) <= tol;
}

/// ‖H − H†‖_max
template <class M>
double hermiticity_error(const Eigen::MatrixBase<M>& h) {
  return max_abs(h - h.adjoint());
}

inline void require_square(const CMatrix& m, Eigen::Index dim, const char* what) {
  if (m.rows() != dim || m.cols() != dim)
    throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(dim) + "x" +
                                std::to_string(dim) + " matrix, got " + std::to_string(m.rows()) +
                                "x" + std::to_string(m.cols()));
}

}  // namespace qgoat
