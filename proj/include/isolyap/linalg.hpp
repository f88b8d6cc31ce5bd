#pragma once

// Dense real/complex matrix primitives used throughout the library.
//
// Every routine is templated on the scalar type and explicitly instantiated
// for `double` and `std::complex<double>`. Matrices are plain Eigen values.

#include <complex>
#include <cstddef>
#include <string_view>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

namespace isolyap {

enum class Field { real, complex };

std::string_view to_string(Field field);
Field parse_field(std::string_view text);

using Complex = std::complex<double>;

template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using RMatrix = Mat<double>;
using CMatrix = Mat<Complex>;
using RVector = Eigen::VectorXd;

template <class Scalar>
constexpr Field field_of() {
  if constexpr (std::is_same_v<Scalar, double>) {
    return Field::real;
  } else {
    return Field::complex;
  }
}

/// Calls `fn.template operator()<Scalar>()` with the scalar type of `field`.
template <class Fn>
decltype(auto) dispatch_field(Field field, Fn&& fn) {
  if (field == Field::real) return fn.template operator()<double>();
  return fn.template operator()<Complex>();
}

namespace linalg {

/// Relative rank tolerance shared by the factorizations.
inline constexpr double kRankTolerance = 1e-12;

template <class Scalar>
struct QrPair {
  Mat<Scalar> q;  ///< unitary
  Mat<Scalar> r;  ///< upper triangular, real positive diagonal
};

template <class Scalar>
struct LqPair {
  Mat<Scalar> t;  ///< i x i lower triangular, real positive diagonal
  Mat<Scalar> o;  ///< i x d, orthonormal rows
};

/// a = left * diag(sigma) * right, sigma descending.
template <class Scalar>
struct SvdTriple {
  Mat<Scalar> left;
  RVector sigma;
  Mat<Scalar> right;
};

/// Same as SvdTriple but with singular values kept as logarithms, which is
/// the only representation that survives products of many factors.
template <class Scalar>
struct LogSvd {
  Mat<Scalar> left;
  RVector log_sigma;
  Mat<Scalar> right;
};

template <class Scalar>
QrPair<Scalar> qr_positive(const Mat<Scalar>& a);

template <class Scalar>
LqPair<Scalar> lq_positive(const Mat<Scalar>& a);

template <class Scalar>
SvdTriple<Scalar> svd_descending(const Mat<Scalar>& a);

/// SVD of diag(exp(log_scale)) * c for square c, accurate in the relative
/// sense for every singular value however wide the spread of `log_scale`.
/// One-sided Jacobi on the column-graded adjoint; the scales are carried as
/// logarithms and never exponentiated.
template <class Scalar>
LogSvd<Scalar> svd_row_graded(const RVector& log_scale, const Mat<Scalar>& c);

/// Eigenvalues with multiplicity, by descending modulus. Ties in modulus are
/// broken by descending real part, then descending imaginary part.
template <class Scalar>
std::vector<Complex> eig_by_modulus(const Mat<Scalar>& a);

/// Number of 2x2 blocks in the real Schur form of `a`.
int count_complex_pairs(const RMatrix& a);

/// Determinant of the submatrix on rows and columns `subset` (0-based).
template <class Scalar>
Scalar principal_minor(const Mat<Scalar>& a, const std::vector<int>& subset);

/// Sum of all principal minors of order k, for k = 0..d (entry 0 is 1).
template <class Scalar>
std::vector<Scalar> principal_minor_sums(const Mat<Scalar>& a);

/// Elementary symmetric functions e_0..e_n of `values`.
std::vector<Complex> elementary_symmetric(const std::vector<Complex>& values);

/// All subsets of {0..d-1} of size k, lexicographic.
std::vector<std::vector<int>> subsets_of_size(int d, int k);

struct GradedEigenvalue {
  double log_modulus;
  double arg;
};

/// Spectrum of w * diag(exp(log_scale)) for descending `log_scale`.
struct GradedSpectrum {
  std::vector<GradedEigenvalue> values;  ///< descending log modulus
  int complex_pairs = 0;                 ///< real input only
  int clusters = 1;                      ///< diagonal blocks after deflation
  double max_cluster_spread = 0.0;       ///< widest log-scale range in one block
};

/// Eigenvalues of a column-graded matrix w * diag(exp(log_scale)).
///
/// Plain Hessenberg-QR loses every eigenvalue smaller than roughly
/// eps * |largest|. Here the scale vector is split into clusters at gaps of
/// at least `kGradedClusterGap`, and block LR steps (similarity by the
/// block-unit-lower factor, which only ever multiplies entries by
/// exp(-gap) <= 1) drive the matrix to block upper triangular form. Each
/// diagonal block then has a bounded spread and is solved directly.
template <class Scalar>
GradedSpectrum graded_spectrum(const Mat<Scalar>& w, const RVector& log_scale);

inline constexpr double kGradedClusterGap = 4.0;

template <class Scalar>
bool is_unitary(const Mat<Scalar>& a, double tol = 1e-10);

}  // namespace linalg
}  // namespace isolyap
