#include "isolyap/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/Eigenvalues>

#include "isolyap/errors.hpp"

namespace isolyap {

std::string_view to_string(Field field) {
  return field == Field::real ? "real" : "complex";
}

Field parse_field(std::string_view text) {
  if (text == "real") return Field::real;
  if (text == "complex") return Field::complex;
  throw ArgumentError("field must be 'real' or 'complex', got '" + std::string(text) + "'");
}

namespace linalg {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr int kMaxJacobiSweeps = 80;
constexpr int kMaxLrIterations = 120;

template <class Scalar>
void require_finite(const Mat<Scalar>& a, const char* what) {
  if (!a.allFinite()) throw ArgumentError(std::string(what) + ": input has non-finite entries");
}

template <class Scalar>
void require_square(const Mat<Scalar>& a, const char* what) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw ArgumentError(std::string(what) + ": expected a non-empty square matrix, got " +
                        std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  }
}

template <class Scalar>
Scalar conjugate(Scalar x) {
  if constexpr (std::is_same_v<Scalar, double>) {
    return x;
  } else {
    return std::conj(x);
  }
}

// Thin Householder QR of a tall matrix with the diagonal of r rotated onto
// the positive real axis. `scale` is the reference magnitude for the rank test.
template <class Scalar>
QrPair<Scalar> thin_qr_positive(const Mat<Scalar>& a, double scale, const char* what) {
  const Eigen::Index rows = a.rows();
  const Eigen::Index cols = a.cols();
  Eigen::HouseholderQR<Mat<Scalar>> qr(a);
  Mat<Scalar> r = qr.matrixQR().topRows(cols).template triangularView<Eigen::Upper>();
  Mat<Scalar> q = qr.householderQ() * Mat<Scalar>::Identity(rows, cols);
  for (Eigen::Index k = 0; k < cols; ++k) {
    const double mag = std::abs(r(k, k));
    if (!(mag > kRankTolerance * scale)) {
      throw SingularInputError(std::string(what) + ": numerically rank deficient (residual " +
                               std::to_string(mag) + " at index " + std::to_string(k) + ")");
    }
    const Scalar phase = r(k, k) / mag;
    r.row(k) *= conjugate(phase);
    q.col(k) *= phase;
    r(k, k) = mag;
  }
  return {std::move(q), std::move(r)};
}

template <class Scalar>
std::vector<Complex> raw_eigenvalues(const Mat<Scalar>& a) {
  std::vector<Complex> out;
  out.reserve(static_cast<std::size_t>(a.rows()));
  if (a.rows() == 1) {
    out.emplace_back(a(0, 0));
    return out;
  }
  if constexpr (std::is_same_v<Scalar, double>) {
    Eigen::EigenSolver<RMatrix> solver(a, false);
    if (solver.info() != Eigen::Success) throw NumericError("eigenvalue iteration did not converge");
    for (Eigen::Index i = 0; i < a.rows(); ++i) out.push_back(solver.eigenvalues()(i));
  } else {
    Eigen::ComplexEigenSolver<CMatrix> solver(a, false);
    if (solver.info() != Eigen::Success) throw NumericError("eigenvalue iteration did not converge");
    for (Eigen::Index i = 0; i < a.rows(); ++i) out.push_back(solver.eigenvalues()(i));
  }
  return out;
}

bool nearly_equal(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({std::abs(a), std::abs(b), 1e-300});
}

// Sort by a primary key descending with near-ties resolved by secondary keys.
template <class T, class Key>
void sort_with_ties(std::vector<T>& values, Key key) {
  constexpr double kTieTol = 1e-12;
  std::sort(values.begin(), values.end(), [&](const T& x, const T& y) {
    const auto [kx0, kx1, kx2] = key(x);
    const auto [ky0, ky1, ky2] = key(y);
    if (!nearly_equal(kx0, ky0, kTieTol)) return kx0 > ky0;
    if (!nearly_equal(kx1, ky1, kTieTol)) return kx1 > ky1;
    return kx2 > ky2;
  });
}

}  // namespace

template <class Scalar>
QrPair<Scalar> qr_positive(const Mat<Scalar>& a) {
  require_square(a, "qr_positive");
  require_finite(a, "qr_positive");
  const double scale = a.colwise().norm().maxCoeff();
  if (scale == 0.0) throw SingularInputError("qr_positive: zero matrix");
  return thin_qr_positive(a, scale, "qr_positive");
}

template <class Scalar>
LqPair<Scalar> lq_positive(const Mat<Scalar>& a) {
  if (a.rows() == 0 || a.rows() > a.cols()) {
    throw ArgumentError("lq_positive: expected i x d with 1 <= i <= d, got " + std::to_string(a.rows()) +
                        "x" + std::to_string(a.cols()));
  }
  require_finite(a, "lq_positive");
  const double scale = a.rowwise().norm().maxCoeff();
  if (scale == 0.0) throw SingularInputError("lq_positive: zero matrix");
  // a^* = q r  =>  a = r^* q^*
  auto qr = thin_qr_positive<Scalar>(a.adjoint(), scale, "lq_positive");
  return {qr.r.adjoint(), qr.q.adjoint()};
}

template <class Scalar>
SvdTriple<Scalar> svd_descending(const Mat<Scalar>& a) {
  if (a.size() == 0) throw ArgumentError("svd_descending: empty matrix");
  require_finite(a, "svd_descending");
  Eigen::JacobiSVD<Mat<Scalar>> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) {
    throw NumericError("svd_descending: iteration failed for " + std::to_string(a.rows()) + "x" +
                       std::to_string(a.cols()) + " input");
  }
  return {svd.matrixU(), svd.singularValues(), svd.matrixV().adjoint()};
}

template <class Scalar>
LogSvd<Scalar> svd_row_graded(const RVector& log_scale, const Mat<Scalar>& c) {
  require_square(c, "svd_row_graded");
  require_finite(c, "svd_row_graded");
  const Eigen::Index d = c.rows();
  if (log_scale.size() != d || !log_scale.allFinite()) {
    throw ArgumentError("svd_row_graded: log_scale must hold d finite values");
  }

  // Column j of the adjoint is conj(row j) scaled by exp(log_scale(j)); the
  // scale lives in `kappa` and each stored column is kept at unit norm.
  Mat<Scalar> b = c.adjoint();
  RVector kappa = log_scale;
  Mat<Scalar> v = Mat<Scalar>::Identity(d, d);
  auto normalize = [&](Eigen::Index j) {
    const double nrm = b.col(j).norm();
    if (!(nrm > 0.0) || !std::isfinite(nrm)) {
      throw SingularInputError("svd_row_graded: column " + std::to_string(j) + " vanished");
    }
    b.col(j) /= nrm;
    kappa(j) += std::log(nrm);
  };
  for (Eigen::Index j = 0; j < d; ++j) normalize(j);

  const double tol = kEps * static_cast<double>(d);
  bool converged = d == 1;
  for (int sweep = 0; sweep < kMaxJacobiSweeps && !converged; ++sweep) {
    bool rotated = false;
    for (Eigen::Index i = 0; i + 1 < d; ++i) {
      for (Eigen::Index j = i + 1; j < d; ++j) {
        Eigen::Index p = i;
        Eigen::Index q = j;
        if (kappa(q) > kappa(p)) std::swap(p, q);
        const double np = b.col(p).squaredNorm();
        const double nq = b.col(q).squaredNorm();
        const Scalar gamma = b.col(p).dot(b.col(q));
        const double g = std::abs(gamma);
        if (g <= tol * std::sqrt(np * nq)) continue;
        rotated = true;

        const Scalar phase = gamma / g;
        b.col(q) *= conjugate(phase);
        v.col(q) *= conjugate(phase);

        // Rotation in units of exp(2 kappa_p); r = exp(kappa_q - kappa_p) <= 1
        // may underflow to 0, in which case the step is a pure projection.
        const double r = std::exp(kappa(q) - kappa(p));
        const double zr = (r * r * nq - np) / (2.0 * g);
        const double t_over_r = (zr >= 0.0 ? 1.0 : -1.0) / (std::abs(zr) + std::sqrt(r * r + zr * zr));
        const double t = r * t_over_r;
        const double cs = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = cs * t;

        const Vec<Scalar> bp = b.col(p);
        const Vec<Scalar> bq = b.col(q);
        b.col(p) = cs * bp - (sn * r) * bq;
        b.col(q) = (cs * t_over_r) * bp + cs * bq;
        const Vec<Scalar> vp = v.col(p);
        const Vec<Scalar> vq = v.col(q);
        v.col(p) = cs * vp - sn * vq;
        v.col(q) = sn * vp + cs * vq;
        normalize(p);
        normalize(q);
      }
    }
    converged = !rotated;
  }
  if (!converged) throw NumericError("svd_row_graded: one-sided Jacobi did not converge");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index x, Eigen::Index y) { return kappa(x) > kappa(y); });

  LogSvd<Scalar> out{Mat<Scalar>(d, d), RVector(d), Mat<Scalar>(d, d)};
  for (Eigen::Index k = 0; k < d; ++k) {
    const Eigen::Index src = order[static_cast<std::size_t>(k)];
    out.left.col(k) = v.col(src);
    out.log_sigma(k) = kappa(src);
    out.right.row(k) = b.col(src).adjoint();
  }
  return out;
}

template <class Scalar>
std::vector<Complex> eig_by_modulus(const Mat<Scalar>& a) {
  require_square(a, "eig_by_modulus");
  require_finite(a, "eig_by_modulus");
  auto values = raw_eigenvalues(a);
  sort_with_ties(values, [](const Complex& z) { return std::tuple{std::abs(z), z.real(), z.imag()}; });
  return values;
}

int count_complex_pairs(const RMatrix& a) {
  require_square(a, "count_complex_pairs");
  require_finite(a, "count_complex_pairs");
  if (a.rows() == 1) return 0;
  Eigen::RealSchur<RMatrix> schur(a, false);
  if (schur.info() != Eigen::Success) throw NumericError("real Schur iteration did not converge");
  const RMatrix& t = schur.matrixT();
  int pairs = 0;
  for (Eigen::Index i = 0; i + 1 < t.rows(); ++i) {
    if (t(i + 1, i) != 0.0) {
      ++pairs;
      ++i;
    }
  }
  return pairs;
}

template <class Scalar>
Scalar principal_minor(const Mat<Scalar>& a, const std::vector<int>& subset) {
  require_square(a, "principal_minor");
  const auto d = static_cast<int>(a.rows());
  if (subset.empty()) throw ArgumentError("principal_minor: empty index set");
  std::vector<int> seen(static_cast<std::size_t>(d), 0);
  for (int j : subset) {
    if (j < 0 || j >= d) {
      throw ArgumentError("principal_minor: index " + std::to_string(j) + " outside [0, " +
                          std::to_string(d) + ")");
    }
    if (seen[static_cast<std::size_t>(j)]++) {
      throw ArgumentError("principal_minor: repeated index " + std::to_string(j));
    }
  }
  const auto k = static_cast<Eigen::Index>(subset.size());
  Mat<Scalar> sub(k, k);
  for (Eigen::Index r = 0; r < k; ++r) {
    for (Eigen::Index c = 0; c < k; ++c) sub(r, c) = a(subset[r], subset[c]);
  }
  return sub.determinant();
}

std::vector<std::vector<int>> subsets_of_size(int d, int k) {
  std::vector<std::vector<int>> out;
  if (k < 0 || k > d) return out;
  std::vector<int> idx(static_cast<std::size_t>(k));
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    out.push_back(idx);
    int pos = k - 1;
    while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == d - k + pos) --pos;
    if (pos < 0) break;
    ++idx[static_cast<std::size_t>(pos)];
    for (int q = pos + 1; q < k; ++q) idx[static_cast<std::size_t>(q)] = idx[static_cast<std::size_t>(q - 1)] + 1;
  }
  return out;
}

template <class Scalar>
std::vector<Scalar> principal_minor_sums(const Mat<Scalar>& a) {
  require_square(a, "principal_minor_sums");
  const auto d = static_cast<int>(a.rows());
  std::vector<Scalar> sums(static_cast<std::size_t>(d) + 1, Scalar(0));
  sums[0] = Scalar(1);
  for (int k = 1; k <= d; ++k) {
    for (const auto& subset : subsets_of_size(d, k)) sums[static_cast<std::size_t>(k)] += principal_minor(a, subset);
  }
  return sums;
}

std::vector<Complex> elementary_symmetric(const std::vector<Complex>& values) {
  std::vector<Complex> e(values.size() + 1, Complex(0));
  e[0] = 1.0;
  for (std::size_t n = 0; n < values.size(); ++n) {
    for (std::size_t k = n + 1; k >= 1; --k) e[k] += e[k - 1] * values[n];
  }
  return e;
}

template <class Scalar>
GradedSpectrum graded_spectrum(const Mat<Scalar>& w, const RVector& log_scale) {
  require_square(w, "graded_spectrum");
  require_finite(w, "graded_spectrum");
  const Eigen::Index d = w.rows();
  if (log_scale.size() != d || !log_scale.allFinite()) {
    throw ArgumentError("graded_spectrum: log_scale must hold d finite values");
  }
  for (Eigen::Index i = 1; i < d; ++i) {
    if (log_scale(i) > log_scale(i - 1)) throw ArgumentError("graded_spectrum: log_scale must be descending");
  }

  std::vector<Eigen::Index> starts{0};
  for (Eigen::Index i = 1; i < d; ++i) {
    if (log_scale(i - 1) - log_scale(i) >= kGradedClusterGap) starts.push_back(i);
  }
  auto cluster_end = [&](std::size_t k) { return k + 1 < starts.size() ? starts[k + 1] : d; };

  Mat<Scalar> g = w;
  int iterations = 0;
  while (starts.size() > 1) {
    // Block LU without pivoting across clusters: g = l * u.
    Mat<Scalar> u = g;
    Mat<Scalar> l = Mat<Scalar>::Identity(d, d);
    std::size_t singular_at = starts.size();
    for (std::size_t k = 0; k + 1 < starts.size(); ++k) {
      const Eigen::Index kb = starts[k];
      const Eigen::Index n = cluster_end(k) - kb;
      const Eigen::Index rest = d - kb - n;
      Eigen::PartialPivLU<Mat<Scalar>> lu(u.block(kb, kb, n, n));
      const double pivot_det = std::abs(lu.determinant());
      if (!(pivot_det > 0.0) || !std::isfinite(pivot_det)) {
        singular_at = k;
        break;
      }
      const Mat<Scalar> lk = u.block(kb + n, kb, rest, n) * lu.inverse();
      u.block(kb + n, kb + n, rest, rest) -= lk * u.block(kb, kb + n, n, rest);
      u.block(kb + n, kb, rest, n).setZero();
      l.block(kb + n, kb, rest, n) = lk;
    }
    if (singular_at < starts.size()) {
      starts.erase(starts.begin() + static_cast<std::ptrdiff_t>(singular_at) + 1);
      continue;
    }
    // Similarity by l: g <- u * (S l S^-1); off-block entries of l only shrink.
    for (Eigen::Index c = 0; c < d; ++c) {
      for (Eigen::Index r = c + 1; r < d; ++r) {
        if (l(r, c) != Scalar(0)) l(r, c) *= std::exp(log_scale(r) - log_scale(c));
      }
    }
    g = u * l;
    ++iterations;

    const double scale = g.cwiseAbs().maxCoeff();
    std::vector<Eigen::Index> kept{0};
    bool all_converged = true;
    for (std::size_t k = 1; k < starts.size(); ++k) {
      const Eigen::Index s = starts[k];
      const double coupling = g.block(s, 0, d - s, s).cwiseAbs().maxCoeff();
      const bool done = coupling <= kEps * scale;
      all_converged = all_converged && done;
      if (done || iterations < kMaxLrIterations) kept.push_back(s);
    }
    if (all_converged) break;
    if (iterations >= kMaxLrIterations) {
      // Boundaries that would not decouple are merged; keep going on the rest.
      starts = std::move(kept);
      iterations = 0;
    }
  }
  for (std::size_t k = 1; k < starts.size(); ++k) {
    const Eigen::Index s = starts[k];
    g.block(s, 0, d - s, s).setZero();
  }

  GradedSpectrum out;
  out.clusters = static_cast<int>(starts.size());
  for (std::size_t k = 0; k < starts.size(); ++k) {
    const Eigen::Index b = starts[k];
    const Eigen::Index n = cluster_end(k) - b;
    const double top = log_scale(b);
    const RVector col_scale = (log_scale.segment(b, n).array() - top).exp().matrix();
    const Mat<Scalar> block = g.block(b, b, n, n) * col_scale.asDiagonal();
    for (const Complex& z : raw_eigenvalues(block)) {
      out.values.push_back({std::log(std::abs(z)) + top, std::arg(z)});
    }
    if constexpr (std::is_same_v<Scalar, double>) out.complex_pairs += count_complex_pairs(block);
    out.max_cluster_spread = std::max(out.max_cluster_spread, top - log_scale(b + n - 1));
  }
  sort_with_ties(out.values, [](const GradedEigenvalue& z) {
    return std::tuple{z.log_modulus, std::cos(z.arg), std::sin(z.arg)};
  });
  return out;
}

template <class Scalar>
bool is_unitary(const Mat<Scalar>& a, double tol) {
  if (a.rows() != a.cols()) return false;
  const Mat<Scalar> gram = a.adjoint() * a;
  return (gram - Mat<Scalar>::Identity(a.rows(), a.cols())).cwiseAbs().maxCoeff() <= tol;
}

#define ISOLYAP_INSTANTIATE(S)                                                       \
  template QrPair<S> qr_positive<S>(const Mat<S>&);                                  \
  template LqPair<S> lq_positive<S>(const Mat<S>&);                                  \
  template SvdTriple<S> svd_descending<S>(const Mat<S>&);                            \
  template LogSvd<S> svd_row_graded<S>(const RVector&, const Mat<S>&);               \
  template std::vector<Complex> eig_by_modulus<S>(const Mat<S>&);                    \
  template S principal_minor<S>(const Mat<S>&, const std::vector<int>&);             \
  template std::vector<S> principal_minor_sums<S>(const Mat<S>&);                    \
  template GradedSpectrum graded_spectrum<S>(const Mat<S>&, const RVector&);         \
  template bool is_unitary<S>(const Mat<S>&, double);

ISOLYAP_INSTANTIATE(double)
ISOLYAP_INSTANTIATE(Complex)

#undef ISOLYAP_INSTANTIATE

}  // namespace linalg
}  // namespace isolyap
