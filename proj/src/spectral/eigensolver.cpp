#include "cl3d/spectral/eigensolver.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "cl3d/error.hpp"

namespace cl3d {
namespace {

// Householder tridiagonalization (EISPACK tred2 ordering). On return `v` holds
// the accumulated orthogonal transform, `d` the diagonal and `e` the
// subdiagonal in e[1..n-1].
void tridiagonalize(Eigen::MatrixXd& v, Eigen::VectorXd& d, Eigen::VectorXd& e) {
  const Eigen::Index n = v.rows();
  for (Eigen::Index j = 0; j < n; ++j) d[j] = v(n - 1, j);

  for (Eigen::Index i = n - 1; i > 0; --i) {
    double scale = 0.0;
    double h = 0.0;
    for (Eigen::Index k = 0; k < i; ++k) scale += std::abs(d[k]);
    if (scale == 0.0) {
      e[i] = d[i - 1];
      for (Eigen::Index j = 0; j < i; ++j) {
        d[j] = v(i - 1, j);
        v(i, j) = 0.0;
        v(j, i) = 0.0;
      }
    } else {
      for (Eigen::Index k = 0; k < i; ++k) {
        d[k] /= scale;
        h += d[k] * d[k];
      }
      double f = d[i - 1];
      double g = std::sqrt(h);
      if (f > 0) g = -g;
      e[i] = scale * g;
      h -= f * g;
      d[i - 1] = f - g;
      for (Eigen::Index j = 0; j < i; ++j) e[j] = 0.0;

      for (Eigen::Index j = 0; j < i; ++j) {
        f = d[j];
        v(j, i) = f;
        g = e[j] + v(j, j) * f;
        for (Eigen::Index k = j + 1; k <= i - 1; ++k) {
          g += v(k, j) * d[k];
          e[k] += v(k, j) * f;
        }
        e[j] = g;
      }
      f = 0.0;
      for (Eigen::Index j = 0; j < i; ++j) {
        e[j] /= h;
        f += e[j] * d[j];
      }
      const double hh = f / (h + h);
      for (Eigen::Index j = 0; j < i; ++j) e[j] -= hh * d[j];
      for (Eigen::Index j = 0; j < i; ++j) {
        f = d[j];
        g = e[j];
        for (Eigen::Index k = j; k <= i - 1; ++k) v(k, j) -= (f * e[k] + g * d[k]);
        d[j] = v(i - 1, j);
        v(i, j) = 0.0;
      }
    }
    d[i] = h;
  }

  for (Eigen::Index i = 0; i < n - 1; ++i) {
    v(n - 1, i) = v(i, i);
    v(i, i) = 1.0;
    const double h = d[i + 1];
    if (h != 0.0) {
      for (Eigen::Index k = 0; k <= i; ++k) d[k] = v(k, i + 1) / h;
      for (Eigen::Index j = 0; j <= i; ++j) {
        double g = 0.0;
        for (Eigen::Index k = 0; k <= i; ++k) g += v(k, i + 1) * v(k, j);
        for (Eigen::Index k = 0; k <= i; ++k) v(k, j) -= g * d[k];
      }
    }
    for (Eigen::Index k = 0; k <= i; ++k) v(k, i + 1) = 0.0;
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    d[j] = v(n - 1, j);
    v(n - 1, j) = 0.0;
  }
  v(n - 1, n - 1) = 1.0;
  e[0] = 0.0;
}

// Implicit-shift QL on the tridiagonal (d, e), accumulating rotations into v.
void tridiagonal_ql(Eigen::MatrixXd& v, Eigen::VectorXd& d, Eigen::VectorXd& e) {
  constexpr int kMaxIterations = 60;
  const Eigen::Index n = v.rows();
  for (Eigen::Index i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;

  double shift_total = 0.0;
  double tst1 = 0.0;
  const double eps = std::numeric_limits<double>::epsilon();
  for (Eigen::Index l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    Eigen::Index m = l;
    while (m < n - 1 && std::abs(e[m]) > eps * tst1) ++m;

    if (m > l) {
      int iter = 0;
      do {
        if (++iter > kMaxIterations)
          throw NumericalError("eigensolver did not converge at index " + std::to_string(l));
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (Eigen::Index i = l + 2; i < n; ++i) d[i] -= h;
        shift_total += h;

        p = d[m];
        double c = 1.0, c2 = 1.0, c3 = 1.0;
        const double el1 = e[l + 1];
        double s = 0.0, s2 = 0.0;
        for (Eigen::Index i = m - 1; i >= l; --i) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[i];
          h = c * p;
          r = std::hypot(p, e[i]);
          e[i + 1] = s * r;
          s = e[i] / r;
          c = p / r;
          p = c * d[i] - s * g;
          d[i + 1] = h + s * (c * g + s * d[i]);
          for (Eigen::Index k = 0; k < n; ++k) {
            h = v(k, i + 1);
            v(k, i + 1) = s * v(k, i) + c * h;
            v(k, i) = c * v(k, i) - s * h;
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > eps * tst1);
    }
    d[l] += shift_total;
    e[l] = 0.0;
  }
}

}  // namespace

void canonicalize_sign(Eigen::Ref<Eigen::VectorXd> v) {
  Eigen::Index arg = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
  if (v.size() > 0 && v[arg] < 0.0) v = -v;
}

EigenPairs symmetric_eigen(const Eigen::Ref<const Eigen::MatrixXd>& matrix) {
  const Eigen::Index n = matrix.rows();
  if (matrix.cols() != n) throw NumericalError("eigensolver: matrix is not square");
  if (!matrix.allFinite()) throw NumericalError("eigensolver: matrix has non-finite entries");
  EigenPairs result;
  if (n == 0) return result;

  Eigen::MatrixXd v = matrix.triangularView<Eigen::Lower>();
  v.triangularView<Eigen::StrictlyUpper>() = v.transpose().triangularView<Eigen::StrictlyUpper>();
  Eigen::VectorXd d(n), e(n);
  tridiagonalize(v, d, e);
  tridiagonal_ql(v, d, e);

  // Selection sort keeps the pairing stable for equal eigenvalues.
  for (Eigen::Index i = 0; i < n - 1; ++i) {
    Eigen::Index k = i;
    for (Eigen::Index j = i + 1; j < n; ++j)
      if (d[j] < d[k]) k = j;
    if (k != i) {
      std::swap(d[i], d[k]);
      v.col(i).swap(v.col(k));
    }
  }
  for (Eigen::Index j = 0; j < n; ++j) canonicalize_sign(v.col(j));
  result.values = std::move(d);
  result.vectors = std::move(v);
  return result;
}

EigenPairs smallest_eigenpairs(const Eigen::Ref<const Eigen::MatrixXd>& matrix, Eigen::Index k) {
  if (matrix.rows() != matrix.cols()) throw NumericalError("eigensolver: matrix is not square");
  if (k < 1 || k > matrix.rows())
    throw ConfigError("requested " + std::to_string(k) + " eigenpairs of a " + std::to_string(matrix.rows()) +
                      "x" + std::to_string(matrix.rows()) + " matrix");
  if ((matrix - matrix.transpose()).cwiseAbs().maxCoeff() > 1e-9)
    throw NumericalError("eigensolver: matrix is not symmetric");
  EigenPairs full = symmetric_eigen(matrix);
  full.values.conservativeResize(k);
  full.vectors.conservativeResize(Eigen::NoChange, k);
  return full;
}

}  // namespace cl3d
