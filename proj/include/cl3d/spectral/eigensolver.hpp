#pragma once

#include <Eigen/Core>

namespace cl3d {

struct EigenPairs {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // column j pairs with values[j]; orthonormal columns
};

// Dense symmetric eigendecomposition: Householder reduction to tridiagonal
// form followed by the implicit-shift QL iteration. Only the lower triangle of
// `matrix` is read. Each eigenvector is sign-normalized so that its entry of
// largest magnitude is positive (first such entry on ties).
// Throws NumericalError if the QL iteration fails to converge.
EigenPairs symmetric_eigen(const Eigen::Ref<const Eigen::MatrixXd>& matrix);

// The k smallest eigenpairs. Throws NumericalError when the matrix is not
// symmetric within 1e-9 and ConfigError unless 1 <= k <= rows.
EigenPairs smallest_eigenpairs(const Eigen::Ref<const Eigen::MatrixXd>& matrix, Eigen::Index k);

// Flips v so that its largest-magnitude entry (lowest index on ties) is positive.
void canonicalize_sign(Eigen::Ref<Eigen::VectorXd> v);

}  // namespace cl3d
