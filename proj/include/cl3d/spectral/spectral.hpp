#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <string>
#include <vector>

#include "cl3d/affinity/distance_matrix.hpp"
#include "cl3d/core/point_cloud.hpp"

namespace cl3d {

enum class Domain { Input, Local, Global };

std::string to_string(Domain domain);

// I - D^{-1/2} A D^{-1/2}, D = diag(row sums of A). Requires a symmetric,
// nonnegative, zero-diagonal affinity. Throws NumericalError("isolated sample i")
// for a zero row sum.
Eigen::MatrixXd normalized_laplacian(const Eigen::Ref<const Eigen::MatrixXd>& affinity);

// Rows of V (L x K) embed the samples; V's columns are the eigenvectors of the
// K smallest eigenvalues of the normalized Laplacian, sign-canonicalized.
struct SpectralEmbedding {
  RowMatrix vectors;
  Eigen::VectorXd eigenvalues;
  Domain domain = Domain::Input;

  Eigen::Index samples() const { return vectors.rows(); }
  Eigen::Index dims() const { return vectors.cols(); }
};

SpectralEmbedding spectral_embed(const AffinityMatrix& affinity, Eigen::Index k, Domain domain);

// Long-format CSV: header "sample_id,v1,...,vK,domain_tag", one row per sample.
// Appends rows only when write_header is false.
void write_embedding_csv(std::ostream& out, const std::vector<std::string>& ids, const SpectralEmbedding& embedding,
                         bool write_header = true);

}  // namespace cl3d
