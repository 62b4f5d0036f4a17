#include "cl3d/spectral/spectral.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "cl3d/error.hpp"
#include "cl3d/spectral/eigensolver.hpp"

namespace cl3d {

std::string to_string(Domain domain) {
  switch (domain) {
    case Domain::Input: return "input";
    case Domain::Local: return "local";
    case Domain::Global: return "global";
  }
  return "unknown";
}

Eigen::MatrixXd normalized_laplacian(const Eigen::Ref<const Eigen::MatrixXd>& affinity) {
  const Eigen::Index n = affinity.rows();
  if (affinity.cols() != n) throw NumericalError("affinity matrix is not square");
  if ((affinity.array() < 0.0).any()) throw NumericalError("affinity matrix has negative entries");
  if ((affinity - affinity.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw NumericalError("affinity matrix is not symmetric");
  if (affinity.diagonal().cwiseAbs().maxCoeff() != 0.0) throw NumericalError("affinity matrix has a nonzero diagonal");
  const Eigen::VectorXd degree = affinity.rowwise().sum();
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(degree[i] > 0.0)) throw NumericalError("isolated sample " + std::to_string(i));
  const Eigen::VectorXd inv_sqrt = degree.cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd laplacian = -(inv_sqrt.asDiagonal() * affinity * inv_sqrt.asDiagonal());
  laplacian.diagonal().array() += 1.0;
  return laplacian;
}

SpectralEmbedding spectral_embed(const AffinityMatrix& affinity, Eigen::Index k, Domain domain) {
  const Eigen::MatrixXd laplacian = normalized_laplacian(affinity.values);
  const EigenPairs pairs = smallest_eigenpairs(laplacian, k);
  SpectralEmbedding embedding;
  embedding.vectors = pairs.vectors;
  embedding.eigenvalues = pairs.values;
  embedding.domain = domain;
  return embedding;
}

void write_embedding_csv(std::ostream& out, const std::vector<std::string>& ids, const SpectralEmbedding& embedding,
                         bool write_header) {
  if (static_cast<Eigen::Index>(ids.size()) != embedding.samples())
    throw DataError("embedding export: id count does not match embedding rows");
  if (write_header) {
    out << "sample_id";
    for (Eigen::Index j = 0; j < embedding.dims(); ++j) out << ",v" << (j + 1);
    out << ",domain_tag\n";
  }
  char buf[32];
  for (Eigen::Index i = 0; i < embedding.samples(); ++i) {
    out << ids[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < embedding.dims(); ++j) {
      std::snprintf(buf, sizeof buf, ",%.17g", embedding.vectors(i, j));
      out << buf;
    }
    out << ',' << to_string(embedding.domain) << '\n';
  }
}

}  // namespace cl3d
