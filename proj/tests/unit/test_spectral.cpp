#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <set>
#include <sstream>

#include "cl3d/error.hpp"
#include "cl3d/spectral/eigensolver.hpp"
#include "cl3d/spectral/spectral.hpp"
#include "helpers.hpp"

using namespace cl3d;

namespace {

Eigen::MatrixXd random_symmetric(Eigen::Index n, Rng& rng) {
  const RowMatrix m = test::random_matrix(n, n, rng);
  return 0.5 * (m + m.transpose());
}

// Unit-weight cliques of the given sizes along the diagonal.
AffinityMatrix cliques(const std::vector<int>& sizes) {
  int total = 0;
  for (int s : sizes) total += s;
  AffinityMatrix a{Eigen::MatrixXd::Zero(total, total), 1};
  int offset = 0;
  for (int s : sizes) {
    a.values.block(offset, offset, s, s).setOnes();
    offset += s;
  }
  a.values.diagonal().setZero();
  return a;
}

}  // namespace

TEST_CASE("eigensolver agrees with the dense oracle") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd m = random_symmetric(20, rng);
    const EigenPairs mine = symmetric_eigen(m);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> oracle(m);
    CHECK((mine.values - oracle.eigenvalues()).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((m * mine.vectors - mine.vectors * mine.values.asDiagonal()).colwise().norm().maxCoeff() <= 1e-8);
    CHECK((mine.vectors.transpose() * mine.vectors - Eigen::MatrixXd::Identity(20, 20)).norm() <= 1e-10);

    const EigenPairs low = smallest_eigenpairs(m, 4);
    CHECK((low.values - oracle.eigenvalues().head(4)).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("eigensolver small cases") {
  SUBCASE("identity") {
    const EigenPairs p = smallest_eigenpairs(Eigen::MatrixXd::Identity(3, 3), 2);
    CHECK(p.values.isApprox(Eigen::Vector2d(1, 1)));
    CHECK((p.vectors.transpose() * p.vectors).isApprox(Eigen::Matrix2d::Identity()));
  }
  SUBCASE("diagonal") {
    const EigenPairs p = smallest_eigenpairs(Eigen::Vector3d(3, 1, 2).asDiagonal().toDenseMatrix(), 2);
    CHECK(p.values(0) == doctest::Approx(1.0));
    CHECK(p.values(1) == doctest::Approx(2.0));
    CHECK(p.vectors.col(0).isApprox(Eigen::Vector3d(0, 1, 0)));
    CHECK(p.vectors.col(1).isApprox(Eigen::Vector3d(0, 0, 1)));
  }
  SUBCASE("sign convention makes the dominant entry positive") {
    Rng rng(2);
    const EigenPairs p = symmetric_eigen(random_symmetric(8, rng));
    for (Eigen::Index j = 0; j < p.vectors.cols(); ++j) {
      Eigen::Index at = 0;
      p.vectors.col(j).cwiseAbs().maxCoeff(&at);
      CHECK(p.vectors(at, j) > 0.0);
    }
  }
  SUBCASE("argument checks") {
    Eigen::MatrixXd asym = Eigen::MatrixXd::Identity(3, 3);
    asym(0, 2) = 1.0;
    CHECK_THROWS_AS(smallest_eigenpairs(asym, 1), NumericalError);
    CHECK_THROWS_AS(smallest_eigenpairs(Eigen::MatrixXd::Identity(3, 3), 4), ConfigError);
    CHECK_THROWS_AS(smallest_eigenpairs(Eigen::MatrixXd::Identity(3, 3), 0), ConfigError);
  }
}

TEST_CASE("normalized Laplacian") {
  SUBCASE("complete graph on three vertices") {
    const EigenPairs p = symmetric_eigen(normalized_laplacian(cliques({3}).values));
    CHECK(std::abs(p.values(0)) <= 1e-9);
    CHECK(std::abs(p.values(1) - 1.5) <= 1e-9);
    CHECK(std::abs(p.values(2) - 1.5) <= 1e-9);
  }
  SUBCASE("matches the naive formula") {
    Rng rng(5);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(12, 12);
    for (int i = 0; i < 12; ++i)
      for (int j = 0; j < i; ++j) a(i, j) = a(j, i) = rng.uniform();
    Eigen::MatrixXd naive(12, 12);
    const Eigen::VectorXd d = a.rowwise().sum();
    for (int i = 0; i < 12; ++i)
      for (int j = 0; j < 12; ++j) naive(i, j) = (i == j ? 1.0 : 0.0) - a(i, j) / std::sqrt(d(i) * d(j));
    CHECK((normalized_laplacian(a) - naive).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("isolated vertices are reported") {
    Eigen::MatrixXd a = cliques({2}).values;
    a.conservativeResize(3, 3);
    a.row(2).setZero();
    a.col(2).setZero();
    try {
      normalized_laplacian(a);
      FAIL("expected an isolated-sample error");
    } catch (const NumericalError& e) {
      CHECK(std::string(e.what()).find("isolated sample 2") != std::string::npos);
    }
  }
  SUBCASE("zero multiplicity counts connected components") {
    for (const auto& sizes : std::vector<std::vector<int>>{{5}, {2, 2}, {3, 4, 2}, {2, 3, 4, 5}}) {
      const EigenPairs p = symmetric_eigen(normalized_laplacian(cliques(sizes).values));
      int zeros = 0;
      for (Eigen::Index i = 0; i < p.values.size(); ++i) zeros += std::abs(p.values(i)) <= 1e-8;
      CHECK(zeros == static_cast<int>(sizes.size()));
      CHECK(p.values.minCoeff() >= -1e-9);
      CHECK(p.values.maxCoeff() <= 2.0 + 1e-9);
    }
  }
}

TEST_CASE("spectral embedding") {
  SUBCASE("cliques embed to one point per clique") {
    const AffinityMatrix a = cliques({4, 3, 5});
    const SpectralEmbedding e = spectral_embed(a, 3, Domain::Input);
    CHECK(e.samples() == 12);
    CHECK(e.dims() == 3);
    std::vector<int> owner{0, 0, 0, 0, 1, 1, 1, 2, 2, 2, 2, 2};
    for (int i = 0; i < 12; ++i)
      for (int j = 0; j < 12; ++j) {
        const double gap = (e.vectors.row(i) - e.vectors.row(j)).norm();
        if (owner[i] == owner[j]) CHECK(gap <= 1e-6);
        else CHECK(gap > 1e-3);
      }
  }
  SUBCASE("L = K gives a square orthonormal basis") {
    const SpectralEmbedding e = spectral_embed(cliques({4}), 4, Domain::Global);
    CHECK((e.vectors.transpose() * e.vectors).isApprox(Eigen::MatrixXd::Identity(4, 4), 1e-10));
  }
  SUBCASE("permuting samples permutes rows") {
    Rng rng(9);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(10, 10);
    for (int i = 0; i < 10; ++i)
      for (int j = 0; j < i; ++j) a(i, j) = a(j, i) = rng.uniform() + 0.1;
    std::vector<int> perm{3, 7, 0, 9, 1, 5, 2, 8, 6, 4};
    Eigen::MatrixXd b(10, 10);
    for (int i = 0; i < 10; ++i)
      for (int j = 0; j < 10; ++j) b(i, j) = a(perm[i], perm[j]);
    const SpectralEmbedding ea = spectral_embed({a, 1}, 3, Domain::Local);
    const SpectralEmbedding eb = spectral_embed({b, 1}, 3, Domain::Local);
    for (int i = 0; i < 10; ++i) CHECK((eb.vectors.row(i) - ea.vectors.row(perm[i])).norm() < 1e-9);
  }
  SUBCASE("csv export") {
    const SpectralEmbedding e = spectral_embed(cliques({2, 2}), 2, Domain::Local);
    std::ostringstream out;
    write_embedding_csv(out, {"a", "b", "c", "d"}, e);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "sample_id,v1,v2,domain_tag");
    int rows = 0;
    while (std::getline(in, line)) {
      ++rows;
      CHECK(line.substr(line.rfind(',') + 1) == "local");
    }
    CHECK(rows == 4);
  }
}
