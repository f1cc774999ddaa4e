#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "pcout/baselines.hpp"
#include "pcout/evalsim.hpp"
#include "test_support.hpp"

using namespace pcout;
using Catch::Approx;

namespace {

double sample_sd(const Vector& v) {
  const double m = v.mean();
  return std::sqrt((v.array() - m).square().sum() / static_cast<double>(v.size() - 1));
}

Matrix with_rows_scaled(Matrix x, const std::vector<Eigen::Index>& rows, double shift) {
  for (Eigen::Index r : rows) x.row(r).array() += shift;
  return x;
}

} // namespace

TEST_CASE("robust distances", "[baselines][distance]") {
  const Matrix x = testing::normal_matrix(30, 3, 1);
  const LocationScatter id{Vector::Zero(3), Matrix::Identity(3, 3)};
  CHECK((robust_distances(x, id) - x.rowwise().norm()).cwiseAbs().maxCoeff() < 1e-12);

  const LocationScatter at{Vector(x.row(4).transpose()), Matrix::Identity(3, 3)};
  CHECK(robust_distances(x, at)(4) == 0.0);

  // closed-form 2x2 inverse
  Matrix s(2, 2);
  s << 2.0, 0.5, 0.5, 1.0;
  const double det = 2.0 - 0.25;
  Matrix pt(1, 2);
  pt << 1.0, -2.0;
  const double quad = (1.0 * 1.0 * 1.0 - 2.0 * 0.5 * 1.0 * -2.0 + 2.0 * 4.0) / det;
  CHECK(robust_distances(pt, {Vector::Zero(2), s})(0) == Approx(std::sqrt(quad)).epsilon(1e-12));

  Matrix singular = Matrix::Ones(2, 2);
  CHECK_THROWS_AS(robust_distances(pt, {Vector::Zero(2), singular}), Error);
}

TEST_CASE("robust distances are affine invariant", "[baselines][distance][property]") {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const Matrix x = testing::normal_matrix(25, 4, seed);
    const Matrix a = testing::normal_matrix(4, 4, seed + 50) + 3.0 * Matrix::Identity(4, 4);
    const Vector b = testing::normal_vector(4, seed + 60);
    const Vector t = testing::normal_vector(4, seed + 70);
    const Matrix g = testing::normal_matrix(4, 4, seed + 80);
    const Matrix c = g * g.transpose() + Matrix::Identity(4, 4);

    const Matrix y = (x * a.transpose()).rowwise() + b.transpose();
    const LocationScatter mapped{a * t + b, a * c * a.transpose()};
    const Vector d1 = robust_distances(x, {t, c});
    const Vector d2 = robust_distances(y, mapped);
    CHECK((d1 - d2).cwiseAbs().maxCoeff() < 1e-8 * d1.maxCoeff());
  }
}

TEST_CASE("classical detector", "[baselines][classical]") {
  const Matrix x = testing::normal_matrix(50, 10, 2);
  const DetectionResult r = classical_detect(x, 0.05);
  CHECK(r.cutoff == Approx(4.278672).margin(1e-5));
  CHECK(r.dimension == 10);
  CHECK(r.method == "classical");

  const Matrix wide = testing::normal_matrix(20, 30, 3);
  try {
    classical_detect(wide, 0.05);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::numeric);
    CHECK(std::string(e.what()).find("prcmpout") != std::string::npos);
  }
  CHECK_THROWS_AS(classical_detect(x, 0.0), Error);
  CHECK_THROWS_AS(classical_detect(x, 1.0), Error);

  const Matrix big = testing::normal_matrix(5000, 5, 4);
  const double rate = static_cast<double>(classical_detect(big, 0.05).flagged_count()) / 5000.0;
  CHECK(std::fabs(rate - 0.05) <= 0.01);
}

TEST_CASE("pairwise scale covariance", "[baselines][ogk]") {
  const Vector x = testing::normal_vector(200, 5);
  const Vector y = testing::normal_vector(200, 6);
  CHECK(ogk_pairwise_cov(x, x) == Approx(mad(x) * mad(x)).epsilon(1e-12));
  CHECK(ogk_pairwise_cov(x, y) == Approx(ogk_pairwise_cov(y, x)).epsilon(1e-12));
  CHECK(ogk_pairwise_cov(x, Vector(-y)) == Approx(-ogk_pairwise_cov(x, y)).epsilon(1e-12));

  // with the sample standard deviation the identity is the ordinary covariance
  const double cov = ((x.array() - x.mean()) * (y.array() - y.mean())).sum() / 199.0;
  CHECK(ogk_pairwise_cov(x, y, sample_sd) == Approx(cov).epsilon(1e-10));
}

TEST_CASE("OGK estimate", "[baselines][ogk]") {
  SECTION("close to the truth for normal data") {
    const Matrix g = testing::normal_matrix(3, 3, 10);
    Matrix sigma = g * g.transpose() + Matrix::Identity(3, 3);
    const Eigen::LLT<Matrix> llt(sigma);
    const Matrix x = testing::normal_matrix(20000, 3, 11) * Matrix(llt.matrixL()).transpose();
    const OgkEstimate est = ogk_estimate(x);
    CHECK(est.location.cwiseAbs().maxCoeff() < 0.1);
    // single-pass MAD-based scatter is consistent up to a modest bias
    const Matrix rel = (est.scatter - sigma).cwiseAbs().array() / sigma.diagonal().maxCoeff();
    CHECK(rel.maxCoeff() < 0.15);
  }
  SECTION("positive semidefinite on wild data") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      Matrix x = testing::normal_matrix(40, 6, seed);
      x.col(2) = x.col(0) * 3.0 + 0.01 * x.col(2);
      x.row(0) *= 50.0;
      const OgkEstimate est = ogk_estimate(x);
      CHECK(sym_eigen(est.scatter).values.minCoeff() >= -1e-10 * est.scatter.norm());
    }
  }
  SECTION("duplicated column gives a rank-deficient scatter") {
    Matrix x = testing::normal_matrix(50, 3, 12);
    x.col(2) = x.col(0);
    const OgkEstimate est = ogk_estimate(x);
    const Vector ev = sym_eigen(est.scatter).values;
    CHECK(ev(2) <= 1e-10 * ev(0));
    CHECK_THROWS_AS(robust_distances(x, est), Error);
  }
}

TEST_CASE("OGK eigenvector-space distances equal the Mahalanobis form", "[baselines][ogk][property]") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const Matrix x = testing::normal_matrix(60, 5, seed) * testing::random_orthogonal(5, seed + 9);
    const OgkEstimate est = ogk_estimate(x);
    const Vector d2 = ogk_squared_distances(x, est);
    const Vector md = robust_distances(x, est);
    CHECK((d2.cwiseSqrt() - md).cwiseAbs().maxCoeff() < 1e-8 * md.maxCoeff());
  }
}

TEST_CASE("OGK reweighting", "[baselines][ogk][reweight]") {
  const Matrix x = testing::normal_matrix(400, 4, 21);
  const OgkEstimate est = ogk_estimate(x);

  const Reweighted all = ogk_reweight(x, est, 0.999999999);
  CHECK(std::all_of(all.retained.begin(), all.retained.end(), [](bool b) { return b; }));
  CHECK((all.location - x.colwise().mean().transpose()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((all.scatter - covariance(x)).cwiseAbs().maxCoeff() < 1e-12);

  const Reweighted half = ogk_reweight(x, est, 0.5);
  const auto kept = std::count(half.retained.begin(), half.retained.end(), true);
  CHECK(kept >= 195);
  CHECK(kept <= 200);

  CHECK_THROWS_AS(ogk_reweight(x, est, 1.0), Error);
}

TEST_CASE("OGK reweighting moves the scatter toward the inlier model", "[baselines][ogk][reweight]") {
  const std::vector<Eigen::Index> bad{0, 7, 13, 22, 31, 38, 44, 59, 61, 70, 77, 85, 90, 93, 96, 99, 101, 150, 170, 199};
  int closer = 0;
  for (std::uint64_t seed = 1; seed <= 16; ++seed) {
    const Matrix x = with_rows_scaled(testing::normal_matrix(200, 4, seed), bad, 6.0);
    const OgkEstimate est = ogk_estimate(x);
    const Reweighted rw = ogk_reweight(x, est);
    const Matrix identity = Matrix::Identity(4, 4);
    if ((rw.scatter - identity).norm() < (covariance(x) - identity).norm()) ++closer;
    for (Eigen::Index r : bad) CHECK_FALSE(rw.retained[static_cast<size_t>(r)]);
  }
  CHECK(closer == 16);
}

TEST_CASE("OGK detector", "[baselines][ogk]") {
  const Matrix x = with_rows_scaled(testing::normal_matrix(100, 5, 33), {3, 40, 77}, 8.0);
  const DetectionResult r = ogk_detect(x, 0.05);
  CHECK(r.flags[3]);
  CHECK(r.flags[40]);
  CHECK(r.flags[77]);
  CHECK(r.flagged_count() <= 15);
  CHECK(r.dimension == 5);
}

TEST_CASE("spatial signs", "[baselines][sign2]") {
  const Matrix x = testing::normal_matrix(50, 7, 40);
  const Vector c = Vector::Zero(7);
  const Matrix s = spatial_signs(x, c);
  for (Eigen::Index i = 0; i < 50; ++i) CHECK(s.row(i).norm() == Approx(1.0).epsilon(1e-14));

  Matrix y = x;
  y.row(9).setZero();
  const Matrix t = spatial_signs(y, c);
  CHECK(t.row(9).norm() == 0.0);

  // signs ignore the radius
  Matrix far = x;
  far.row(2) *= 1e6;
  far.row(5) *= 1e-3;
  CHECK((spatial_signs(far, c) - s).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((sign_covariance(spatial_signs(far, c)) - sign_covariance(s)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("sign covariance of a spherical sample is near I / p", "[baselines][sign2]") {
  const Matrix x = testing::normal_matrix(2000, 5, 41);
  const Matrix sc = sign_covariance(spatial_signs(x, Vector::Zero(5)));
  CHECK(sc.trace() == Approx(1.0).epsilon(1e-12));
  CHECK((sc - Matrix::Identity(5, 5) / 5.0).cwiseAbs().maxCoeff() < 0.02);
}

TEST_CASE("sign2 detector", "[baselines][sign2]") {
  const auto spec = SimSpec::uniform_shift(100, 20, reference_outlier_indices(), 3.0, 1.0, 3);
  const SimData sim = generate_contaminated(spec);
  const DetectionResult r = sign2_detect(sim.data.values, 0.05);
  const ConfusionCounts cc = confusion(sim.truth, r.flags);
  CHECK(cc.a >= 16);
  CHECK(r.method == "sign2");

  const Matrix wide = testing::normal_matrix(30, 300, 42);
  const DetectionResult w = sign2_detect(wide, 0.05);
  CHECK(w.distances.size() == 30);
  CHECK(w.dimension <= 29);
  CHECK_THROWS_AS(sign2_detect(wide, 1.5), Error);
}
