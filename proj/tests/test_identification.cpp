#include <doctest.h>

#include <cmath>
#include <numbers>

#include "pwasvar/error.hpp"
#include "pwasvar/identification.hpp"
#include "support.hpp"

using namespace pwasvar;
using namespace pwasvar::testing;

namespace {

bool is_signed_permutation(const Matrix& q, double tol) {
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    int big = 0;
    for (Eigen::Index j = 0; j < q.cols(); ++j) {
      const double v = std::abs(q(i, j));
      if (std::abs(v - 1.0) <= tol)
        ++big;
      else if (v > tol)
        return false;
    }
    if (big != 1) return false;
  }
  return true;
}

Matrix rotation(double theta) {
  Matrix r(2, 2);
  r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  return r;
}

}  // namespace

TEST_CASE("orthogonal lower factor") {
  {
    const RotationNormalization n = orthogonal_lower_factor(Matrix::Identity(3, 3));
    CHECK((n.q - Matrix::Identity(3, 3)).norm() == 0.0);
  }
  {
    Matrix swap(2, 2);
    swap << 0, 1, 1, 0;
    const RotationNormalization n = orthogonal_lower_factor(swap);
    CHECK((n.q - swap).norm() < 1e-15);
    CHECK((n.l - Matrix::Identity(2, 2)).norm() < 1e-15);
  }
  CounterRng rng(1, 0);
  for (int rep = 0; rep < 200; ++rep) {
    const Eigen::Index p = 2 + rep % 4;
    const Matrix d = random_matrix(rng, p, p);
    const RotationNormalization n = orthogonal_lower_factor(d);
    CHECK(is_orthogonal(n.q, 1e-10));
    CHECK((n.q.transpose() * n.l - d).cwiseAbs().maxCoeff() < 1e-10);
    for (Eigen::Index i = 0; i < p; ++i) {
      CHECK(n.l(i, i) > 0.0);
      for (Eigen::Index j = i + 1; j < p; ++j) CHECK(n.l(i, j) == 0.0);
    }
  }
}

TEST_CASE("orthogonal reduced form") {
  CounterRng rng(2, 0);
  for (int rep = 0; rep < 20; ++rep) {
    const PwaSvarModel m = random_svar(rng, 3, 2, 3);
    Vector z0 = random_vector(rng, 3);
    const ReducedForm rf = orthogonal_reduced_form(m, z0);
    const Matrix d = rf.model.f0().jacobian_at(z0);
    for (Eigen::Index i = 0; i < 3; ++i)
      for (Eigen::Index j = i + 1; j < 3; ++j) CHECK(std::abs(d(i, j)) < 1e-10);
    CHECK((rf.normalization.q.transpose() * rf.normalization.l - m.f0().jacobian_at(z0)).norm() < 1e-10);
  }
  const PwaSvarModel m = random_svar(rng, 2, 1, 2);
  const auto& part = m.partition().threshold_data();
  const Vector on_boundary = part.direction * part.thresholds[0] / part.direction.squaredNorm();
  CHECK_THROWS_AS(orthogonal_reduced_form(m, on_boundary), Error);
  PwaSvarModel id(Vector::Zero(2), PwaMap::affine(Vector::Zero(2), Matrix::Identity(2, 2)),
                  {PwaMap::affine(Vector::Zero(2), 0.3 * Matrix::Identity(2, 2))});
  const ReducedForm same = orthogonal_reduced_form(id, Vector::Ones(2));
  CHECK((same.normalization.q - Matrix::Identity(2, 2)).norm() == 0.0);
}

TEST_CASE("rotate_model") {
  CounterRng rng(3, 0);
  const PwaSvarModel m = random_svar(rng, 3, 2, 2);
  const PwaSvarModel same = rotate_model(m, Matrix::Identity(3, 3));
  CHECK((same.f0().regime(1).matrix - m.f0().regime(1).matrix).norm() == 0.0);
  const PwaSvarModel neg = rotate_model(m, -Matrix::Identity(3, 3));
  CHECK((neg.f0().regime(0).matrix + m.f0().regime(0).matrix).norm() == 0.0);
  CHECK((neg.intercept() + m.intercept()).norm() == 0.0);

  const Matrix q = random_orthogonal(rng, 3);
  const PwaSvarModel r = rotate_model(m, q);
  double worst = 0.0;
  for (int j = 0; j < 100; ++j) {
    const std::vector<Vector> hist{random_vector(rng, 3), random_vector(rng, 3)};
    const Vector xi = random_vector(rng, 3, 2.0);
    worst = std::max(worst, std::abs(conditional_log_density(m, xi, hist) - conditional_log_density(r, xi, hist)));
  }
  CHECK(worst < 1e-9);

  Matrix almost = q;
  almost(0, 0) += 1e-6;
  CHECK_THROWS_AS(rotate_model(m, almost), Error);

  const RegimePartition part = RegimePartition::threshold(Vector::Unit(2, 0), {0.0});
  auto flat = [&](const Matrix& a) { return PwaMap::on_partition(part, {{Vector::Zero(2), a}, {Vector::Zero(2), a}}); };
  const PwaSvarModel het(Vector::Zero(2), flat(Matrix::Identity(2, 2)), {flat(0.2 * Matrix::Identity(2, 2))},
                         SkedasticSpec::diagonal_regime(1, {Vector::Ones(2), Vector{{1.0, 2.0}}}));
  try {
    rotate_model(het, rotation(0.3));
    FAIL("expected SkedasticNotDiagonalizable");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SkedasticNotDiagonalizable);
  }
  Matrix perm(2, 2);
  perm << 0, -1, 1, 0;
  const PwaSvarModel swapped = rotate_model(het, perm);
  CHECK((swapped.shocks().sd[1] - Vector{{2.0, 1.0}}).norm() < 1e-15);
}

TEST_CASE("find_rotation") {
  CounterRng rng(4, 0);
  for (int rep = 0; rep < 10; ++rep) {
    const PwaSvarModel a = random_svar(rng, 3, 2, 3);
    const Matrix q = random_orthogonal(rng, 3);
    const PwaSvarModel b = rotate_model(a, q);
    const auto probes = rotation_probes(a, static_cast<std::uint64_t>(rep));
    const RotationMatch match = find_rotation(a, b, probes);
    CHECK(match.equivalent);
    CHECK(operator_norm(match.q - q) < 1e-8);
    const RotationMatch back = find_rotation(b, a, probes);
    CHECK(operator_norm(back.q - q.transpose()) < 1e-8);
    const RotationMatch self = find_rotation(a, a, probes);
    CHECK(operator_norm(self.q - Matrix::Identity(3, 3)) < 1e-10);

    const Matrix q2 = random_orthogonal(rng, 3);
    const PwaSvarModel c = rotate_model(b, q2);
    const RotationMatch composed = find_rotation(a, c, probes);
    CHECK(operator_norm(composed.q - find_rotation(b, c, probes).q * match.q) < 1e-6);

    std::vector<AffinePiece> pieces = a.f0().regimes();
    std::vector<PwaMap> lags = a.lag_maps();
    auto lag_pieces = lags[0].regimes();
    for (auto& piece : lag_pieces) piece.matrix(0, 0) += 0.1;
    lags[0] = PwaMap::on_partition(a.partition(), lag_pieces);
    const PwaSvarModel perturbed(a.intercept(), a.f0(), std::move(lags));
    CHECK_FALSE(find_rotation(a, perturbed, probes).equivalent);
  }
  const PwaSvarModel a = random_svar(rng, 3, 1, 2);
  CHECK_THROWS_AS(find_rotation(a, a, {Vector::Zero(3)}), Error);
}

TEST_CASE("instrument_q1") {
  const std::size_t t = 10000;
  CounterRng rng(5, 0);
  Matrix eps(t, 3);
  Vector w(t);
  for (std::size_t i = 0; i < t; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) eps(static_cast<Eigen::Index>(i), j) = rng.normal();
    w[static_cast<Eigen::Index>(i)] = 0.5 * eps(static_cast<Eigen::Index>(i), 0) + rng.normal();
  }
  const InstrumentShock s = instrument_q1(eps, w);
  CHECK(std::acos(std::min(1.0, s.q1[0])) * 180.0 / std::numbers::pi < 5.0);
  CHECK(s.shock.size() == static_cast<Eigen::Index>(t));
  CHECK(s.shock.dot(w) > 0.0);

  Vector noise(t);
  for (std::size_t i = 0; i < t; ++i) noise[static_cast<Eigen::Index>(i)] = rng.normal();
  CHECK_THROWS_AS(instrument_q1(eps, Vector::Zero(t)), Error);
  int weak = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CounterRng r2(seed, 9);
    for (std::size_t i = 0; i < t; ++i) noise[static_cast<Eigen::Index>(i)] = r2.normal();
    try {
      instrument_q1(eps, noise);
    } catch (const Error& e) {
      weak += e.kind() == ErrorKind::WeakInstrument;
    }
  }
  CHECK(weak >= 9);

  const std::size_t big = 100000;
  const Matrix q = random_orthogonal(rng, 3);
  Matrix u(big, 3);
  Vector z(big);
  for (std::size_t i = 0; i < big; ++i) {
    const Vector e = random_vector(rng, 3);
    u.row(static_cast<Eigen::Index>(i)) = (q * e).transpose();
    z[static_cast<Eigen::Index>(i)] = e[0] + rng.normal();
  }
  CHECK(std::abs(instrument_q1(u, z).q1.dot(q.col(0))) > 0.99);
  CHECK_THROWS_AS(instrument_q1(u.topRows(20), z.head(20)), Error);
}

TEST_CASE("heteroskedastic identification class") {
  CHECK(hetero_identification_class({Vector::Ones(3), 2.0 * Vector::Ones(3)}).kind == HeteroClass::Kind::NoneExtra);
  CHECK(hetero_identification_class({Vector::Ones(2), Vector{{1.0, 2.0}}}).kind ==
        HeteroClass::Kind::SignedPermutation);
  const HeteroClass block = hetero_identification_class({Vector{{1.0, 1.0, 4.0}}, Vector{{2.0, 2.0, 3.0}}});
  CHECK(block.kind == HeteroClass::Kind::Block);
  REQUIRE(block.groups.size() == 2);
  CHECK(block.groups[0] == std::vector<std::size_t>{0, 1});
  CHECK(block.groups[1] == std::vector<std::size_t>{2});
}

TEST_CASE("diagonalizing rotations") {
  CHECK(is_diagonalizing_rotation(Matrix::Identity(2, 2), Vector{{1.0, 5.0}}));
  CHECK_FALSE(is_diagonalizing_rotation(rotation(std::numbers::pi / 4), Vector{{1.0, 2.0}}));
  Matrix perm(3, 3);
  perm << 0, 0, -1, 1, 0, 0, 0, 1, 0;
  CHECK(is_diagonalizing_rotation(perm, Vector{{1.0, 2.0, 3.0}}));
  CHECK_THROWS_AS(is_diagonalizing_rotation(2.0 * Matrix::Identity(2, 2), Vector::Ones(2)), Error);

  const auto distinct = admissible_rotations_2d(Vector{{1.0, 2.0}}, 3600);
  CHECK(distinct.size() == 8);
  for (const auto& q : distinct) CHECK(is_signed_permutation(q, 1e-3));
  CHECK(admissible_rotations_2d(Vector::Ones(2), 3600).size() == 7200);
}
