#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "nssjd/joint_diag.hpp"
#include "nssjd/mdi.hpp"
#include "nssjd/rng.hpp"
#include "nssjd/sym_linalg.hpp"
#include "test_support.hpp"

using nssjd::joint_diagonalize;
using nssjd::JdOptions;
using nssjd::JdResult;
using nssjd::objective_g;

namespace {

std::vector<Eigen::MatrixXd> diagonalizable_family(int p, int k,
                                                   const Eigen::MatrixXd& u0,
                                                   nssjd::RngStream& rng) {
  std::vector<Eigen::MatrixXd> mats;
  mats.reserve(k);
  for (int i = 0; i < k; ++i) {
    Eigen::VectorXd d(p);
    for (int j = 0; j < p; ++j) d(j) = rng.uniform() * 4.0 + 0.5 + j;
    mats.push_back(u0.transpose() * d.asDiagonal() * u0);
  }
  return mats;
}

}  // namespace

TEST_CASE("objective for identity on diagonal matrices") {
  std::vector<Eigen::MatrixXd> mats;
  double expected = 0.0;
  for (int i = 1; i <= 3; ++i) {
    Eigen::MatrixXd m = Eigen::VectorXd::LinSpaced(3, i, i + 2).asDiagonal();
    expected += m.squaredNorm();
    mats.push_back(m);
  }
  CHECK(objective_g(Eigen::MatrixXd::Identity(3, 3), mats) ==
        doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("objective invariant under signed permutations") {
  nssjd::RngStream rng(21);
  std::vector<Eigen::MatrixXd> mats;
  for (int i = 0; i < 4; ++i) {
    Eigen::MatrixXd m = testsup::random_gaussian(3, 3, rng);
    mats.push_back(0.5 * (m + m.transpose()));
  }
  const Eigen::MatrixXd u = testsup::random_orthogonal(3, rng);
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(3, 3);
  g(0, 2) = -1;
  g(1, 0) = 1;
  g(2, 1) = -1;
  CHECK(objective_g((g * u).eval(), mats) ==
        doctest::Approx(objective_g(u, mats)).epsilon(1e-14));
}

TEST_CASE("objective rejects non-orthogonal input") {
  std::vector<Eigen::MatrixXd> mats{Eigen::MatrixXd::Identity(2, 2)};
  Eigen::MatrixXd u(2, 2);
  u << 1, 1, 0, 1;
  CHECK_THROWS_AS(objective_g(u, mats), std::invalid_argument);
}

TEST_CASE("single symmetric 2x2: closed-form Jacobi angle") {
  nssjd::RngStream rng(22);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::MatrixXd m(2, 2);
    const double a = rng.normal(), b = rng.normal(), c = rng.normal();
    m << a, c, c, b;
    const JdResult res = joint_diagonalize({m});
    CHECK(res.converged);
    CHECK(nssjd::off_diag_sq((res.u * m * res.u.transpose()).eval()) <
          1e-24 + 1e-14 * m.squaredNorm());

    // The rotation must agree with theta = atan2(2c, a - b) / 2 mapped into
    // (-pi/4, pi/4], up to the signed-permutation ambiguity.
    double theta = 0.5 * std::atan2(2.0 * c, a - b);
    while (theta > std::numbers::pi / 4) theta -= std::numbers::pi / 2;
    while (theta <= -std::numbers::pi / 4) theta += std::numbers::pi / 2;
    Eigen::MatrixXd rot(2, 2);
    rot << std::cos(theta), std::sin(theta), -std::sin(theta), std::cos(theta);
    const auto [g, cost] =
        nssjd::optimal_signed_permutation((res.u * rot.transpose()).eval());
    CHECK(cost < 1e-8);
  }
}

TEST_CASE("quarter-turn rotation diagonalizes the all-ones matrix") {
  Eigen::MatrixXd m(2, 2);
  m << 1, 1, 1, 1;
  const double c = std::cos(std::numbers::pi / 4), s = std::sin(std::numbers::pi / 4);
  Eigen::MatrixXd u(2, 2);
  u << c, s, -s, c;
  CHECK(objective_g(u, {m}) == doctest::Approx(4.0).epsilon(1e-12));
  const Eigen::MatrixXd rotated = u * m * u.transpose();
  CHECK(rotated(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(std::abs(rotated(1, 1)) < 1e-12);
}

TEST_CASE("pure off-diagonal 2x2 hits the quarter-turn branch") {
  Eigen::MatrixXd m(2, 2);
  m << 0, 1, 1, 0;
  const JdResult res = joint_diagonalize({m});
  const Eigen::MatrixXd rotated = res.u * m * res.u.transpose();
  CHECK(nssjd::off_diag_sq(rotated) < 1e-20);
  CHECK(res.objective == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("all-diagonal family returns a signed permutation") {
  std::vector<Eigen::MatrixXd> mats;
  double total = 0.0;
  for (int i = 0; i < 5; ++i) {
    Eigen::VectorXd d(4);
    for (int j = 0; j < 4; ++j) d(j) = 1.0 + j + 0.3 * i;
    Eigen::MatrixXd m = d.asDiagonal();
    total += m.squaredNorm();
    mats.push_back(m);
  }
  const JdResult res = joint_diagonalize(mats);
  const auto [g, cost] = nssjd::optimal_signed_permutation(res.u);
  CHECK(cost < 1e-8);
  CHECK(res.objective == doctest::Approx(total).epsilon(1e-12));
}

TEST_CASE("construct-then-recover oracle, K=20, p=4") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    nssjd::RngStream rng(seed, 77);
    const Eigen::MatrixXd u0 = testsup::random_orthogonal(4, rng);
    const auto mats = diagonalizable_family(4, 20, u0, rng);
    const JdResult res = joint_diagonalize(mats);
    CHECK(res.converged);

    const auto [g, cost] =
        nssjd::optimal_signed_permutation((res.u * u0.transpose()).eval());
    CHECK(cost < 1e-8);

    double total = 0.0, off = 0.0;
    for (const auto& m : mats) {
      total += m.squaredNorm();
      off += nssjd::off_diag_sq((res.u * m * res.u.transpose()).eval());
    }
    CHECK(off < 1e-16 * total);
  }
}

TEST_CASE("conservation and monotonicity across sweeps") {
  nssjd::RngStream rng(23);
  std::vector<Eigen::MatrixXd> mats;
  double total = 0.0;
  for (int i = 0; i < 8; ++i) {
    Eigen::MatrixXd m = testsup::random_gaussian(5, 5, rng);
    m = (0.5 * (m + m.transpose())).eval();
    total += m.squaredNorm();
    mats.push_back(m);
  }
  const JdResult res = joint_diagonalize(mats);
  REQUIRE(res.sweeps >= 1);
  for (int i = 0; i < res.sweeps; ++i) {
    CHECK(res.sweep_objective[i] + res.sweep_offdiag[i] ==
          doctest::Approx(total).epsilon(1e-9));
    if (i > 0) {
      CHECK(res.sweep_objective[i] >=
            res.sweep_objective[i - 1] - 1e-12 * total);
    }
  }
  const int p = 5;
  CHECK((res.u.transpose() * res.u - Eigen::MatrixXd::Identity(p, p)).norm() <=
        1e-11 * p);
  CHECK(res.objective ==
        doctest::Approx(objective_g(res.u, mats)).epsilon(1e-10));
}

TEST_CASE("determinism: identical inputs give bit-identical output") {
  nssjd::RngStream rng(24);
  std::vector<Eigen::MatrixXd> mats;
  for (int i = 0; i < 6; ++i) {
    Eigen::MatrixXd m = testsup::random_gaussian(4, 4, rng);
    mats.push_back(0.5 * (m + m.transpose()));
  }
  const JdResult a = joint_diagonalize(mats);
  const JdResult b = joint_diagonalize(mats);
  CHECK((a.u - b.u).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.objective == b.objective);
  CHECK(a.sweeps == b.sweeps);
}

TEST_CASE("max_sweeps exhaustion reports converged=false") {
  nssjd::RngStream rng(25);
  std::vector<Eigen::MatrixXd> mats;
  for (int i = 0; i < 6; ++i) {
    Eigen::MatrixXd m = testsup::random_gaussian(4, 4, rng);
    mats.push_back(0.5 * (m + m.transpose()));
  }
  JdOptions opts;
  opts.max_sweeps = 1;
  const JdResult res = joint_diagonalize(mats, opts);
  CHECK_FALSE(res.converged);
  CHECK(res.sweeps == 1);
}

TEST_CASE("input validation") {
  CHECK_THROWS_AS(joint_diagonalize({}), std::invalid_argument);
  Eigen::MatrixXd bad(2, 2);
  bad << 1, 0.5, 0.1, 1;
  CHECK_THROWS_AS(joint_diagonalize({bad}), std::invalid_argument);
  std::vector<Eigen::MatrixXd> mismatched{Eigen::MatrixXd::Identity(2, 2),
                                          Eigen::MatrixXd::Identity(3, 3)};
  CHECK_THROWS_AS(joint_diagonalize(mismatched), std::invalid_argument);
}

TEST_CASE("row canonicalization makes each row's largest entry positive") {
  nssjd::RngStream rng(26);
  const Eigen::MatrixXd u0 = testsup::random_orthogonal(3, rng);
  const auto mats = diagonalizable_family(3, 10, u0, rng);
  const JdResult res = joint_diagonalize(mats);
  for (int i = 0; i < 3; ++i) {
    int j = 0;
    res.u.row(i).cwiseAbs().maxCoeff(&j);
    CHECK(res.u(i, j) > 0);
  }
}
