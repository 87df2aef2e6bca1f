// Copyright 2026 The qpt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include "test_util.hpp"

#include <numeric>

namespace qpt {
namespace {

using testing::max_abs;
using testing::random_density;
using testing::random_kraus;
using testing::random_state;
using testing::random_unitary;

KrausSet single(const CMatrix& op) { return KrausSet(static_cast<int>(op.rows()), {op}); }

TEST(ChiFromKraus, IdentityAndFlip) {
  const CMatrix id = chi_from_kraus(single(pauli::identity())).matrix;
  CMatrix expect = CMatrix::Zero(4, 4);
  expect(0, 0) = expect(0, 3) = expect(3, 0) = expect(3, 3) = 1.0;
  EXPECT_EQ(id, expect);

  const CMatrix x = chi_from_kraus(single(pauli::x())).matrix;
  expect.setZero();
  expect(1, 1) = expect(1, 2) = expect(2, 1) = expect(2, 2) = 1.0;
  EXPECT_EQ(x, expect);
}

TEST(ChiFromKraus, Depolarizing) {
  const double p = 0.5;
  const KrausSet k(2, {std::sqrt(1 - 3 * p / 4) * pauli::identity(), std::sqrt(p / 4) * pauli::x(),
                       std::sqrt(p / 4) * cplx(0, -1) * pauli::y(), std::sqrt(p / 4) * pauli::z()});
  EXPECT_TRUE(k.trace_preserving());
  const ChiMatrix chi = chi_from_kraus(k);
  EXPECT_NEAR(std::real(chi.matrix.trace()), 2.0, 1e-14);
  EXPECT_EQ(process_rank(chi), 4);
  EXPECT_LT(chi.trace_preservation_residual(), 1e-14);
}

TEST(KrausFromChi, IdentityUpToPhase) {
  const KrausSet k = kraus_from_chi(chi_from_kraus(single(cplx(0, 1) * pauli::identity())));
  ASSERT_EQ(k.size(), 1u);
  EXPECT_LT(max_abs(k.operators[0] - pauli::identity()), 1e-14);
}

TEST(KrausFromChi, RoundTripEachRank) {
  Rng rng(31);
  for (int m = 1; m <= 4; ++m) {
    for (int trial = 0; trial < 10; ++trial) {
      const KrausSet k = random_kraus(rng, 2, m);
      const ChiMatrix chi = chi_from_kraus(k);
      const KrausSet back = kraus_from_chi(chi);
      EXPECT_EQ(static_cast<int>(back.size()), m);
      EXPECT_EQ(process_rank(chi), m);
      EXPECT_LT(max_abs(chi_from_kraus(back).matrix - chi.matrix), 1e-9);
    }
  }
}

TEST(KrausFromChi, DeterministicPhase) {
  Rng rng(6);
  const KrausSet k = random_kraus(rng, 2, 2);
  const KrausSet a = kraus_from_chi(chi_from_kraus(k));
  for (const auto& e : a.operators) {
    Eigen::Index row = 0, col = 0;
    e.cwiseAbs().maxCoeff(&row, &col);
    EXPECT_NEAR(e(row, col).imag(), 0.0, 1e-14);
    EXPECT_GT(e(row, col).real(), 0.0);
  }
}

TEST(ApplyChannel, BasicChannels) {
  Rng rng(2);
  const CMatrix rho = random_density(rng, 2, 2);
  EXPECT_LT(max_abs(apply_channel(single(pauli::identity()), rho) - rho), 1e-15);
  CMatrix h = CMatrix::Zero(2, 2), v = CMatrix::Zero(2, 2);
  h(0, 0) = v(1, 1) = 1.0;
  EXPECT_LT(max_abs(apply_channel(single(pauli::x()), h) - v), 1e-15);
  const CMatrix u = random_unitary(rng, 2);
  EXPECT_LT(max_abs(apply_channel(single(u), rho) - u * rho * u.adjoint()), 1e-12);
  EXPECT_THROW(apply_channel(single(u), CMatrix::Identity(3, 3) / 3.0), error);
}

TEST(ApplyChannel, PreservesTrace) {
  Rng rng(9);
  for (int m = 1; m <= 4; ++m) {
    const KrausSet k = random_kraus(rng, 2, m);
    EXPECT_NEAR(std::real(apply_channel(k, random_density(rng, 2, 2)).trace()), 1.0, 1e-12);
  }
}

TEST(ChoiFromChannel, SimpleChannels) {
  const CVector phi = vectorize(pauli::identity()) / std::sqrt(2.0);
  EXPECT_LT(max_abs(choi_from_channel(single(pauli::identity())).matrix - projector(phi)), 1e-15);
  const CVector phix = vectorize(pauli::x()) / std::sqrt(2.0);
  EXPECT_LT(max_abs(choi_from_channel(single(pauli::x())).matrix - projector(phix)), 1e-15);
}

TEST(ChoiFromChannel, AgreesWithChiConstruction) {
  Rng rng(50);
  for (int trial = 0; trial < 50; ++trial) {
    const KrausSet k = random_kraus(rng, 2, 1 + trial % 4);
    const ChiMatrix choi = choi_from_channel(k);
    EXPECT_EQ(choi.normalization, ChiNormalization::choi);
    EXPECT_LT(max_abs(choi.matrix * 2.0 - chi_from_kraus(k).matrix), 1e-12);
  }
}

TEST(Probability, IdentityChannel) {
  CVector h(2), v(2);
  h << 1, 0;
  v << 0, 1;
  const KrausSet id = single(pauli::identity());
  EXPECT_NEAR(direct_probability(id, h, h), 1.0, 1e-15);
  EXPECT_NEAR(direct_probability(id, h, v), 0.0, 1e-15);
  EXPECT_NEAR(effective_probability(chi_from_kraus(id), h, h), 1.0, 1e-15);
  EXPECT_NEAR(effective_probability(chi_from_kraus(single(pauli::x())), h, v), 1.0, 1e-15);
  EXPECT_THROW(direct_probability(id, 2.0 * h, h), error);
}

TEST(Probability, EffectiveEqualsDirect) {
  Rng rng(200);
  for (int trial = 0; trial < 200; ++trial) {
    const KrausSet k = random_kraus(rng, 2, 1 + trial % 4);
    const CVector in = random_state(rng, 2), out = random_state(rng, 2);
    const double p = direct_probability(k, in, out);
    double amp = 0.0;
    for (const auto& e : k.operators) amp += std::norm(out.dot(e * in));
    EXPECT_NEAR(p, amp, 1e-12);
    EXPECT_NEAR(effective_probability(chi_from_kraus(k), in, out), p, 1e-12);
    EXPECT_NEAR(effective_probability(choi_from_channel(k), in, out), p, 1e-12);
  }
}

TEST(Basis, Orthonormality) {
  EXPECT_LT(basis_orthonormality_check(pauli_basis(1)), 1e-15);
  EXPECT_LT(basis_orthonormality_check(pauli_basis(2)), 1e-15);
  EXPECT_EQ(pauli_basis(2).size(), 16u);
  EXPECT_NEAR(basis_orthonormality_check({pauli::identity(), pauli::x(), pauli::y(), pauli::z()}), 1.0, 1e-15);
  // The Y element is real.
  EXPECT_LT(pauli_basis(1)[2].imag().cwiseAbs().maxCoeff(), 1e-16);
}

TEST(Basis, IdentityChannelInPauliBasis) {
  const ChiMatrix chi = chi_from_kraus(single(pauli::identity()));
  const ChiMatrix p = chi_change_basis(chi, BasisDirection::natural_to_pauli);
  CMatrix expect = CMatrix::Zero(4, 4);
  expect(0, 0) = 2.0;
  EXPECT_LT(max_abs(p.matrix - expect), 1e-14);
}

TEST(Basis, RoundTripAndSpectrum) {
  Rng rng(12);
  const ChiMatrix chi = chi_from_kraus(random_kraus(rng, 2, 3));
  const ChiMatrix p = chi_change_basis(chi, BasisDirection::natural_to_pauli);
  const ChiMatrix back = chi_change_basis(p, BasisDirection::pauli_to_natural);
  EXPECT_LT(max_abs(back.matrix - chi.matrix), 1e-12);
  EXPECT_NEAR(std::abs(p.matrix.trace() - chi.matrix.trace()), 0.0, 1e-12);
  EXPECT_LT((hermitian_eig(p.matrix).values - hermitian_eig(chi.matrix).values).cwiseAbs().maxCoeff(), 1e-12);
  const ChiMatrix three(3, CMatrix::Identity(9, 9) / 3.0, ChiNormalization::chi);
  EXPECT_THROW(chi_change_basis(three, BasisDirection::natural_to_pauli), error);
}

TEST(UnitaryMix, LeavesChiInvariant) {
  Rng rng(17);
  for (int m = 1; m <= 4; ++m) {
    const CMatrix e = kraus_matrix(random_kraus(rng, 2, m));
    const CMatrix u = random_unitary(rng, m);
    const CMatrix mixed = unitary_mix(e, u);
    EXPECT_LT(max_abs(mixed * mixed.adjoint() - e * e.adjoint()), 1e-12);
  }
  const CMatrix e = kraus_matrix(random_kraus(rng, 2, 2));
  EXPECT_EQ(unitary_mix(e, CMatrix::Identity(2, 2)), e);
  CMatrix swap = CMatrix::Zero(2, 2);
  swap(0, 1) = swap(1, 0) = 1.0;
  const CMatrix swapped = unitary_mix(e, swap);
  EXPECT_EQ(swapped.col(0), e.col(1));
  EXPECT_EQ(swapped.col(1), e.col(0));
  EXPECT_THROW(unitary_mix(e, 2.0 * CMatrix::Identity(2, 2)), error);
}

TEST(TracePreservation, OutputPartialTraceIsIdentity) {
  Rng rng(40);
  for (int m = 1; m <= 4; ++m) {
    const KrausSet k = random_kraus(rng, 2, m);
    const double tol = std::max(10.0 * k.completeness_residual(), 1e-14);
    EXPECT_LT(chi_from_kraus(k).trace_preservation_residual(), tol);
  }
  const KrausSet lossy(2, {0.5 * pauli::identity()});
  EXPECT_FALSE(lossy.trace_preserving());
  EXPECT_NEAR(chi_from_kraus(lossy).trace_preservation_residual(), 0.75, 1e-15);
}

TEST(ParameterCount, Formula) {
  // Full rank: 2s^2 r - r^2 - s^2 collapses to s^4 - s^2.
  EXPECT_EQ(parameter_count(2, 4), 12);
  EXPECT_EQ(parameter_count(3, 9), 72);
  EXPECT_EQ(parameter_count(2, 2), 8);
  EXPECT_EQ(parameter_count(2, 1), 3);
  EXPECT_THROW(parameter_count(2, 0), error);
  EXPECT_THROW(parameter_count(2, 5), error);
}

TEST(ChiMatrix, Normalizations) {
  const ChiMatrix chi = chi_from_kraus(single(pauli::identity()));
  EXPECT_NEAR(std::real(chi.as_choi().matrix.trace()), 1.0, 1e-15);
  EXPECT_EQ(chi.as_choi().as_chi().matrix, chi.matrix);
  EXPECT_THROW(ChiMatrix(2, CMatrix::Identity(3, 3), ChiNormalization::chi), error);
}

}  // namespace
}  // namespace qpt
