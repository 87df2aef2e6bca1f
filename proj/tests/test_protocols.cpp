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

namespace qpt {
namespace {

using testing::max_abs;
using testing::random_kraus;

void expect_bloch(const CVector& psi, double x, double y, double z) {
  const Eigen::Vector3d a = bloch_vector(psi);
  EXPECT_NEAR(a.x(), x, 1e-12);
  EXPECT_NEAR(a.y(), y, 1e-12);
  EXPECT_NEAR(a.z(), z, 1e-12);
}

TEST(StateSets, J4) {
  const auto s = j4_states();
  for (const auto& v : s) EXPECT_NEAR(v.norm(), 1.0, 1e-15);
  EXPECT_EQ(s[0].dot(s[1]), cplx(0.0));
  expect_bloch(s[0], 0, 0, 1);
  expect_bloch(s[1], 0, 0, -1);
  expect_bloch(s[2], -1, 0, 0);
  expect_bloch(s[3], 0, -1, 0);
  EXPECT_TRUE(tomographically_complete(s));
}

TEST(StateSets, R4Tetrahedron) {
  const auto s = r4_states();
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  for (int j = 0; j < 4; ++j) {
    sum += bloch_vector(s[j]);
    for (int k = 0; k < 4; ++k) {
      const double dot = bloch_vector(s[j]).dot(bloch_vector(s[k]));
      EXPECT_NEAR(dot, j == k ? 1.0 : -1.0 / 3.0, 1e-12);
      if (j != k) EXPECT_NEAR(std::norm(s[j].dot(s[k])), 1.0 / 3.0, 1e-12);
    }
  }
  EXPECT_LT(sum.norm(), 1e-12);
  expect_bloch(s[0], 1 / std::sqrt(3.0), 1 / std::sqrt(3.0), 1 / std::sqrt(3.0));
}

TEST(StateSets, BlochRoundTrip) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const CVector psi = testing::random_state(rng, 2);
    const CVector back = state_from_bloch(bloch_vector(psi));
    EXPECT_NEAR(std::norm(back.dot(psi)), 1.0, 1e-12);
  }
}

TEST(StateSets, B4) {
  const auto s = b4_states(1.1509);
  for (const auto& v : s) EXPECT_NEAR(v.norm(), 1.0, 1e-14);
  EXPECT_NEAR(std::norm(s[0](1)), 1.0, 1e-14);
  EXPECT_TRUE(tomographically_complete(s));
}

TEST(StateSets, DegenerateSetIsIncomplete) {
  const QubitStates s{qubit(1, 0), qubit(0, 1), qubit(1, 0), qubit(0, 1)};
  EXPECT_FALSE(tomographically_complete(s));
  EXPECT_THROW(auxiliary_rows(s, 1.0, 10.0), error);
}

TEST(BNProtocol, B36Rows) {
  const auto p = bn_state_protocol(36, 312.7, 1.0);
  EXPECT_EQ(p.label, "B36");
  ASSERT_EQ(p.rows.size(), 36u);
  CMatrix avg = CMatrix::Zero(2, 2);
  std::vector<CMatrix> ops;
  for (const auto& r : p.rows) {
    EXPECT_EQ(numerical_rank(r.op, 1e-10), 1);
    EXPECT_NEAR(std::real(r.op.trace()), 1.0, 1e-12);
    EXPECT_EQ(r.exposure, 1.0);
    avg += r.op / 36.0;
    ops.push_back(r.op);
  }
  EXPECT_NEAR(std::real(avg.trace()), 1.0, 1e-12);
  EXPECT_EQ(hermitian_span_rank(ops), 4);
}

TEST(BNProtocol, RowOperatorDefinition) {
  const auto p = bn_state_protocol(8, 312.7, 1.0);
  const CMatrix v = projector(qubit(0, 1));
  for (int j = 0; j < 8; ++j) {
    const CMatrix u = plate_unitary({312.7, j * kPi / 8}, 1.0);
    EXPECT_LT(max_abs(p.rows[j].op - u.adjoint() * v * u), 1e-14);
  }
}

TEST(BNProtocol, RejectsDegenerate) {
  EXPECT_THROW(bn_state_protocol(3, 312.7, 1.0), error);
  EXPECT_THROW(bn_state_protocol(36, 0.0, 1.0), error);
  // Thickness giving a retardance of exactly -4π: the plate is the identity up to sign.
  const auto n = quartz_indices(1.0);
  const double h = 4.0 / (n.n_e - n.n_o);
  EXPECT_NEAR(retardance({h, 0.0}, 1.0), -4 * kPi, 1e-9);
  EXPECT_THROW(bn_state_protocol(36, h, 1.0), error);
}

TEST(ProcessProtocol, Rows) {
  for (auto name : {ProcessProtocolName::J4, ProcessProtocolName::R4, ProcessProtocolName::B4}) {
    const auto p = process_protocol(name);
    ASSERT_EQ(p.rows.size(), 16u);
    std::vector<CMatrix> ops;
    for (const auto& r : p.rows) {
      EXPECT_LT(hermiticity_residual(r.op), 1e-12);
      EXPECT_EQ(numerical_rank(r.op, 1e-10), 1);
      EXPECT_NEAR(std::real(r.op.trace()), 1.0, 1e-12);
      EXPECT_FALSE(r.auxiliary);
      EXPECT_FALSE(r.count.has_value());
      ops.push_back(r.op);
    }
    // Linearly independent as Hermitian 16-vectors.
    EXPECT_EQ(hermitian_span_rank(ops), 16) << to_string(name);
  }
  EXPECT_EQ(parse_process_protocol("R4"), ProcessProtocolName::R4);
  EXPECT_THROW(parse_process_protocol("X9"), error);
}

TEST(ProcessProtocol, InputIsConjugated) {
  const auto p = process_protocol(ProcessProtocolName::J4);
  // |L> = (H - iV)/√2 enters as its conjugate.
  const CVector l = p.inputs[3];
  const CMatrix expect = kron(projector(CVector(l.conjugate())), projector(p.projectors[0]));
  EXPECT_LT(max_abs(p.rows[12].op - expect), 1e-15);
}

TEST(ProcessProtocol, IdentityProcessJ4Rates) {
  const auto p = process_protocol(ProcessProtocolName::J4);
  const ChiMatrix id = chi_from_kraus(KrausSet(2, {pauli::identity()}));
  for (int i = 0; i < 4; ++i) {
    for (int m = 0; m < 4; ++m) {
      const double rate = expected_rate(p.rows[i * 4 + m], id.as_choi().matrix);
      const double prob = std::norm(p.projectors[m].dot(p.inputs[i]));
      EXPECT_NEAR(rate * 2.0, prob, 1e-14);
    }
  }
  EXPECT_NEAR(expected_rate(p.rows[0], id.as_choi().matrix), 0.5, 1e-15);
  EXPECT_NEAR(expected_rate(p.rows[0], id.matrix), 1.0, 1e-15);
  EXPECT_NEAR(expected_rate(p.rows[1], id.matrix), 0.0, 1e-15);
}

TEST(ProcessProtocol, RatesMatchDirectProbability) {
  Rng rng(9);
  for (auto name : {ProcessProtocolName::J4, ProcessProtocolName::R4, ProcessProtocolName::B4}) {
    const auto p = process_protocol(name);
    const KrausSet k = random_kraus(rng, 2, 3);
    const ChiMatrix chi = chi_from_kraus(k);
    for (int i = 0; i < 4; ++i) {
      for (int m = 0; m < 4; ++m) {
        EXPECT_NEAR(expected_rate(p.rows[i * 4 + m], chi.matrix), direct_probability(k, p.inputs[i], p.projectors[m]), 1e-12);
      }
    }
  }
}

TEST(AuxiliaryRows, Arithmetic) {
  const auto rows = auxiliary_rows(r4_states(), 1000.0, 10.0);
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& r : rows) {
    EXPECT_TRUE(r.auxiliary);
    EXPECT_EQ(r.exposure, 10000.0);
    ASSERT_TRUE(r.count.has_value());
    EXPECT_EQ(*r.count, 5000);
    EXPECT_NEAR(std::real(r.op.trace()), 2.0, 1e-14);
    EXPECT_GE(hermitian_eig(r.op).values(3), -1e-14);
  }
  EXPECT_THROW(auxiliary_rows(r4_states(), 0.0, 10.0), error);
}

TEST(AuxiliaryRows, RateIsHalfForTracePreserving) {
  Rng rng(10);
  const auto rows = auxiliary_rows(j4_states(), 1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const ChiMatrix choi = chi_from_kraus(random_kraus(rng, 2, 1 + trial % 4)).as_choi();
    for (const auto& r : rows) EXPECT_NEAR(expected_rate(r, choi.matrix), 0.5, 1e-12);
  }
}

TEST(Poisson, ZeroMeanAndErrors) {
  Rng rng(1);
  EXPECT_EQ(poisson(rng, 0.0), 0);
  EXPECT_THROW(poisson(rng, -1.0), error);
  EXPECT_THROW(poisson(rng, std::nan("")), error);
}

TEST(Poisson, Moments) {
  for (double mean : {0.1, 10.0, 1e4}) {
    Rng rng(derive_seed(99, static_cast<std::uint64_t>(mean * 10)));
    const int n = 200000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double k = static_cast<double>(poisson(rng, mean));
      sum += k;
      sq += k * k;
    }
    const double m = sum / n;
    const double var = sq / n - m * m;
    EXPECT_NEAR(m, mean, 4.0 * std::sqrt(mean / n)) << mean;
    // Var of the sample variance is about (2λ² + λ)/n for a Poisson law.
    EXPECT_NEAR(var, mean, 4.0 * std::sqrt((2 * mean * mean + mean) / n)) << mean;
  }
}

TEST(Poisson, Deterministic) {
  Rng a(1234), b(1234);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(poisson(a, 3.7 + i), poisson(b, 3.7 + i));
}

TEST(GenerateCounts, ExposureRescaling) {
  const auto p = process_protocol(ProcessProtocolName::R4);
  auto rows = p.rows;
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].exposure = 1.0 + static_cast<double>(i % 3);
  const ChiMatrix truth = plate_choi_state({5024.0, kPi / 4}, sinc2_profile(1.1509, 0.008, 801));
  const auto out = generate_counts(rows, truth.matrix, {10000, 7, 10.0});
  double total = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_NEAR(out[i].exposure / out[0].exposure, rows[i].exposure / rows[0].exposure, 1e-14);
    total += expected_rate(out[i], truth.matrix) * out[i].exposure;
    ASSERT_TRUE(out[i].count.has_value());
  }
  EXPECT_NEAR(total, 10000.0, 1e-9);
}

TEST(GenerateCounts, DeterministicAndZeroRateRows) {
  const auto p = process_protocol(ProcessProtocolName::J4);
  const ChiMatrix id = chi_from_kraus(KrausSet(2, {pauli::identity()}));
  const auto a = generate_counts(p.rows, id.as_choi().matrix, {10000, 42, 10.0});
  const auto b = generate_counts(p.rows, id.as_choi().matrix, {10000, 42, 10.0});
  const auto c = generate_counts(p.rows, id.as_choi().matrix, {10000, 43, 10.0});
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(*a[i].count, *b[i].count);
    differs = differs || *a[i].count != *c[i].count;
  }
  EXPECT_TRUE(differs);
  EXPECT_EQ(*a[1].count, 0);  // |H> in, |V> out
  EXPECT_THROW(generate_counts(auxiliary_rows(p.inputs, 1.0, 1.0), id.as_choi().matrix, {}), error);
}

TEST(GenerateCounts, MeanMatchesExpectation) {
  const auto p = process_protocol(ProcessProtocolName::R4);
  const ChiMatrix truth = plate_choi_state({5024.0, kPi / 4}, sinc2_profile(1.1509, 0.008, 801));
  const int reps = 10000;
  std::vector<double> sum(16, 0.0);
  std::vector<double> expect(16, 0.0);
  for (int rep = 0; rep < reps; ++rep) {
    const auto rows = generate_counts(p.rows, truth.matrix, {10000, derive_seed(5, rep), 10.0});
    for (int i = 0; i < 16; ++i) {
      sum[i] += static_cast<double>(*rows[i].count);
      if (rep == 0) expect[i] = expected_rate(rows[i], truth.matrix) * rows[i].exposure;
    }
  }
  for (int i = 0; i < 16; ++i) EXPECT_NEAR(sum[i] / reps, expect[i], 3.0 * std::sqrt(expect[i] / reps) + 1e-12) << i;
}

TEST(ProcessDataset, AppendsAuxiliaryRows) {
  const auto p = process_protocol(ProcessProtocolName::R4);
  const ChiMatrix truth = plate_choi_state({5024.0, kPi / 4}, sinc2_profile(1.1509, 0.008, 801));
  const auto rows = process_dataset(p, truth, {10000, 3, 10.0});
  ASSERT_EQ(rows.size(), 20u);
  double total = 0.0;
  for (int i = 0; i < 16; ++i) total += rows[i].exposure;
  for (int i = 16; i < 20; ++i) {
    EXPECT_TRUE(rows[i].auxiliary);
    EXPECT_NEAR(rows[i].exposure, 10.0 * total, 1e-9);
    EXPECT_EQ(*rows[i].count, std::llround(5.0 * total));
  }
}

TEST(StateProtocols, Projective) {
  const auto j = projective_state_protocol(StateProtocolName::J4);
  EXPECT_EQ(j.label, "J4state");
  EXPECT_EQ(j.rows.size(), 4u);
  const auto r = projective_state_protocol(StateProtocolName::R4);
  std::vector<CMatrix> ops;
  for (const auto& row : r.rows) ops.push_back(row.op);
  EXPECT_EQ(hermitian_span_rank(ops), 4);
}

}  // namespace
}  // namespace qpt
