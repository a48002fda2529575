#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fvk/microkernels.hpp"
#include "test_support.hpp"

namespace fvk {
namespace {

const EulerParameters air{1.4};

template <int Dim>
struct Fixture {
  BatchShape shape;
  BatchStorage batch;
  ScratchStorage scratchStorage;
  ScratchArrays scratch;
  TimeStepContext ctx;

  Fixture(int p, int patches, Layout layout, const testing::DenseField& dense, double dt = 0.01, double h = 0.1)
      : shape{Dim, p, patches},
        batch(shape, layout),
        scratchStorage(shape, layout),
        scratch(scratchStorage.arrays()),
        ctx{dt, h, air, Check::Verify} {
    testing::loadDenseInput<Dim>(dense, batch.input(), layout);
  }

  void run(StepKind kind) {
    const auto in = batch.view().template inputField<Dim>();
    const auto out = batch.view().template outputField<Dim>();
    const ScratchFields<Dim> fields(scratch);
    const auto range = iterationRange(kind, shape);
    for (int patch = 0; patch < shape.patches; ++patch) {
      forEachCell<Dim>(range, [&](const Cell<Dim>& c) { runMicrokernel<Dim>(kind, in, out, fields, patch, c, ctx); });
    }
  }

  void runAll() {
    for (const auto& step : stepSequence(shape, false)) run(step.kind);
  }
};

TEST(CopyMicrokernel, OutputEqualsInteriorAndNeverHalo) {
  constexpr double sentinel = 12345.0;
  auto dense = testing::randomDenseField<2>(4, 2, 1);
  for (int patch = 0; patch < 2; ++patch) {
    for (int i = -1; i <= 4; ++i) {
      for (int k = 0; k < 4; ++k) {
        dense.values[dense.at(patch, {-1, i, 0}, k)] = sentinel;
        dense.values[dense.at(patch, {4, i, 0}, k)] = sentinel;
        dense.values[dense.at(patch, {i, -1, 0}, k)] = sentinel;
        dense.values[dense.at(patch, {i, 4, 0}, k)] = sentinel;
      }
    }
  }
  for (Layout layout : allLayouts) {
    Fixture<2> f(4, 2, layout, dense);
    f.run(StepKind::copy());
    const auto out = testing::canonicalOutput<2>(f.batch.output(), f.shape, layout);
    EXPECT_EQ(std::count(out.begin(), out.end(), sentinel), 0);
    const Enumerator<2> canon(Layout::AoS, f.shape, false);
    for (int patch = 0; patch < 2; ++patch)
      forEachCell<2>(iterationRange(StepKind::copy(), f.shape), [&](const Cell<2>& c) {
        for (int k = 0; k < 4; ++k) ASSERT_EQ(out[canon(patch, c, k)], dense.values[dense.at(patch, {c[0], c[1], 0}, k)]);
      });
  }
}

TEST(CopyMicrokernel, SoAOffsets) {
  const auto dense = testing::randomDenseField<3>(4, 2, 2);
  Fixture<3> f(4, 2, Layout::SoA, dense);
  f.run(StepKind::copy());
  const Enumerator<3> soa(Layout::SoA, f.shape, false);
  for (int patch = 0; patch < 2; ++patch)
    forEachCell<3>(iterationRange(StepKind::copy(), f.shape), [&](const Cell<3>& c) {
      for (int k = 0; k < 5; ++k) {
        const std::size_t off = k * 2 * 64 + patch * 64 + soa.linearCell(c);
        ASSERT_EQ(f.batch.output()[off], dense.values[dense.at(patch, {c[0], c[1], c[2]}, k)]);
      }
    });
}

TEST(FluxMicrokernel, ConstantRestStateHasPressureOnly) {
  const ConservedState<2> rest{1.0, 0.0, 0.0, 2.5};
  const auto dense = testing::constantDenseField<2>(4, 1, rest);
  Fixture<2> f(4, 1, Layout::AoS, dense);
  f.run(StepKind::flux(0));
  f.run(StepKind::flux(1));
  const ScratchFields<2> fields(f.scratch);
  const double p = pressure<2>(rest, air);
  for (int axis = 0; axis < 2; ++axis) {
    forEachCell<2>(iterationRange(StepKind::flux(axis), f.shape), [&](const Cell<2>& c) {
      ASSERT_EQ(fields.flux[axis](0, c, 1 + axis), p);
      ASSERT_EQ(fields.flux[axis](0, c, 0), 0.0);
    });
  }
}

TEST(FluxMicrokernel, SpotChecksIncludingHalo) {
  const auto dense = testing::randomDenseField<3>(6, 2, 3);
  for (Layout layout : allLayouts) {
    Fixture<3> f(6, 2, layout, dense);
    for (int n = 0; n < 3; ++n) f.run(StepKind::flux(n));
    const ScratchFields<3> fields(f.scratch);
    const auto in = f.batch.view().inputField<3>();
    for (int axis = 0; axis < 3; ++axis) {
      for (const Cell<3>& c : {Cell<3>{0, 0, 0}, Cell<3>{3, 2, 5}}) {
        Cell<3> low = c, high = c;
        low[axis] = -1;
        high[axis] = 6;
        for (const auto& cell : {c, low, high}) {
          const auto expected = flux<3>(loadState<3>(in, 1, cell), axis, air);
          for (int k = 0; k < 5; ++k) ASSERT_EQ(fields.flux[axis](1, cell, k), expected[k]);
        }
      }
    }
  }
}

TEST(EigenvalueMicrokernel, ConstantSpotCheckAndNonNegative) {
  const ConservedState<2> q{1.0, 1.0, 0.0, 2.5};
  Fixture<2> constant(4, 1, Layout::AoS, testing::constantDenseField<2>(4, 1, q));
  constant.run(StepKind::eigenvalue(0));
  const ScratchFields<2> cf(constant.scratch);
  forEachCell<2>(iterationRange(StepKind::eigenvalue(0), constant.shape),
                 [&](const Cell<2>& c) { ASSERT_EQ(cf.lambda[0](0, c, 0), maxEigenvalue<2>(q, 0, air)); });

  const auto dense = testing::randomDenseField<2>(8, 3, 4);
  Fixture<2> f(8, 3, Layout::AoSoA, dense);
  f.run(StepKind::eigenvalue(0));
  f.run(StepKind::eigenvalue(1));
  const ScratchFields<2> fields(f.scratch);
  const auto in = f.batch.view().inputField<2>();
  for (int axis = 0; axis < 2; ++axis)
    for (int patch = 0; patch < 3; ++patch)
      forEachCell<2>(iterationRange(StepKind::eigenvalue(axis), f.shape), [&](const Cell<2>& c) {
        const double v = fields.lambda[axis](patch, c, 0);
        ASSERT_GE(v, 0.0);
        ASSERT_EQ(v, maxEigenvalue<2>(loadState<2>(in, patch, c), axis, air));
      });
}

TEST(AccumulateMicrokernel, ConstantStateContributesExactlyZero) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto q = testing::randomAdmissibleState<3>(rng);
    Fixture<3> f(4, 2, Layout::SoA, testing::constantDenseField<3>(4, 2, q));
    f.runAll();
    const auto out = f.batch.view().outputField<3>();
    for (int patch = 0; patch < 2; ++patch)
      forEachCell<3>(iterationRange(StepKind::copy(), f.shape), [&](const Cell<3>& c) {
        for (int k = 0; k < 5; ++k) ASSERT_TRUE(testing::bitwiseEqual(out(patch, c, k), q[k]));
      });
  }
}

TEST(AccumulateMicrokernel, ZeroJumpFaceFluxIsPhysicalFlux) {
  // constant state along x in the left two columns: the left face of cell 0
  // carries exactly F_x(Q), so the update equals dt/h * (F(Q) - F_right)
  const ConservedState<2> q{1.0, 0.3, -0.2, 2.5};
  auto dense = testing::constantDenseField<2>(4, 1, q);
  const ConservedState<2> other{1.5, 0.1, 0.0, 3.0};
  for (int y = -1; y <= 4; ++y)
    for (int x = 1; x <= 4; ++x)
      for (int k = 0; k < 4; ++k) dense.values[dense.at(0, {x, y, 0}, k)] = other[k];

  Fixture<2> f(4, 1, Layout::AoS, dense, 0.02, 0.1);
  f.run(StepKind::copy());
  f.run(StepKind::flux(0));
  f.run(StepKind::eigenvalue(0));
  f.run(StepKind::accumulate(0));

  const auto fq = flux<2>(q, 0, air);
  const auto fo = flux<2>(other, 0, air);
  const double s = std::max(maxEigenvalue<2>(q, 0, air), maxEigenvalue<2>(other, 0, air));
  const auto out = f.batch.view().outputField<2>();
  for (int k = 0; k < 4; ++k) {
    const double faceLeft = 0.5 * (fq[k] + fq[k]) - 0.5 * maxEigenvalue<2>(q, 0, air) * (q[k] - q[k]);
    ASSERT_EQ(faceLeft, fq[k]);
    const double faceRight = 0.5 * (fq[k] + fo[k]) - 0.5 * s * (other[k] - q[k]);
    EXPECT_EQ(out(0, {0, 1}, k), q[k] + (0.02 / 0.1) * (faceLeft - faceRight));
  }
}

TEST(AccumulateMicrokernel, MatchesDenseReferenceToZeroUlp) {
  const auto dense = testing::randomDenseField<2>(4, 1, 42);
  const auto reference = testing::denseReference<2>(dense, 0.01, 0.1, air);
  Fixture<2> f(4, 1, Layout::AoS, dense, 0.01, 0.1);
  f.runAll();
  EXPECT_TRUE(testing::bitwiseEqual(f.batch.output(), reference.output));
}

template <int Dim>
void checkTelescoping(std::uint64_t seed) {
  constexpr int p = 8;
  constexpr int patches = 4;
  const double dt = 0.01, h = 0.1;
  const auto dense = testing::randomDenseField<Dim>(p, patches, seed);
  const BatchShape shape{Dim, p, patches};

  for (int axis = 0; axis < Dim; ++axis) {
    Fixture<Dim> f(p, patches, Layout::AoS, dense, dt, h);
    f.run(StepKind::copy());
    f.run(StepKind::flux(axis));
    f.run(StepKind::eigenvalue(axis));
    f.run(StepKind::accumulate(axis));
    const auto in = f.batch.view().template inputField<Dim>();
    const auto out = f.batch.view().template outputField<Dim>();

    for (int k = 0; k < Dim + 2; ++k) {
      double interiorSum = 0.0, magnitude = 0.0;
      double boundary = 0.0;
      for (int patch = 0; patch < patches; ++patch) {
        forEachCell<Dim>(iterationRange(StepKind::copy(), shape), [&](const Cell<Dim>& c) {
          interiorSum += out(patch, c, k) - in(patch, c, k);
          // boundary faces: the -side face of the first cell, the +side face of the last
          const auto face = [&](Cell<Dim> lo) {
            Cell<Dim> hi = lo;
            ++hi[axis];
            const auto qL = loadState<Dim>(in, patch, lo);
            const auto qR = loadState<Dim>(in, patch, hi);
            const double s = std::max(maxEigenvalue<Dim>(qL, axis, air), maxEigenvalue<Dim>(qR, axis, air));
            return 0.5 * (flux<Dim>(qL, axis, air)[k] + flux<Dim>(qR, axis, air)[k]) - 0.5 * s * (qR[k] - qL[k]);
          };
          if (c[axis] == 0) {
            Cell<Dim> lo = c;
            --lo[axis];
            const double v = face(lo);
            boundary += v;
            magnitude += std::abs(v);
          }
          if (c[axis] == p - 1) {
            const double v = face(c);
            boundary -= v;
            magnitude += std::abs(v);
          }
        });
      }
      const double expected = dt / h * boundary;
      EXPECT_NEAR(interiorSum, expected, 1e-12 * (dt / h) * magnitude) << "axis " << axis << " unknown " << k;
    }
  }
}

TEST(AccumulateMicrokernel, ConservationTelescoping) {
  checkTelescoping<2>(100);
  checkTelescoping<3>(101);
}

TEST(ReduceMicrokernel, ConstantAndBruteForce) {
  const ConservedState<2> q{1.0, 1.0, 0.0, 2.5};
  Fixture<2> constant(4, 1, Layout::AoS, testing::constantDenseField<2>(4, 1, q));
  constant.runAll();
  const auto cout = constant.batch.view().outputField<2>();
  forEachCell<2>(iterationRange(StepKind::reduce(), constant.shape), [&](const Cell<2>& c) {
    ASSERT_EQ(reduceMicrokernelValue<2>(cout, 0, c, constant.ctx), maxEigenvalue<2>(q, 0, air));
  });

  const auto dense = testing::randomDenseField<3>(4, 2, 9);
  Fixture<3> f(4, 2, Layout::AoSoA, dense, 0.01, 0.1);
  f.runAll();
  const auto out = f.batch.view().outputField<3>();
  double best = 0.0;
  for (int patch = 0; patch < 2; ++patch)
    forEachCell<3>(iterationRange(StepKind::reduce(), f.shape), [&](const Cell<3>& c) {
      best = std::max(best, reduceMicrokernelValue<3>(out, patch, c, f.ctx));
    });
  const auto reference = testing::denseReference<3>(dense, 0.01, 0.1, air);
  EXPECT_EQ(best, reference.maxEigenvalue);
}

TEST(ScratchArrays, Sizes) {
  const BatchShape shape{3, 4, 5};
  ScratchStorage storage(shape, Layout::SoA);
  const auto s = storage.arrays();
  ASSERT_EQ(s.flux.size(), 3u);
  ASSERT_EQ(s.lambda.size(), 3u);
  EXPECT_EQ(s.flux[0].size(), 5u * 5u * 216u);
  EXPECT_EQ(s.lambda[2].size(), 5u * 216u);
}

TEST(TimeStepContext, Validation) {
  EXPECT_THROW((TimeStepContext{0.0, 1.0, air, Check::None}.validate()), std::invalid_argument);
  EXPECT_THROW((TimeStepContext{1.0, -1.0, air, Check::None}.validate()), std::invalid_argument);
}

}  // namespace
}  // namespace fvk
