#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "unmix/metrics.hpp"
#include "unmix/random.hpp"

using namespace unmix;
using metrics::aad;
using metrics::mse;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(Eigen::Index(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST(Aad, Examples) {
  EXPECT_EQ(aad(vec({0.3, 0.7}), vec({0.3, 0.7})), 0.0);
  EXPECT_DOUBLE_EQ(aad(vec({1, 0}), vec({0, 1})), std::numbers::pi / 2);
  EXPECT_NEAR(aad(vec({1, 1}) / std::sqrt(2.0), vec({1, 0})), std::numbers::pi / 4, 1e-15);
}

TEST(Aad, ZeroVectorFallsBack) {
  EXPECT_EQ(aad(vec({0, 0}), vec({1, 2})), std::numbers::pi / 2);
  EXPECT_EQ(aad(vec({1, 2}), vec({0, 0})), std::numbers::pi / 2);
  EXPECT_TRUE(metrics::aad_degenerate(vec({0, 0}), vec({1, 2})));
}

TEST(Aad, ClampsRoundingAboveOne) {
  // Nearly parallel vectors whose cosine rounds past 1.
  const Vector a = vec({0.1, 0.2, 0.3}), b = 3.0 * a;
  const double v = aad(a, b);
  EXPECT_FALSE(std::isnan(v));
  EXPECT_LE(v, 1e-7);
  EXPECT_FALSE(std::isnan(aad(a, -a)));
  EXPECT_NEAR(aad(a, -a), std::numbers::pi, 1e-7);
}

TEST(Aad, LengthMismatch) { EXPECT_THROW(aad(vec({1}), vec({1, 2})), InvalidInput); }

TEST(Mse, Examples) {
  EXPECT_EQ(mse(vec({0.2, 0.4}), vec({0.2, 0.4})), 0.0);
  EXPECT_EQ(mse(vec({0, 0}), vec({1, 1})), 1.0);
  EXPECT_THROW(mse(vec({1}), vec({1, 2})), InvalidInput);
  EXPECT_THROW(mse(Vector(0), Vector(0)), InvalidInput);
}

TEST(Mse, ReorderedSummation) {
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    const Eigen::Index n = 1 + Eigen::Index(rng.below(300));
    Vector a(n), b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      a[i] = rng.normal();
      b[i] = rng.normal();
    }
    // Backwards, pairwise-compensated.
    long double s = 0.0L;
    for (Eigen::Index i = n - 1; i >= 0; --i) {
      const long double d = static_cast<long double>(a[i]) - b[i];
      s += d * d;
    }
    const double ref = static_cast<double>(s / n);
    EXPECT_NEAR(mse(a, b), ref, 1e-12 * ref);
  }
}

TEST(EvaluateScene, IdenticalMapsScoreZero) {
  AbundanceMap m(3, 3, 4);
  Rng rng(2);
  for (double& v : m.data()) v = rng.uniform();
  const auto r = metrics::evaluate_scene(m, m);
  // arccos near 1 turns a last-bit cosine error into ~1e-8 rad.
  EXPECT_LE(r.mean_aad, 1e-7);
  EXPECT_EQ(r.mean_mse, 0.0);
  EXPECT_EQ(r.pixels_failed, 0u);
}

TEST(EvaluateScene, SinglePixelReducesToScalars) {
  AbundanceMap t(1, 1, 3, {0.2, 0.3, 0.5}), e(1, 1, 3, {0.1, 0.5, 0.4});
  const auto r = metrics::evaluate_scene(t, e);
  EXPECT_EQ(r.mean_aad, aad(t.pixel(0), e.pixel(0)));
  EXPECT_EQ(r.mean_mse, mse(t.pixel(0), e.pixel(0)));
}

TEST(EvaluateScene, MeansAreArithmeticAndPermutationInvariant) {
  Rng rng(3);
  AbundanceMap t(4, 5, 3), e(4, 5, 3);
  for (double& v : t.data()) v = rng.uniform();
  for (double& v : e.data()) v = rng.uniform();
  const auto r = metrics::evaluate_scene(t, e);
  double sa = 0, sm = 0;
  for (std::size_t p = 0; p < 20; ++p) {
    sa += r.per_pixel_aad[p];
    sm += r.per_pixel_mse[p];
    EXPECT_GE(r.per_pixel_aad[p], 0.0);
    EXPECT_LE(r.per_pixel_aad[p], std::numbers::pi);
  }
  EXPECT_NEAR(r.mean_aad, sa / 20, 1e-15);
  EXPECT_NEAR(r.mean_mse, sm / 20, 1e-15);

  // Reverse pixel order in both maps.
  AbundanceMap t2(4, 5, 3), e2(4, 5, 3);
  for (std::size_t p = 0; p < 20; ++p) {
    t2.pixel(19 - p) = t.pixel(p);
    e2.pixel(19 - p) = e.pixel(p);
  }
  const auto r2 = metrics::evaluate_scene(t2, e2);
  EXPECT_NEAR(r2.mean_aad, r.mean_aad, 1e-14);
  EXPECT_NEAR(r2.mean_mse, r.mean_mse, 1e-16);
}

TEST(EvaluateScene, FailedPixelsExcluded) {
  AbundanceMap t(1, 2, 2, {0.5, 0.5, 0.2, 0.8}), e(1, 2, 2, {0.5, 0.5, NAN, NAN});
  const auto r = metrics::evaluate_scene(t, e);
  EXPECT_EQ(r.pixels_failed, 1u);
  EXPECT_EQ(r.mean_mse, 0.0);
  EXPECT_TRUE(std::isnan(r.per_pixel_aad[1]));
}

TEST(EvaluateScene, ReconstructionMse) {
  Matrix A(3, 2);
  A << 1, 0, 0, 1, 1, 1;
  const EndmemberMatrix E(A);
  AbundanceMap t(1, 1, 2, {0.4, 0.6}), e(1, 1, 2, {0.5, 0.5});
  HyperspectralCube y(1, 1, 3, {0.4, 0.6, 1.0});
  const auto r = metrics::evaluate_scene(t, e, {}, &y, &E);
  ASSERT_TRUE(r.mean_mse_reconstruction);
  EXPECT_NEAR(*r.mean_mse_reconstruction, (0.01 + 0.01 + 0.0) / 3, 1e-16);
}

TEST(EvaluateScene, ShapeMismatch) {
  EXPECT_THROW(metrics::evaluate_scene(AbundanceMap(2, 2, 3), AbundanceMap(2, 2, 4)), InvalidInput);
}

TEST(ReportCsv, ColumnOrder) {
  metrics::MetricReport r;
  r.metadata = {"pcsbl-known", 0.5, 25.0, 3};
  r.mean_mse = 0.25;
  r.mean_aad = std::numbers::pi;
  r.pixels_failed = 2;
  EXPECT_EQ(std::string(metrics::kReportCsvHeader),
            "method,snr_db,beta,seed,mean_mse_abundance,mean_mse_reconstruction,"
            "mean_aad_rad,mean_aad_deg,pixels_failed");
  EXPECT_EQ(metrics::report_csv_row(r), "pcsbl-known,25,0.5,3,0.25,nan,3.141592654,180,2");
}
