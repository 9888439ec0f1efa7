#include <doctest.h>

#include <numbers>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "veinqa/imgproc.hpp"
#include "veinqa/nss.hpp"
#include "veinqa/random.hpp"
#include "veinqa/synthgen.hpp"

using namespace veinqa;

namespace {

GrayImage pristine(std::uint64_t seed, int w = 128, int h = 128) {
  SynthParams p;
  p.seed = seed;
  p.width = w;
  p.height = h;
  return generate(p).image;
}

double sample_variance(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace

TEST_CASE("mscn of a constant image is zero") {
  const auto m = mscn(GrayImage::constant(16, 12, 0.4));
  for (double v : m.data) CHECK(v == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(m.width == 16);
  CHECK(m.height == 12);
}

TEST_CASE("mscn with C = 0 on a constant image is a degenerate input") {
  CHECK(fixture::error_kind_of([] { mscn(GrayImage::constant(8, 8, 0.4), 7.0 / 6.0, 0.0); }) ==
        ErrorKind::DegenerateInput);
  CHECK(fixture::error_kind_of([] { mscn(GrayImage::constant(8, 8, 0.4), 0.0); }) == ErrorKind::Input);
}

TEST_CASE("mscn is scale invariant in the C -> 0 limit") {
  const auto img = fixture::noise_image(24, 20, 3, 0.0, 0.5);
  Plane doubled = img.plane();
  for (double& v : doubled.data) v *= 2.0;
  const auto a = mscn(img, 7.0 / 6.0, 0.0);
  const auto b = mscn(GrayImage::from_plane(doubled), 7.0 / 6.0, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.data[i] == doctest::Approx(b.data[i]).epsilon(1e-10));
}

TEST_CASE("mscn matches the per-pixel reference on a synthetic image") {
  const auto img = pristine(5, 64, 64);
  const auto fast = mscn(img);
  const auto slow = oracle::mscn(img, 7.0 / 6.0, 3, 1.0 / 255.0);
  CHECK(std::abs(sample_variance(fast.data) - sample_variance(slow)) < 1e-9);
  double worst = 0.0;
  for (std::size_t i = 0; i < slow.size(); ++i) worst = std::max(worst, std::abs(fast.data[i] - slow[i]));
  CHECK(worst < 1e-6);
}

TEST_CASE("paired products of an all-ones map are all ones") {
  const auto p = paired_products(Plane(5, 4, 1.0));
  for (const Plane* m : {&p.horizontal, &p.vertical, &p.main_diagonal, &p.anti_diagonal}) {
    for (double v : m->data) CHECK(v == 1.0);
  }
  CHECK(p.horizontal.width == 4);
  CHECK(p.horizontal.height == 4);
  CHECK(p.vertical.width == 5);
  CHECK(p.vertical.height == 3);
  CHECK(p.main_diagonal.width == 4);
  CHECK(p.anti_diagonal.height == 3);
}

TEST_CASE("paired products of a checkerboard") {
  Plane c(6, 6);
  for (int y = 0; y < 6; ++y) {
    for (int x = 0; x < 6; ++x) c(x, y) = ((x + y) % 2 == 0) ? 1.0 : -1.0;
  }
  const auto p = paired_products(c);
  for (double v : p.horizontal.data) CHECK(v == -1.0);
  for (double v : p.vertical.data) CHECK(v == -1.0);
  for (double v : p.main_diagonal.data) CHECK(v == 1.0);
  for (double v : p.anti_diagonal.data) CHECK(v == 1.0);
}

TEST_CASE("paired products match shift-and-multiply") {
  veinqa::Rng rng(17);
  Plane m(5, 5);
  for (double& v : m.data) v = rng.uniform(-2.0, 2.0);
  const auto p = paired_products(m);
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 5; ++x) {
      if (x + 1 < 5) CHECK(p.horizontal(x, y) == m(x, y) * m(x + 1, y));
      if (y + 1 < 5) CHECK(p.vertical(x, y) == m(x, y) * m(x, y + 1));
      if (x + 1 < 5 && y + 1 < 5) {
        CHECK(p.main_diagonal(x, y) == m(x, y) * m(x + 1, y + 1));
        CHECK(p.anti_diagonal(x, y) == m(x + 1, y) * m(x, y + 1));
      }
    }
  }
  CHECK(fixture::error_kind_of([] { paired_products(Plane(1, 5)); }) == ErrorKind::Dimension);
}

TEST_CASE("generalised Gaussian ratio") {
  CHECK(aggd_shape_ratio(2.0) == doctest::Approx(2.0 / std::numbers::pi).epsilon(1e-12));
  CHECK(aggd_shape_ratio(1.0) == doctest::Approx(0.5).epsilon(1e-12));
  double prev = 0.0;
  for (double nu = 0.05; nu <= 10.0; nu += 0.01) {
    const double r = aggd_shape_ratio(nu);
    CHECK(r > prev);
    prev = r;
  }
}

TEST_CASE("fit_aggd on Gaussian samples") {
  std::mt19937_64 gen(11);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> s(200000);
  for (double& v : s) v = n(gen);
  const auto p = fit_aggd(s);
  CHECK(std::abs(p.nu - 2.0) < 0.1);
  CHECK(p.sigma2_l / p.sigma2_r >= 0.9);
  CHECK(p.sigma2_l / p.sigma2_r <= 1.1);
  CHECK(std::abs(p.mu) < 0.05);
}

TEST_CASE("fit_aggd recovers an asymmetric AGGD") {
  oracle::AggdSampler draw(0.8, 1.0, 4.0, 23);
  std::vector<double> s(1000000);
  for (double& v : s) v = draw();
  const auto p = fit_aggd(s);
  CHECK(p.nu == doctest::Approx(0.8).epsilon(0.1));
  CHECK(p.sigma2_l == doctest::Approx(1.0).epsilon(0.1));
  CHECK(p.sigma2_r == doctest::Approx(4.0).epsilon(0.1));
  CHECK(p.nu >= kAggdShapeMin);
  CHECK(p.nu <= kAggdShapeMax);
  // Mean term of the generating distribution.
  const double scale = std::sqrt(std::tgamma(1.25) / std::tgamma(3.75));
  const double mean = (2.0 - 1.0) * scale * std::tgamma(2.5) / std::tgamma(1.25);
  CHECK(p.mu == doctest::Approx(mean).epsilon(0.1));
}

TEST_CASE("fit_aggd rejects degenerate input") {
  std::vector<double> same(500, 0.3);
  CHECK(fixture::error_kind_of([&] { fit_aggd(same); }) == ErrorKind::DegenerateInput);
  std::vector<double> few(50, 1.0);
  few[0] = -1.0;
  CHECK_THROWS_AS(fit_aggd(few), Error);
}

TEST_CASE("brisque features are deterministic and 32 long") {
  const auto img = pristine(3);
  const auto a = brisque_features(img);
  const auto b = brisque_features(img);
  CHECK(a == b);
  CHECK(a.size() == 32);
  for (double v : a) CHECK(std::isfinite(v));
  CHECK(fixture::error_kind_of([] { brisque_features(fixture::noise_image(40, 80, 1)); }) ==
        ErrorKind::Dimension);
}

TEST_CASE("heavy blur moves the brisque descriptor and raises the shape parameters") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const auto img = pristine(seed);
    const auto blurred = GrayImage::from_plane_clamped(imgproc::gaussian_blur(img.plane(), 3.0));
    const auto a = brisque_features(img);
    const auto b = brisque_features(blurred);
    double dist = 0.0;
    double nu_a = 0.0;
    double nu_b = 0.0;
    for (int i = 0; i < 32; ++i) dist += (a[i] - b[i]) * (a[i] - b[i]);
    for (int o = 0; o < 8; ++o) {
      nu_a += a[4 * o + 1];
      nu_b += b[4 * o + 1];
    }
    CHECK(std::sqrt(dist) > 0.0);
    CHECK(nu_b > nu_a);
  }
}

TEST_CASE("180 degree rotation preserves the per-orientation shapes") {
  const auto img = pristine(8);
  const auto rot = GrayImage::from_plane(imgproc::rotate180(img.plane()));
  const auto a = brisque_features(img);
  const auto b = brisque_features(rot);
  for (int o = 0; o < 8; ++o) CHECK(b[4 * o + 1] == doctest::Approx(a[4 * o + 1]).epsilon(0.05));
}

TEST_CASE("niqe patch selection") {
  const auto img = pristine(4, 128, 96);
  SUBCASE("quantile 0 keeps every full patch") {
    CHECK(niqe_patch_features(img, 32, 0.0).size() == 12);
    CHECK(niqe_patch_features(img, 48, 0.0).size() == 4);
  }
  SUBCASE("constant images have no sharp patch") {
    CHECK(fixture::error_kind_of([] { niqe_patch_features(GrayImage::constant(64, 64, 0.5), 32, 0.5); }) ==
          ErrorKind::EmptySelection);
  }
  SUBCASE("images smaller than a patch") {
    CHECK(fixture::error_kind_of([&] { niqe_patch_features(img, 128, 0.5); }) == ErrorKind::EmptySelection);
  }
  SUBCASE("invalid arguments") {
    CHECK(fixture::error_kind_of([&] { niqe_patch_features(img, 16, 0.5); }) == ErrorKind::Input);
    CHECK(fixture::error_kind_of([&] { niqe_patch_features(img, 32, 1.5); }) == ErrorKind::Input);
  }
}

TEST_CASE("niqe keeps the sharp half of a half-blurred image") {
  SynthParams p;
  p.seed = 12;
  p.width = 256;
  p.height = 128;
  p.finger_band = false;
  const auto img = generate(p).image;
  const Plane blurred = imgproc::gaussian_blur(img.plane(), 3.0);
  Plane mixed = img.plane();
  for (int y = 0; y < mixed.height; ++y) {
    for (int x = 128; x < mixed.width; ++x) mixed(x, y) = blurred(x, y);
  }
  const auto patches = niqe_patches(GrayImage::from_plane(mixed), 32, 0.75);
  REQUIRE_FALSE(patches.empty());
  for (const auto& patch : patches) CHECK(patch.x + 32 <= 128);
}
