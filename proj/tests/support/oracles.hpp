#pragma once

// Deliberately naive reference implementations. They share no code with the
// library so that agreement between the two is meaningful.

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "veinqa/image.hpp"
#include "veinqa/recognition.hpp"

namespace oracle {

inline int mirror(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - i - 1;
  }
  return i;
}

/// Per-pixel MSCN with an explicit 2-D window and centred variance.
inline std::vector<double> mscn(const veinqa::GrayImage& img, double sigma, int radius, double c) {
  const int w = img.width();
  const int h = img.height();
  std::vector<double> weight;
  double total = 0.0;
  for (int v = -radius; v <= radius; ++v) {
    for (int u = -radius; u <= radius; ++u) {
      const double g = std::exp(-(u * u) / (2 * sigma * sigma)) * std::exp(-(v * v) / (2 * sigma * sigma));
      weight.push_back(g);
      total += g;
    }
  }
  for (double& g : weight) g /= total;
  std::vector<double> out(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double mu = 0.0;
      std::size_t k = 0;
      for (int v = -radius; v <= radius; ++v) {
        for (int u = -radius; u <= radius; ++u) mu += weight[k++] * img(mirror(x + u, w), mirror(y + v, h));
      }
      double var = 0.0;
      k = 0;
      for (int v = -radius; v <= radius; ++v) {
        for (int u = -radius; u <= radius; ++u) {
          const double d = img(mirror(x + u, w), mirror(y + v, h)) - mu;
          var += weight[k++] * d * d;
        }
      }
      out[static_cast<std::size_t>(y) * w + x] = (img(x, y) - mu) / (std::sqrt(var) + c);
    }
  }
  return out;
}

/// AGGD variates by inverting the gamma CDF of |x|^nu on each side.
class AggdSampler {
 public:
  AggdSampler(double nu, double sigma2_l, double sigma2_r, std::uint64_t seed)
      : nu_(nu), rng_(seed) {
    const double scale = std::sqrt(std::tgamma(1.0 / nu) / std::tgamma(3.0 / nu));
    beta_l_ = std::sqrt(sigma2_l) * scale;
    beta_r_ = std::sqrt(sigma2_r) * scale;
  }

  double operator()() {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const bool left = u(rng_) * (beta_l_ + beta_r_) < beta_l_;
    double p = u(rng_);
    while (p <= 0.0) p = u(rng_);
    const double g = boost::math::gamma_p_inv(1.0 / nu_, p);
    const double magnitude = std::pow(g, 1.0 / nu_);
    return left ? -beta_l_ * magnitude : beta_r_ * magnitude;
  }

 private:
  double nu_;
  double beta_l_ = 0.0;
  double beta_r_ = 0.0;
  std::mt19937_64 rng_;
};

struct Rates {
  double eer = 0.0;
  double eer_threshold = 0.0;
  double fmr1000 = 0.0;
  double zerofmr = 0.0;
};

/// Exhaustive sweep: every threshold is evaluated by recounting all scores.
inline Rates sweep(const std::vector<double>& genuine, const std::vector<double>& impostor) {
  std::vector<double> t(genuine);
  t.insert(t.end(), impostor.begin(), impostor.end());
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  t.push_back(std::numeric_limits<double>::infinity());
  Rates r;
  double best = std::numeric_limits<double>::infinity();
  bool got_1000 = false;
  bool got_zero = false;
  for (double th : t) {
    std::size_t fn = 0;
    std::size_t fm = 0;
    for (double g : genuine) fn += g < th ? 1 : 0;
    for (double i : impostor) fm += i >= th ? 1 : 0;
    const double fnmr = static_cast<double>(fn) / static_cast<double>(genuine.size());
    const double fmr = static_cast<double>(fm) / static_cast<double>(impostor.size());
    if (std::abs(fmr - fnmr) < best) {
      best = std::abs(fmr - fnmr);
      r.eer = (fmr + fnmr) / 2.0;
      r.eer_threshold = th;
    }
    if (!got_1000 && fmr <= 0.001) {
      r.fmr1000 = fnmr;
      got_1000 = true;
    }
    if (!got_zero && fm == 0) {
      r.zerofmr = fnmr;
      got_zero = true;
    }
  }
  return r;
}

/// Shift-by-shift, pixel-by-pixel Miura score.
inline double miura(const veinqa::BinaryTemplate& a, const veinqa::BinaryTemplate& b, int sx, int sy) {
  double best = 0.0;
  for (int dy = -sy; dy <= sy; ++dy) {
    for (int dx = -sx; dx <= sx; ++dx) {
      long matched = 0;
      long na = 0;
      long nb = 0;
      for (int y = 0; y < a.height(); ++y) {
        for (int x = 0; x < a.width(); ++x) {
          const int gx = x + dx;
          const int gy = y + dy;
          if (gx < 0 || gy < 0 || gx >= b.width() || gy >= b.height()) continue;
          const bool pa = a(x, y);
          const bool pb = b(gx, gy);
          na += pa;
          nb += pb;
          matched += pa && pb;
        }
      }
      if (na + nb > 0) best = std::max(best, static_cast<double>(matched) / static_cast<double>(na + nb));
    }
  }
  return best;
}

/// Mean absolute difference to the 4-neighbours, enumerated pair by pair.
inline double local_contrast(const veinqa::Plane& p) {
  double total = 0.0;
  for (int y = 0; y < p.height; ++y) {
    for (int x = 0; x < p.width; ++x) {
      double sum = 0.0;
      int n = 0;
      const int dx[4] = {1, -1, 0, 0};
      const int dy[4] = {0, 0, 1, -1};
      for (int k = 0; k < 4; ++k) {
        const int nx = x + dx[k];
        const int ny = y + dy[k];
        if (nx < 0 || ny < 0 || nx >= p.width || ny >= p.height) continue;
        sum += std::abs(p(x, y) - p(nx, ny));
        ++n;
      }
      total += sum / n;
    }
  }
  return total / (static_cast<double>(p.width) * p.height);
}

}  // namespace oracle
