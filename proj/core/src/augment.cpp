#include "soymat/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "soymat/error.hpp"
#include "soymat/rng.hpp"

namespace soymat {

namespace {

template <class F>
Image map_levels(const Image& image, F f) {
  Image out = image;
  for (float& v : out.data()) v = static_cast<float>(std::clamp(f(static_cast<double>(v)), 0.0, 255.0));
  return out;
}

// Mirrors an out-of-range index back into [0, n): ... 1 0 | 0 1 ... n-1 | n-1 n-2 ...
int mirror(int i, int n) {
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

}  // namespace

Image adjust_brightness(const Image& image, double delta) {
  return map_levels(image, [delta](double v) { return v + delta; });
}

Image adjust_contrast(const Image& image, double factor) {
  if (!(factor > 0.0)) throw ConfigError("contrast factor must be positive");
  return map_levels(image, [factor](double v) { return std::round(factor * v); });
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("blur sigma must be >= 0");
  if (sigma == 0.0) return {1.0};
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(2 * radius + 1);
  for (int k = -radius; k <= radius; ++k) taps[k + radius] = std::exp(-0.5 * (k * k) / (sigma * sigma));
  const double sum = std::accumulate(taps.begin(), taps.end(), 0.0);
  for (double& t : taps) t /= sum;
  return taps;
}

Image gaussian_blur(const Image& image, double sigma) {
  const std::vector<double> taps = gaussian_kernel(sigma);
  if (taps.size() == 1 || image.empty()) return image;
  const int radius = static_cast<int>(taps.size() / 2);
  const int w = image.width();
  const int h = image.height();

  Image horizontal(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) acc += taps[k + radius] * image.at(mirror(x + k, w), y, c);
        horizontal.at(x, y, c) = static_cast<float>(acc);
      }
    }
  }
  Image out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) acc += taps[k + radius] * horizontal.at(x, mirror(y + k, h), c);
        out.at(x, y, c) = static_cast<float>(std::clamp(acc, 0.0, 255.0));
      }
    }
  }
  return out;
}

std::string to_string(Perturbation p) {
  switch (p) {
    case Perturbation::Brightness:
      return "brightness";
    case Perturbation::Contrast:
      return "contrast";
    case Perturbation::Blur:
      return "blur";
  }
  return "unknown";
}

void AugmentPlan::validate() const {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ConfigError("augment fraction must lie in [0, 1]");
  if (!std::isfinite(brightness_delta)) throw ConfigError("brightness delta must be finite");
  if (!(contrast_factor > 0.0) || !std::isfinite(contrast_factor)) throw ConfigError("contrast factor must be positive");
  if (!(blur_sigma >= 0.0) || !std::isfinite(blur_sigma)) throw ConfigError("blur sigma must be >= 0");
}

Image apply_perturbation(const Image& image, Perturbation kind, const AugmentPlan& plan) {
  switch (kind) {
    case Perturbation::Brightness:
      return adjust_brightness(image, plan.brightness_delta);
    case Perturbation::Contrast:
      return adjust_contrast(image, plan.contrast_factor);
    case Perturbation::Blur:
      return gaussian_blur(image, plan.blur_sigma);
  }
  return image;
}

AugmentResult augment_dataset(std::vector<PlotSeries> series, const AugmentPlan& plan) {
  plan.validate();
  std::vector<std::pair<std::size_t, std::size_t>> slots;
  for (std::size_t s = 0; s < series.size(); ++s)
    for (std::size_t k = 0; k < series[s].snips.size(); ++k) slots.emplace_back(s, k);

  const auto count = static_cast<std::size_t>(std::floor(plan.fraction * static_cast<double>(slots.size()) + 1e-9));

  // Partial Fisher-Yates: the first `count` slots become the selection.
  Rng pick = make_rng(derive_seed(plan.seed, "augment-select"));
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = static_cast<std::size_t>(uniform_int(pick, static_cast<std::int64_t>(i),
                                                        static_cast<std::int64_t>(slots.size() - 1)));
    std::swap(slots[i], slots[j]);
  }
  std::vector<std::pair<std::size_t, std::size_t>> chosen(slots.begin(), slots.begin() + static_cast<std::ptrdiff_t>(count));
  std::sort(chosen.begin(), chosen.end());

  AugmentResult result;
  Rng kind_rng = make_rng(derive_seed(plan.seed, "augment-kind"));
  for (const auto& [s, k] : chosen) {
    const auto kind = static_cast<Perturbation>(uniform_int(kind_rng, 0, 2));
    Image& img = series[s].snips[k].image;
    img = apply_perturbation(img, kind, plan);
    result.applied.push_back({s, k, kind});
  }
  result.series = std::move(series);
  return result;
}

}  // namespace soymat
