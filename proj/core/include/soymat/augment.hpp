#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "soymat/image.hpp"
#include "soymat/ingest.hpp"

namespace soymat {

// v -> clamp(v + delta, 0, 255)
Image adjust_brightness(const Image& image, double delta);

// v -> clamp(round(k v), 0, 255), rounding half away from zero.
Image adjust_contrast(const Image& image, double factor);

// Normalised 1-D Gaussian taps, radius ceil(3 sigma). sigma = 0 gives {1}.
std::vector<double> gaussian_kernel(double sigma);

// Separable blur with mirrored edges (the edge pixel is repeated). Output keeps
// fractional levels.
Image gaussian_blur(const Image& image, double sigma);

enum class Perturbation { Brightness, Contrast, Blur };
std::string to_string(Perturbation p);

struct AugmentPlan {
  double fraction = 0.2;
  double brightness_delta = -100.0;
  double contrast_factor = 1.5;
  double blur_sigma = 1.5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct AppliedPerturbation {
  std::size_t series_index = 0;
  std::size_t snip_index = 0;
  Perturbation kind = Perturbation::Brightness;
};

struct AugmentResult {
  std::vector<PlotSeries> series;
  std::vector<AppliedPerturbation> applied;  // ordered by (series, snip)
};

Image apply_perturbation(const Image& image, Perturbation kind, const AugmentPlan& plan);

// Perturbs exactly floor(fraction * image count) snips, each with one
// perturbation drawn uniformly; the choice depends only on the plan seed and
// the dataset shape.
AugmentResult augment_dataset(std::vector<PlotSeries> series, const AugmentPlan& plan);

}  // namespace soymat
