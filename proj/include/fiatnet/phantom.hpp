#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "fiatnet/bpt.hpp"
#include "fiatnet/preprocess.hpp"

namespace fiatnet {

enum class PhantomClass { kHealthy, kFibroatheroma, kCalcified };

std::string_view phantom_class_name(PhantomClass c);

/// Bright cap followed by fast exponential decay over an angular interval.
struct FaInterval {
  AngularRegion degrees;
  double cap_brightness = 0.95;
  double decay_rate = 0.25;  ///< per pixel of depth below the cap
};

/// Sharply bordered dark band inside the wall; not annotated as FA.
struct CalcifiedRegion {
  AngularRegion degrees;
  double depth_start = 4.0;  ///< below the lumen border, px
  double depth_end = 18.0;
  double intensity = 0.06;
};

struct PhantomSpec {
  int rows = 320;
  int cols = 320;
  double center_row = 160.0;
  double center_col = 160.0;

  // lumen ellipse, semi-axes along the rotated x / y directions
  double lumen_a = 30.0;
  double lumen_b = 30.0;
  double lumen_rotation_deg = 0.0;

  // wall layer thicknesses, px
  double intima = 10.0;
  double media = 8.0;
  double adventitia = 14.0;

  // dark -> light -> dark -> light -> dark
  double lumen_level = 0.05;
  double intima_level = 0.70;
  double media_level = 0.40;
  double adventitia_level = 0.85;
  double periadventitia_level = 0.12;
  double healthy_decay = 0.006;  ///< attenuation per px of depth

  double cap_thickness = 3.0;
  double fa_deep_layer_gain = 0.15;  ///< residual visibility of layers behind a cap

  std::vector<FaInterval> fa;
  std::vector<CalcifiedRegion> calcified;

  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

struct PhantomTruth {
  BorderTrace lumen;  ///< analytic, in polar samples
  BorderTrace ap;     ///< analytic, in polar samples
  AngleAnnotation annotation;
};

struct PhantomFrame {
  CartesianFrame frame;
  PhantomTruth truth;
  PhantomClass cls = PhantomClass::kHealthy;
};

/// Lumen border radius along the ray `deg` degrees clockwise from 3 o'clock.
double lumen_radius(const PhantomSpec& spec, double deg);

/// Noise-free intensity at depth `depth` (px below the lumen border) on ray `deg`.
double phantom_profile(const PhantomSpec& spec, double deg, double depth);

void validate(const PhantomSpec& spec);

PhantomFrame generate_frame(const PhantomSpec& spec);

struct ClassMix {
  double healthy = 0.5;
  double fa = 0.3;
  double calcified = 0.2;
};

struct DatasetOptions {
  double noise_sigma = 0.03;
};

/// Randomized spec of the given class; deterministic in the rng state.
PhantomSpec random_spec(PhantomClass cls, Rng& rng, const DatasetOptions& options = {});

/// Exact class counts by largest remainder; class order shuffled with seed_base.
std::vector<PhantomClass> allocate_classes(int n, const ClassMix& mix, std::uint64_t seed_base);

std::vector<PhantomFrame> generate_dataset(int n, const ClassMix& mix, std::uint64_t seed_base,
                                           const DatasetOptions& options = {});

}  // namespace fiatnet
