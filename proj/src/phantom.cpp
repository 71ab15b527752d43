#include "fiatnet/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace fiatnet {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr int kSupersample = 3;

double healthy_layers(const PhantomSpec& s, double depth) {
  double level;
  if (depth < s.intima)
    level = s.intima_level;
  else if (depth < s.intima + s.media)
    level = s.media_level;
  else if (depth < s.intima + s.media + s.adventitia)
    level = s.adventitia_level;
  else
    level = s.periadventitia_level;
  return level * std::exp(-s.healthy_decay * depth);
}

const FaInterval* fa_at(const PhantomSpec& s, double deg) {
  const int a = static_cast<int>(std::floor(deg)) % kAngles;
  for (const FaInterval& f : s.fa) {
    if (a >= f.degrees.start && a < f.degrees.end) return &f;
  }
  return nullptr;
}

const CalcifiedRegion* calcified_at(const PhantomSpec& s, double deg) {
  const int a = static_cast<int>(std::floor(deg)) % kAngles;
  for (const CalcifiedRegion& c : s.calcified) {
    if (a >= c.degrees.start && a < c.degrees.end) return &c;
  }
  return nullptr;
}

}  // namespace

std::string_view phantom_class_name(PhantomClass c) {
  switch (c) {
    case PhantomClass::kHealthy:
      return "healthy";
    case PhantomClass::kFibroatheroma:
      return "fa";
    case PhantomClass::kCalcified:
      return "calcified";
  }
  return "?";
}

double lumen_radius(const PhantomSpec& spec, double deg) {
  const double psi = (deg - spec.lumen_rotation_deg) * kDegToRad;
  const double bc = spec.lumen_b * std::cos(psi);
  const double as = spec.lumen_a * std::sin(psi);
  return spec.lumen_a * spec.lumen_b / std::sqrt(bc * bc + as * as);
}

double phantom_profile(const PhantomSpec& spec, double deg, double depth) {
  if (depth < 0.0) return spec.lumen_level;
  if (const FaInterval* fa = fa_at(spec, deg)) {
    if (depth < spec.cap_thickness) return fa->cap_brightness;
    const double decayed = fa->cap_brightness * std::exp(-fa->decay_rate * (depth - spec.cap_thickness));
    return std::min(1.0, decayed + spec.fa_deep_layer_gain * healthy_layers(spec, depth));
  }
  if (const CalcifiedRegion* c = calcified_at(spec, deg)) {
    if (depth >= c->depth_start && depth < c->depth_end) return c->intensity;
  }
  return healthy_layers(spec, depth);
}

void validate(const PhantomSpec& s) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kSpecOutOfBounds, what); };
  if (s.rows < 64 || s.cols < 64) fail("phantom frames must be at least 64x64");
  if (!(s.center_row > 0 && s.center_col > 0 && s.center_row < s.rows - 1 && s.center_col < s.cols - 1)) {
    fail("phantom center outside the frame");
  }
  if (!(s.lumen_a > 0 && s.lumen_b > 0)) fail("lumen semi-axes must be positive");
  if (!(s.intima > 0 && s.media > 0 && s.adventitia > 0)) fail("layer thicknesses must be positive");
  const double reach = std::min({s.center_row, s.center_col, s.rows - 1 - s.center_row, s.cols - 1 - s.center_col});
  const double outer = std::max(s.lumen_a, s.lumen_b) + s.intima + s.media + s.adventitia;
  if (outer >= reach) fail("vessel wall extends past the frame edge");
  for (const FaInterval& f : s.fa) {
    if (f.degrees.start < 0 || f.degrees.end > kAngles || f.degrees.start >= f.degrees.end) {
      fail("FA interval outside [0, 360)");
    }
    if (!(f.decay_rate > s.healthy_decay)) fail("FA decay rate must exceed the healthy attenuation");
  }
  for (const CalcifiedRegion& c : s.calcified) {
    if (c.degrees.start < 0 || c.degrees.end > kAngles || c.degrees.start >= c.degrees.end) {
      fail("calcified region outside [0, 360)");
    }
    if (!(c.depth_start >= 0 && c.depth_end > c.depth_start)) fail("calcified depth range is empty");
  }
  if (!(s.noise_sigma >= 0)) fail("noise level must be non-negative");
}

PhantomFrame generate_frame(const PhantomSpec& spec) {
  validate(spec);
  PhantomFrame out;
  out.frame.center_row = spec.center_row;
  out.frame.center_col = spec.center_col;
  Image& img = out.frame.pixels;
  img = Image(spec.rows, spec.cols);

  for (int y = 0; y < spec.rows; ++y) {
    for (int x = 0; x < spec.cols; ++x) {
      double acc = 0.0;
      for (int sy = 0; sy < kSupersample; ++sy) {
        for (int sx = 0; sx < kSupersample; ++sx) {
          const double dy = y + (sy - 1) / 3.0 - spec.center_row;
          const double dx = x + (sx - 1) / 3.0 - spec.center_col;
          double deg = std::atan2(dy, dx) / kDegToRad;
          if (deg < 0.0) deg += 360.0;
          if (deg >= 360.0) deg -= 360.0;
          const double depth = std::hypot(dx, dy) - lumen_radius(spec, deg);
          acc += phantom_profile(spec, deg, depth);
        }
      }
      img.at(y, x) = acc / (kSupersample * kSupersample);
    }
  }
  if (spec.noise_sigma > 0.0) {
    Rng rng(spec.seed);
    for (double& v : img.px) v = std::clamp(v + spec.noise_sigma * normal(rng), 0.0, 1.0);
  }

  out.truth.lumen.kind = BorderKind::kLumenIntima;
  out.truth.ap.kind = BorderKind::kAdventitiaPeriadventitia;
  out.truth.lumen.radii.resize(kAngles);
  out.truth.ap.radii.resize(kAngles);
  const double wall = spec.intima + spec.media + spec.adventitia;
  for (int a = 0; a < kAngles; ++a) {
    out.truth.lumen.radii[a] = lumen_radius(spec, a);
    out.truth.ap.radii[a] = out.truth.lumen.radii[a] + wall;
  }
  std::vector<AngularRegion> intervals;
  for (const FaInterval& f : spec.fa) intervals.push_back(f.degrees);
  out.truth.annotation = AngleAnnotation::from_intervals(intervals);
  if (!spec.fa.empty())
    out.cls = PhantomClass::kFibroatheroma;
  else if (!spec.calcified.empty())
    out.cls = PhantomClass::kCalcified;
  return out;
}

PhantomSpec random_spec(PhantomClass cls, Rng& rng, const DatasetOptions& options) {
  PhantomSpec s;
  s.center_row = 160.0 + uniform(rng, -3.0, 3.0);
  s.center_col = 160.0 + uniform(rng, -3.0, 3.0);
  if (uniform01(rng) < 0.5) {
    s.lumen_a = s.lumen_b = uniform(rng, 26.0, 40.0);
  } else {
    s.lumen_a = uniform(rng, 26.0, 44.0);
    s.lumen_b = uniform(rng, 24.0, 40.0);
  }
  s.lumen_rotation_deg = uniform(rng, 0.0, 180.0);
  s.intima = uniform(rng, 8.0, 12.0);
  s.media = uniform(rng, 6.0, 10.0);
  s.adventitia = uniform(rng, 12.0, 18.0);
  const double gain = uniform(rng, 0.9, 1.1);
  s.intima_level *= gain;
  s.media_level *= uniform(rng, 0.9, 1.1);
  s.adventitia_level = std::min(0.95, s.adventitia_level * uniform(rng, 0.9, 1.1));

  const int width = 40 + static_cast<int>(uniform_index(rng, 81));
  const int start = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(kAngles - width)));
  if (cls == PhantomClass::kFibroatheroma) {
    s.fa.push_back(FaInterval{{start, start + width}, uniform(rng, 0.85, 1.0), uniform(rng, 0.15, 0.35)});
  } else if (cls == PhantomClass::kCalcified) {
    // the band ends inside the media so its far edge stays weaker than the lumen edge
    const double d0 = uniform(rng, 4.0, 7.0);
    const double d1 = std::clamp(d0 + uniform(rng, 6.0, 10.0), d0 + 4.0, s.intima + 0.5 * s.media);
    s.calcified.push_back(CalcifiedRegion{{start, start + width}, d0, d1, 0.06});
  }
  s.noise_sigma = options.noise_sigma;
  s.seed = rng();
  return s;
}

std::vector<PhantomClass> allocate_classes(int n, const ClassMix& mix, std::uint64_t seed_base) {
  const double props[3] = {mix.healthy, mix.fa, mix.calcified};
  double sum = 0.0;
  for (double p : props) {
    if (!(p >= 0.0)) throw Error(ErrorCode::kSpecOutOfBounds, "class proportions must be non-negative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorCode::kSpecOutOfBounds, "class proportions must sum to 1");
  if (n < 1) throw Error(ErrorCode::kSpecOutOfBounds, "dataset needs at least one frame");

  int counts[3];
  double remainders[3];
  int assigned = 0;
  for (int k = 0; k < 3; ++k) {
    const double exact = props[k] * n;
    counts[k] = static_cast<int>(std::floor(exact + 1e-9));
    remainders[k] = exact - counts[k];
    assigned += counts[k];
  }
  while (assigned < n) {
    int best = 0;
    for (int k = 1; k < 3; ++k) {
      if (remainders[k] > remainders[best]) best = k;
    }
    ++counts[best];
    remainders[best] = -1.0;
    ++assigned;
  }
  std::vector<PhantomClass> classes;
  classes.insert(classes.end(), counts[0], PhantomClass::kHealthy);
  classes.insert(classes.end(), counts[1], PhantomClass::kFibroatheroma);
  classes.insert(classes.end(), counts[2], PhantomClass::kCalcified);
  Rng rng(derive_seed(seed_base, 0xC1A55));
  shuffle(classes, rng);
  return classes;
}

std::vector<PhantomFrame> generate_dataset(int n, const ClassMix& mix, std::uint64_t seed_base,
                                           const DatasetOptions& options) {
  const std::vector<PhantomClass> classes = allocate_classes(n, mix, seed_base);
  std::vector<PhantomFrame> frames(classes.size());
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed_base, static_cast<std::uint64_t>(i)));
    frames[i] = generate_frame(random_spec(classes[i], rng, options));
    frames[i].cls = classes[i];
  }
  return frames;
}

}  // namespace fiatnet
