#include "neurospect/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "neurospect/errors.hpp"
#include "neurospect/montage.hpp"

namespace neurospect::synthetic {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::vector<std::size_t> region_members(std::initializer_list<Region> regions) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < kMontage.size(); ++i) {
    const Region r = electrode_region(kMontage[i]);
    for (Region want : regions) {
      if (r == want) out.push_back(i);
    }
  }
  return out;
}

}  // namespace

void CohortConfig::validate() const {
  if (classes.size() < 2 || classes.size() > dataset::kNumClasses) {
    throw InvalidArgument("synthetic cohort needs between 2 and 7 classes");
  }
  for (std::size_t a = 0; a < classes.size(); ++a) {
    for (std::size_t b = a + 1; b < classes.size(); ++b) {
      if (classes[a] == classes[b]) throw InvalidArgument("synthetic classes must be distinct");
    }
  }
  if (subjects_per_class == 0) throw InvalidArgument("subjects_per_class must be positive");
  if (!(coherence_lo >= 0.0 && coherence_lo <= coherence_hi && coherence_hi <= 1.0)) {
    throw InvalidArgument("coherence range must satisfy 0 <= lo <= hi <= 1");
  }
  if (!(amplitude_jitter >= 0.0 && amplitude_jitter < 1.0)) {
    throw InvalidArgument("amplitude_jitter must lie in [0, 1)");
  }
  if (!(duration_s > 0.0) || !(fs > 0.0)) throw InvalidArgument("duration and fs must be positive");
}

std::vector<std::size_t> coupling_group(std::size_t k) {
  switch (k) {
    case 0: return region_members({Region::frontal});
    case 1: return region_members({Region::parietal, Region::occipital});
    case 2: return region_members({Region::temporal});
    case 3: return region_members({Region::central});
    case 4: return region_members({Region::frontal, Region::central});
    case 5: return region_members({Region::temporal, Region::occipital});
    case 6: return region_members({Region::central, Region::parietal});
    default: break;
  }
  throw InvalidArgument("no coupling group for class index " + std::to_string(k));
}

std::vector<SubjectPlan> plan_cohort(const CohortConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> iq_dist(100.0, 15.0);
  std::vector<SubjectPlan> out;
  const std::size_t n = cfg.subjects_per_class * cfg.classes.size();
  for (std::size_t s = 0; s < n; ++s) {
    SubjectPlan p;
    p.class_index = s % cfg.classes.size();
    p.label = cfg.classes[p.class_index];
    p.id = "syn-" + std::to_string(s + 1);
    p.coherence = cfg.coherence_lo + (cfg.coherence_hi - cfg.coherence_lo) * unit(rng);
    p.amplitude = 1.0 + cfg.amplitude_jitter * (2.0 * unit(rng) - 1.0);
    p.demographics.age = std::round((18.0 + 52.0 * unit(rng)) * 10.0) / 10.0;
    p.demographics.sex = unit(rng) < 0.5 ? dataset::Sex::female : dataset::Sex::male;
    p.demographics.education = std::round(8.0 + 12.0 * unit(rng));
    p.demographics.iq = std::round(std::clamp(iq_dist(rng), 55.0, 145.0));
    p.seed = splitmix64(cfg.seed ^ splitmix64(s));
    out.push_back(p);
  }
  return out;
}

spectral::ClassProfile subject_profile(const SubjectPlan& plan) {
  spectral::ClassProfile profile;
  profile.amplitude_uv *= plan.amplitude;
  profile.groups.push_back({coupling_group(plan.class_index), plan.coherence});
  return profile;
}

spectral::SampledWindow render_subject(const SubjectPlan& plan, const CohortConfig& cfg) {
  return spectral::synth_eeg(subject_profile(plan), cfg.duration_s, cfg.fs, plan.seed,
                             montage_electrodes());
}

dataset::Dataset synthesize_cohort(const CohortConfig& cfg) {
  dataset::Dataset data;
  data.schema.mode = cfg.extraction.mode;
  data.schema.bands = cfg.extraction.bands;
  data.demographic_columns.assign(dataset::kDemographicColumns.begin(),
                                  dataset::kDemographicColumns.end());
  for (const auto& plan : plan_cohort(cfg)) {
    data.records.push_back(dataset::record_from_window(render_subject(plan, cfg), cfg.extraction,
                                                       plan.id, plan.demographics, plan.label));
  }
  return data;
}

}  // namespace neurospect::synthetic
