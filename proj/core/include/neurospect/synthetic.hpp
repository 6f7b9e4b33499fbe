#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "neurospect/dataset.hpp"
#include "neurospect/spectral.hpp"

namespace neurospect::synthetic {

/// Labeled cohort whose classes differ only in which electrodes share a
/// coherent source. Band power profiles and demographics are drawn from the
/// same distributions for every class.
struct CohortConfig {
  std::vector<dataset::DisorderLabel> classes = {dataset::DisorderLabel::healthy_control,
                                                 dataset::DisorderLabel::mood,
                                                 dataset::DisorderLabel::schizophrenia};
  std::size_t subjects_per_class = 100;
  double duration_s = 60.0;
  double fs = 128.0;
  double coherence_lo = 0.4;
  double coherence_hi = 0.8;
  /// Per-subject amplitude factor drawn from [1 - j, 1 + j].
  double amplitude_jitter = 0.2;
  std::uint64_t seed = 2024;
  dataset::ExtractionConfig extraction;

  void validate() const;
};

/// Montage indices coupled for the k-th class of a cohort (k < 7): frontal,
/// parietal+occipital, temporal, central, fronto-central, temporo-occipital,
/// centro-parietal.
std::vector<std::size_t> coupling_group(std::size_t k);

struct SubjectPlan {
  std::string id;
  dataset::Demographics demographics;
  dataset::DisorderLabel label = dataset::DisorderLabel::healthy_control;
  std::size_t class_index = 0;
  double coherence = 0.0;
  double amplitude = 1.0;
  std::uint64_t seed = 0;
};

/// Subjects in class-interleaved order with their random draws fixed.
std::vector<SubjectPlan> plan_cohort(const CohortConfig& cfg);

spectral::ClassProfile subject_profile(const SubjectPlan& plan);
spectral::SampledWindow render_subject(const SubjectPlan& plan, const CohortConfig& cfg);

/// plan_cohort + render_subject + feature extraction.
dataset::Dataset synthesize_cohort(const CohortConfig& cfg);

}  // namespace neurospect::synthetic
