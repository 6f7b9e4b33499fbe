#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace neurospect {

/// Standard 19-channel 10-20 montage in canonical order.
inline constexpr std::array<std::string_view, 19> kMontage = {
    "Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8", "T3", "C3", "Cz",
    "C4",  "T4",  "T5", "P3", "Pz", "P4", "T6", "O1", "O2"};

enum class Region { frontal, central, temporal, parietal, occipital };

inline constexpr std::array<Region, 5> kRegions = {Region::frontal, Region::central,
                                                   Region::temporal, Region::parietal,
                                                   Region::occipital};

std::string_view region_name(Region r);

/// Region by 10-20 prefix (Fp/F frontal, C central, T temporal, P parietal,
/// O occipital). Case-insensitive; throws InvalidArgument for names outside
/// the montage.
Region electrode_region(std::string_view electrode);

/// Position in kMontage (case-insensitive); throws for unknown names.
std::size_t electrode_index(std::string_view electrode);

std::vector<std::string> montage_electrodes();

}  // namespace neurospect
