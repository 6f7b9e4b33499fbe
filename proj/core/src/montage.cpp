#include "neurospect/montage.hpp"

#include <algorithm>
#include <cctype>

#include "neurospect/errors.hpp"

namespace neurospect {
namespace {

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

}  // namespace

std::string_view region_name(Region r) {
  switch (r) {
    case Region::frontal: return "Frontal";
    case Region::central: return "Central";
    case Region::temporal: return "Temporal";
    case Region::parietal: return "Parietal";
    case Region::occipital: return "Occipital";
  }
  return "Unknown";
}

std::size_t electrode_index(std::string_view electrode) {
  for (std::size_t i = 0; i < kMontage.size(); ++i) {
    if (iequals(kMontage[i], electrode)) return i;
  }
  throw InvalidArgument("unknown electrode '" + std::string(electrode) + "'");
}

Region electrode_region(std::string_view electrode) {
  const auto name = kMontage[electrode_index(electrode)];
  switch (name.front()) {
    case 'F': return Region::frontal;  // includes Fp
    case 'C': return Region::central;
    case 'T': return Region::temporal;
    case 'P': return Region::parietal;
    case 'O': return Region::occipital;
    default: break;
  }
  throw InvalidArgument("electrode '" + std::string(electrode) + "' has no region prefix");
}

std::vector<std::string> montage_electrodes() {
  return {kMontage.begin(), kMontage.end()};
}

}  // namespace neurospect
