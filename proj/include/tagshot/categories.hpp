#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace tagshot {

/// The 18 consolidated "descriptive information" categories, in the order
/// they are conventionally listed.
enum class BroadCategory : std::uint8_t {
  Dispensing,
  Medications,
  MechanicalVentilators,
  InfusionPumps,
  PatientBroughtMedications,
  DrainInsertionAndManagement,
  LaboratoryTests,
  PediatricPatientCare,
  Rehabilitation,
  BloodTransfusionTherapy,
  ContraindicatedDrugs,
  RadiologicalExaminations,
  LeftRightConfusion,
  RetainedForeignObjects,
  HospitalRoomEquipment,
  Chemotherapy,
  ElectrosurgicalUnits,
  PatientMisidentification,
};

inline constexpr std::size_t kCategoryCount = 18;

std::array<BroadCategory, kCategoryCount> const& all_categories();

/// Canonical display name, e.g. "(Clinical) Laboratory Tests".
std::string_view category_name(BroadCategory c);

/// Published per-category record count for the reference dataset.
std::size_t expected_count(BroadCategory c);

constexpr std::size_t category_index(BroadCategory c) {
  return static_cast<std::size_t>(c);
}

/// Exact lookup of a canonical category name (no alias resolution).
std::optional<BroadCategory> category_from_name(std::string_view name);

/// Trims and collapses runs of ASCII / ideographic whitespace to one space.
std::string normalize_whitespace(std::string_view text);

/// Closed mapping from raw descriptive labels to broad categories.
///
/// The built-in table holds every canonical name (identity) plus the
/// fine-grained labels that were merged into broader categories. Extra
/// entries, typically the corpus-language label strings, can be added from a
/// JSON object file {"label": "Broad Category Name", ...}.
class LabelMap {
 public:
  LabelMap();

  static LabelMap with_extra_file(const std::string& path);

  /// Adds one alias; throws ConfigError when `broad_name` is not canonical
  /// or when the label is already bound to a different category.
  void add(std::string_view label, std::string_view broad_name);

  std::optional<BroadCategory> lookup(std::string_view raw_label) const;

  std::map<std::string, BroadCategory> const& entries() const { return table_; }

 private:
  std::map<std::string, BroadCategory> table_;
};

/// Resolves a raw label against the built-in mapping.
std::optional<BroadCategory> normalize_tag(std::string_view raw_label);

}  // namespace tagshot
