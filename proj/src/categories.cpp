#include "tagshot/categories.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "tagshot/error.hpp"
#include "tagshot/text.hpp"

namespace tagshot {

namespace {

struct CategoryInfo {
  BroadCategory id;
  std::string_view name;
  std::size_t count;
};

constexpr std::array<CategoryInfo, kCategoryCount> kCategories{{
    {BroadCategory::Dispensing, "Dispensing", 71},
    {BroadCategory::Medications, "Medications", 438},
    {BroadCategory::MechanicalVentilators, "Mechanical Ventilators", 182},
    {BroadCategory::InfusionPumps, "Infusion Pumps", 114},
    {BroadCategory::PatientBroughtMedications, "Patient-Brought Medications", 136},
    {BroadCategory::DrainInsertionAndManagement, "Drain Insertion and Management", 134},
    {BroadCategory::LaboratoryTests, "(Clinical) Laboratory Tests", 84},
    {BroadCategory::PediatricPatientCare, "Pediatric Patient Care", 133},
    {BroadCategory::Rehabilitation, "Rehabilitation", 131},
    {BroadCategory::BloodTransfusionTherapy, "Blood Transfusion Therapy", 121},
    {BroadCategory::ContraindicatedDrugs, "Contraindicated Drugs", 83},
    {BroadCategory::RadiologicalExaminations, "Radiological Examinations", 71},
    {BroadCategory::LeftRightConfusion, "Left-Right (Body Part) Confusion", 73},
    {BroadCategory::RetainedForeignObjects, "Retained Foreign Objects", 23},
    {BroadCategory::HospitalRoomEquipment, "Hospital Room Equipment (e.g., beds)", 71},
    {BroadCategory::Chemotherapy, "Chemotherapy", 60},
    {BroadCategory::ElectrosurgicalUnits, "Electrosurgical Units and Similar Devices", 39},
    {BroadCategory::PatientMisidentification, "Patient Misidentification", 53},
}};

// Fine-grained labels merged into a broader category.
constexpr std::array<std::pair<std::string_view, BroadCategory>, 10> kFineLabels{{
    {"Other Medications", BroadCategory::Medications},
    {"Nasogastric Tube", BroadCategory::DrainInsertionAndManagement},
    {"Gastrostomy and Enterostomy Tube", BroadCategory::DrainInsertionAndManagement},
    {"Enema", BroadCategory::DrainInsertionAndManagement},
    {"Clinical Tests", BroadCategory::LaboratoryTests},
    {"Laboratory Tests", BroadCategory::LaboratoryTests},
    {"Laterality Error", BroadCategory::LeftRightConfusion},
    {"Other Site Errors", BroadCategory::LeftRightConfusion},
    {"Non-procedural Other Site Errors", BroadCategory::LeftRightConfusion},
    // Corpus-language tag shown on the dataset's sample record.
    {"調剤", BroadCategory::Dispensing},
}};

bool is_space_at(std::string_view s, std::size_t pos, std::size_t& width) {
  unsigned char c = static_cast<unsigned char>(s[pos]);
  if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
    width = 1;
    return true;
  }
  // U+3000 IDEOGRAPHIC SPACE
  if (s.substr(pos, 3) == "\xE3\x80\x80") {
    width = 3;
    return true;
  }
  return false;
}

}  // namespace

std::array<BroadCategory, kCategoryCount> const& all_categories() {
  static const auto all = [] {
    std::array<BroadCategory, kCategoryCount> out{};
    for (std::size_t i = 0; i < kCategoryCount; ++i) out[i] = kCategories[i].id;
    return out;
  }();
  return all;
}

std::string_view category_name(BroadCategory c) {
  return kCategories[category_index(c)].name;
}

std::size_t expected_count(BroadCategory c) {
  return kCategories[category_index(c)].count;
}

std::optional<BroadCategory> category_from_name(std::string_view name) {
  for (auto const& info : kCategories) {
    if (info.name == name) return info.id;
  }
  return std::nullopt;
}

std::string normalize_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t width = 0;
    if (is_space_at(text, pos, width)) {
      pending_space = !out.empty();
      pos += width;
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(text[pos++]);
  }
  return out;
}

LabelMap::LabelMap() {
  for (auto const& info : kCategories) table_.emplace(std::string(info.name), info.id);
  for (auto const& [label, cat] : kFineLabels) table_.emplace(std::string(label), cat);
}

void LabelMap::add(std::string_view label, std::string_view broad_name) {
  auto cat = category_from_name(normalize_whitespace(broad_name));
  if (!cat) {
    throw ConfigError("label map: '" + std::string(broad_name) +
                      "' is not one of the 18 broad categories");
  }
  auto key = normalize_whitespace(label);
  auto [it, inserted] = table_.emplace(key, *cat);
  if (!inserted && it->second != *cat) {
    throw ConfigError("label map: '" + key + "' already maps to " +
                      std::string(category_name(it->second)));
  }
}

LabelMap LabelMap::with_extra_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open label map " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (nlohmann::json::exception const& e) {
    throw ConfigError("label map " + path + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("label map " + path + ": expected a JSON object");
  LabelMap map;
  for (auto const& [label, broad] : j.items()) {
    if (!broad.is_string()) throw ConfigError("label map " + path + ": value for '" + label + "' is not a string");
    map.add(label, broad.get<std::string>());
  }
  return map;
}

std::optional<BroadCategory> LabelMap::lookup(std::string_view raw_label) const {
  auto it = table_.find(normalize_whitespace(raw_label));
  if (it == table_.end()) return std::nullopt;
  return it->second;
}

std::optional<BroadCategory> normalize_tag(std::string_view raw_label) {
  static const LabelMap builtin;
  return builtin.lookup(raw_label);
}

}  // namespace tagshot
