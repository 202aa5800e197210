#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tagshot/corpus.hpp"
#include "tagshot/selection.hpp"

namespace tagshot {

/// Instruction text and field labels for one prompt language. Stored as
/// versioned JSON assets under assets/templates/.
struct PromptTemplate {
  std::string version;
  std::string language;
  std::string instruction_fewshot;
  std::string instruction_zeroshot;
  std::string label_details;
  std::string label_background;
  std::string label_prevention;

  bool operator==(PromptTemplate const&) const = default;

  static PromptTemplate japanese();
  static PromptTemplate english();
  static PromptTemplate load(std::string const& path);
  /// "ja" / "en" select a built-in; anything else is read as a file path.
  static PromptTemplate resolve(std::string const& name_or_path);
};

void to_json(nlohmann::json& j, PromptTemplate const& t);
void from_json(nlohmann::json const& j, PromptTemplate& t);

struct PromptText {
  std::string text;
  std::size_t n_examples = 0;
  std::string input_id;
  std::string template_version;
  /// Non-fatal issues, e.g. an example with a blank field.
  std::vector<std::string> warnings;
};

/// Instruction, then one labeled block per example in set order, then the
/// input's details with both answer labels left empty.
PromptText render_fewshot(ExampleSet const& examples, IncidentRecord const& input,
                          PromptTemplate const& tmpl = PromptTemplate::japanese());

PromptText render_zeroshot(IncidentRecord const& input, PromptTemplate const& tmpl = PromptTemplate::japanese());

/// Number of lines that begin with "<label>:".
std::size_t count_label_lines(std::string const& text, std::string const& label);

}  // namespace tagshot
