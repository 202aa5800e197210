#include "tagshot/prompting.hpp"

#include <fstream>

#include "tagshot/error.hpp"
#include "tagshot/text.hpp"

namespace tagshot {

using nlohmann::json;

PromptTemplate PromptTemplate::japanese() {
  return {
      .version = "ja-v1",
      .language = "ja",
      .instruction_fewshot =
          "以下は、医療事故の具体的内容と、その背景・要因および改善策を示したものです。"
          "以下の例を参考にして、背景・要因と改善策のみを生成してください。",
      .instruction_zeroshot =
          "以下は、医療事故の具体的内容と、その背景・要因および改善策を示したものです。"
          "背景・要因と改善策のみを生成してください。",
      .label_details = "具体的内容",
      .label_background = "背景・要因",
      .label_prevention = "改善策",
  };
}

PromptTemplate PromptTemplate::english() {
  return {
      .version = "en-v1",
      .language = "en",
      .instruction_fewshot =
          "The following presents the details of a medical incident, along with its background/causal factors "
          "and preventive measures. Please refer to the examples below and generate only the background/causal "
          "factors and preventive measures.",
      .instruction_zeroshot =
          "The following presents the details of a medical incident, along with its background/causal factors "
          "and preventive measures. Please generate only the background/causal factors and preventive measures.",
      .label_details = "Specifics",
      .label_background = "Background/causal factors",
      .label_prevention = "Preventive measures",
  };
}

void to_json(json& j, PromptTemplate const& t) {
  j = json{{"version", t.version},
           {"language", t.language},
           {"instruction_fewshot", t.instruction_fewshot},
           {"instruction_zeroshot", t.instruction_zeroshot},
           {"labels", {{"details", t.label_details}, {"background", t.label_background}, {"prevention", t.label_prevention}}}};
}

void from_json(json const& j, PromptTemplate& t) {
  t.version = j.at("version").get<std::string>();
  t.language = j.at("language").get<std::string>();
  t.instruction_fewshot = j.at("instruction_fewshot").get<std::string>();
  t.instruction_zeroshot = j.at("instruction_zeroshot").get<std::string>();
  auto const& labels = j.at("labels");
  t.label_details = labels.at("details").get<std::string>();
  t.label_background = labels.at("background").get<std::string>();
  t.label_prevention = labels.at("prevention").get<std::string>();
}

PromptTemplate PromptTemplate::load(std::string const& path) {
  std::ifstream in(path);
  if (!in) throw PromptError("cannot open prompt template " + path);
  try {
    return json::parse(in).get<PromptTemplate>();
  } catch (json::exception const& e) {
    throw PromptError("prompt template " + path + ": " + e.what());
  }
}

PromptTemplate PromptTemplate::resolve(std::string const& name_or_path) {
  if (name_or_path == "ja" || name_or_path == "ja-v1") return japanese();
  if (name_or_path == "en" || name_or_path == "en-v1") return english();
  return load(name_or_path);
}

namespace {

void append_field(std::string& out, std::string const& label, std::string const& value) {
  out += label;
  out += ": ";
  out += value;
  out += '\n';
}

void append_input_block(std::string& out, PromptTemplate const& t, IncidentRecord const& input) {
  append_field(out, t.label_details, input.details);
  out += t.label_background + ":\n";
  out += t.label_prevention + ":";
}

void require_details(IncidentRecord const& input) {
  if (text::trim(input.details).empty()) throw PromptError("input '" + input.id + "' has empty details");
}

}  // namespace

PromptText render_fewshot(ExampleSet const& examples, IncidentRecord const& input, PromptTemplate const& tmpl) {
  if (examples.strategy == Strategy::ZeroShot) throw PromptError("render_fewshot called with a zero-shot selection");
  if (examples.examples.empty()) throw PromptError("render_fewshot needs at least one example");
  require_details(input);

  PromptText p;
  p.n_examples = examples.examples.size();
  p.input_id = input.id;
  p.template_version = tmpl.version;
  p.text = tmpl.instruction_fewshot + "\n";
  for (auto const& e : examples.examples) {
    for (auto const* field : {&e.details, &e.background, &e.prevention}) {
      if (text::trim(*field).empty()) p.warnings.push_back("example '" + e.id + "' has an empty field");
    }
    append_field(p.text, tmpl.label_details, e.details);
    append_field(p.text, tmpl.label_background, e.background);
    append_field(p.text, tmpl.label_prevention, e.prevention);
  }
  append_input_block(p.text, tmpl, input);
  return p;
}

PromptText render_zeroshot(IncidentRecord const& input, PromptTemplate const& tmpl) {
  require_details(input);
  PromptText p;
  p.n_examples = 0;
  p.input_id = input.id;
  p.template_version = tmpl.version;
  p.text = tmpl.instruction_zeroshot + "\n";
  append_input_block(p.text, tmpl, input);
  return p;
}

std::size_t count_label_lines(std::string const& text, std::string const& label) {
  std::string const needle = label + ":";
  std::size_t count = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    if (text.compare(pos, needle.size(), needle) == 0) ++count;
    auto nl = text.find('\n', pos);
    if (nl == std::string::npos) break;
    pos = nl + 1;
  }
  return count;
}

}  // namespace tagshot
