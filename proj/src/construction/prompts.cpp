#include "mail/construction/prompts.hpp"

#include <fstream>
#include <sstream>

#include "mail/error.hpp"
#include "mail_default_templates.hpp"

namespace mail::construction {

namespace {

void replace_all(std::string& text, const std::string& key, const std::string& value) {
  for (std::size_t pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size())) {
    text.replace(pos, key.size(), value);
  }
}

std::string join(std::span<const std::string> items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ", ") + s;
  return out;
}

}  // namespace

std::string_view to_string(TemplateKind kind) noexcept {
  return kind == TemplateKind::kCaption ? "caption" : "scene_graph";
}

void PromptTemplate::validate() const {
  if (body.empty()) throw Error(ErrorCode::kInvalidConfig, std::string(to_string(kind)) + " template is empty");
  if (kind != TemplateKind::kSceneGraph) return;
  for (const char* key : {"{caption}", "{mentions}", "{relations}"}) {
    if (body.find(key) == std::string::npos) {
      throw Error(ErrorCode::kInvalidConfig, std::string("scene_graph template lacks ") + key);
    }
  }
}

PromptTemplate default_template(TemplateKind kind) {
  return PromptTemplate{kind, kind == TemplateKind::kCaption ? kDefaultCaptionTemplate : kDefaultSceneGraphTemplate};
}

PromptTemplate load_template(const std::filesystem::path& dir, TemplateKind kind) {
  const auto path = dir / (std::string(to_string(kind)) + ".txt");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read template " + path.string());
  std::ostringstream body;
  body << in.rdbuf();
  PromptTemplate tpl{kind, body.str()};
  tpl.validate();
  return tpl;
}

std::string render_caption_prompt(const PromptTemplate& tpl, const std::string& image_ref) {
  std::string out = tpl.body;
  if (out.find("{image}") == std::string::npos) {
    out += "\nImage: " + image_ref;
  } else {
    replace_all(out, "{image}", image_ref);
  }
  return out;
}

std::string render_scene_prompt(const PromptTemplate& tpl, const std::string& caption,
                                std::span<const std::string> mentions, std::span<const std::string> relations) {
  tpl.validate();
  std::string out = tpl.body;
  replace_all(out, "{relations}", join(relations));
  replace_all(out, "{mentions}", join(mentions));
  // caption last so braces inside it are never treated as placeholders
  replace_all(out, "{caption}", caption);
  return out;
}

}  // namespace mail::construction
