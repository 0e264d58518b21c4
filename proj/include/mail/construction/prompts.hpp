#pragma once

#include <filesystem>
#include <span>
#include <string>

namespace mail::construction {

enum class TemplateKind { kCaption, kSceneGraph };

std::string_view to_string(TemplateKind kind) noexcept;

// Placeholders: {image} (caption), {caption}, {mentions}, {relations}
// (scene_graph).
struct PromptTemplate {
  TemplateKind kind = TemplateKind::kCaption;
  std::string body;

  // Throws Error(kInvalidConfig) when a scene_graph body misses one of its
  // three placeholders.
  void validate() const;
};

PromptTemplate default_template(TemplateKind kind);
// Reads <dir>/caption.txt or <dir>/scene_graph.txt.
PromptTemplate load_template(const std::filesystem::path& dir, TemplateKind kind);

std::string render_caption_prompt(const PromptTemplate& tpl, const std::string& image_ref);
std::string render_scene_prompt(const PromptTemplate& tpl, const std::string& caption,
                                std::span<const std::string> mentions, std::span<const std::string> relations);

}  // namespace mail::construction
