#pragma once

#include <map>
#include <string>

namespace ace {

/// Prompt templates are data: plain text with {{placeholder}} slots. The
/// built-in defaults can be overridden per template by files in a directory
/// (generator_system.txt, generator_user.txt, reflector_system.txt, ...).
class PromptLibrary {
 public:
  static PromptLibrary defaults();
  /// Defaults plus any overrides found in `dir`.
  static PromptLibrary load_dir(const std::string& dir);

  const std::string& get(const std::string& name) const;
  void set(const std::string& name, std::string text);

  /// Replaces every {{key}} in the named template with vars.at(key).
  std::string expand(const std::string& name,
                     const std::map<std::string, std::string>& vars) const;

 private:
  std::map<std::string, std::string> templates_;
};

std::string expand_template(const std::string& tmpl,
                            const std::map<std::string, std::string>& vars);

}  // namespace ace
