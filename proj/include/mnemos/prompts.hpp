#pragma once

#include <filesystem>
#include <map>
#include <string>

namespace mnemos {

// System and user templates for the three LLM roles. Placeholders are
// written {{name}}.
struct PromptSet {
    std::string extractor_system;
    std::string extractor_user;
    std::string answerer_system;
    std::string answerer_user;
    std::string critic_system;
    std::string critic_user;

    // The templates shipped in prompts/, compiled in.
    static PromptSet builtin();
    // Reads <role>.system.txt / <role>.user.txt from `dir`. Missing files
    // fall back to the built-in template.
    static PromptSet load(const std::filesystem::path& dir);

    friend bool operator==(const PromptSet&, const PromptSet&) = default;
};

// Replaces every {{key}}; unknown placeholders are left as they are.
std::string render_template(const std::string& tmpl, const std::map<std::string, std::string>& vars);

// "2024-03-15 09:30 UTC"
std::string format_timestamp(long long ms_since_epoch);

} // namespace mnemos
