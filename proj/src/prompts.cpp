#include "mnemos/prompts.hpp"

#include <ctime>
#include <fstream>
#include <sstream>

namespace mnemos {

namespace {

void read_if_present(const std::filesystem::path& file, std::string& into) {
    std::ifstream in(file, std::ios::binary);
    if (!in) return;
    std::stringstream ss;
    ss << in.rdbuf();
    into = ss.str();
}

} // namespace

PromptSet PromptSet::load(const std::filesystem::path& dir) {
    auto p = builtin();
    read_if_present(dir / "extractor.system.txt", p.extractor_system);
    read_if_present(dir / "extractor.user.txt", p.extractor_user);
    read_if_present(dir / "answerer.system.txt", p.answerer_system);
    read_if_present(dir / "answerer.user.txt", p.answerer_user);
    read_if_present(dir / "critic.system.txt", p.critic_system);
    read_if_present(dir / "critic.user.txt", p.critic_user);
    return p;
}

std::string render_template(const std::string& tmpl,
                            const std::map<std::string, std::string>& vars) {
    std::string out;
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        auto open = tmpl.find("{{", pos);
        if (open == std::string::npos) break;
        auto close = tmpl.find("}}", open + 2);
        if (close == std::string::npos) break;
        out.append(tmpl, pos, open - pos);
        auto it = vars.find(tmpl.substr(open + 2, close - open - 2));
        if (it != vars.end()) {
            out += it->second;
        } else {
            out.append(tmpl, open, close + 2 - open);
        }
        pos = close + 2;
    }
    out.append(tmpl, pos, std::string::npos);
    return out;
}

std::string format_timestamp(long long ms) {
    std::time_t secs = static_cast<std::time_t>(ms / 1000);
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%d %H:%M UTC", &tm);
    return buf;
}

} // namespace mnemos
