#include "chaff/corpus.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace chaff {

namespace fs = std::filesystem;

bool Manifest::has_tag(const std::string &t) const
{
    return std::find(tags.begin(), tags.end(), t) != tags.end();
}

Manifest load_manifest(const std::string &dir)
{
    fs::path root = fs::absolute(dir);
    std::ifstream in(root / "manifest.json");
    if (!in)
        throw std::runtime_error("no manifest.json in " + root.string());
    nlohmann::json j = nlohmann::json::parse(in);

    Manifest m;
    m.dir = root.string();
    m.name = root.filename().string();
    m.source = (root / j.at("source").get<std::string>()).string();
    for (const auto &p : j.at("inputs"))
        m.inputs.push_back((root / p.get<std::string>()).string());
    m.inputs_dir = m.inputs.empty() ? (root / "inputs").string() : fs::path(m.inputs.front()).parent_path().string();
    m.expected_outputs = j.value("expected_outputs", std::vector<std::string>{});
    m.expected_exit_codes = j.value("expected_exit_codes", std::vector<int>{});
    m.tags = j.value("tags", std::vector<std::string>{});
    if (j.contains("bugs"))
        m.bugs = parse_quotas(j["bugs"].get<std::string>());
    if (m.expected_outputs.size() != m.inputs.size() || m.expected_exit_codes.size() != m.inputs.size())
        throw std::runtime_error(m.name + ": expected outputs and exit codes must match the inputs");
    return m;
}

std::vector<Manifest> load_corpus(const std::string &root)
{
    std::vector<fs::path> dirs;
    for (const auto &e : fs::directory_iterator(root))
        if (e.is_directory() && fs::exists(e.path() / "manifest.json"))
            dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    std::vector<Manifest> out;
    for (const auto &d : dirs)
        out.push_back(load_manifest(d.string()));
    return out;
}

} // namespace chaff
