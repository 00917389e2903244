#pragma once

#include <optional>
#include <string>
#include <vector>

#include "chaff/pipeline.hpp"

namespace chaff {

/// One corpus directory: manifest.json, the program, its seed inputs.
struct Manifest {
    std::string dir;
    std::string name;
    std::string source;                          // absolute
    std::string inputs_dir;                      // absolute
    std::vector<std::string> inputs;             // absolute, manifest order
    std::vector<std::string> expected_outputs;
    std::vector<int> expected_exit_codes;
    std::vector<std::string> tags;
    std::optional<Quotas> bugs;                  // the acceptance quota, if any

    bool has_tag(const std::string &t) const;
};

Manifest load_manifest(const std::string &dir);
/// Every subdirectory of `root` holding a manifest.json, sorted by name.
std::vector<Manifest> load_corpus(const std::string &root);

} // namespace chaff
