#pragma once

#include "ognav/llmgw.hpp"
#include "ognav/planner.hpp"
#include "ognav/pruner.hpp"

#include <filesystem>
#include <map>

namespace ognav {

// Lines: anchor "<label>" | synonym "<alias>" "<canonical>"
AnchorConfig parse_anchor_config(std::string_view text);
AnchorConfig load_anchor_config(const std::filesystem::path& path);

// Everything the agent knows before an episode: anchor categories, the
// affinity table and the prompt templates of each model role.
struct Knowledge {
    AnchorConfig anchors;
    AffinityTable affinity;
    std::map<PromptRole, PromptTemplate> prompts;

    const PromptTemplate& prompt(PromptRole role) const;

    // Reads config/anchors.txt, config/affinity.txt and prompts/<role>.txt under data_dir.
    static Knowledge load(const std::filesystem::path& data_dir);
};

}  // namespace ognav
