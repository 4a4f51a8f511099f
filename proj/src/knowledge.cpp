#include "ognav/knowledge.hpp"
#include "ognav/errors.hpp"
#include "ognav/world.hpp"

#include <fstream>
#include <sstream>

namespace ognav {

AnchorConfig parse_anchor_config(std::string_view text) {
    AnchorConfig cfg;
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto tok = tokenize(line);
        if (tok.empty()) continue;
        if (tok[0] == "anchor" && tok.size() == 2) {
            cfg.anchor_labels.insert(tok[1]);
        } else if (tok[0] == "synonym" && tok.size() == 3) {
            cfg.synonyms.add(tok[1], tok[2]);
        } else {
            throw ParseError("anchor config line " + std::to_string(line_no) + ": cannot parse");
        }
    }
    return cfg;
}

AnchorConfig load_anchor_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_anchor_config(ss.str());
}

const PromptTemplate& Knowledge::prompt(PromptRole role) const {
    auto it = prompts.find(role);
    if (it == prompts.end()) throw TemplateError(std::string("no template for role ") + to_string(role));
    return it->second;
}

Knowledge Knowledge::load(const std::filesystem::path& data_dir) {
    Knowledge k;
    k.anchors = load_anchor_config(data_dir / "config" / "anchors.txt");
    if (k.anchors.anchor_labels.empty()) throw ParseError("anchor list is empty");
    k.affinity = AffinityTable::load(data_dir / "config" / "affinity.txt");
    for (PromptRole r : {PromptRole::pruner, PromptRole::planner, PromptRole::caption, PromptRole::verify,
                         PromptRole::label_resolve}) {
        const auto path = data_dir / "prompts" / (std::string(to_string(r)) + ".txt");
        if (std::filesystem::exists(path)) k.prompts.emplace(r, PromptTemplate::load(r, path));
    }
    return k;
}

}  // namespace ognav
