#pragma once

#include <map>
#include <string>

#include "skelpaint/network.hpp"

namespace skelpaint {

// Versioned binary container: magic "SKLP", format version, a structured-text
// config header (key = value lines), then named parameter blobs (name, shape,
// row-major 64-bit float data, little-endian). Round-trips bit-exactly.
void save_params(const std::string& path, const ParamPack& pack, const std::map<std::string, std::string>& header);

struct LoadedParams {
    ParamPack pack;
    std::map<std::string, std::string> header;
};
LoadedParams load_params(const std::string& path);

// Repaint-model wrappers: architecture config goes into the header, so a
// checkpoint is self-describing. `extra` lets callers persist run settings
// (input mode, mask ratio) next to the model.
void save_model(const std::string& path, const RepaintModel& model,
                const std::map<std::string, std::string>& extra = {});

struct LoadedModel {
    RepaintModel model;
    std::map<std::string, std::string> extra;
};
LoadedModel load_model(const std::string& path);

}  // namespace skelpaint
