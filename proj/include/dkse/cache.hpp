#pragma once

#include <string>

#include "dkse/ingest.hpp"

namespace dkse {

// TSV cache of a processed DatasetSplit, magic line "DKSE-SPLIT v1".
// Each data line: split tag (train|val|test), user id, item id, label.
std::string encode_split(const DatasetSplit& split);
// Restores the pair lists; id maps come from the sidecar.
DatasetSplit decode_split(const std::string& text);

// Sidecar mapping dense ids back to source names, magic "DKSE-IDMAP v1".
std::string encode_idmaps(const IdMap& users, const IdMap& items);
void decode_idmaps(const std::string& text, IdMap* users, IdMap* items);

void save_split(const std::string& split_path, const std::string& idmap_path,
                const DatasetSplit& split);
DatasetSplit load_split(const std::string& split_path,
                        const std::string& idmap_path);

}  // namespace dkse
