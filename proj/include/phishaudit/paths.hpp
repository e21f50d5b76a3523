#pragma once

#include <string>

namespace phishaudit {

// Directory holding schema_mapping.csv, shorteners.txt and tlds.txt:
// $PHISHAUDIT_DATA_DIR when set and non-empty, else the source tree's data/.
std::string data_dir();

}  // namespace phishaudit
