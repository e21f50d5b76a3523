#include "phishaudit/paths.hpp"

#include <cstdlib>

#ifndef PHISHAUDIT_DATA_DIR
#define PHISHAUDIT_DATA_DIR "data"
#endif

namespace phishaudit {

std::string data_dir() {
  const char* env = std::getenv("PHISHAUDIT_DATA_DIR");
  return env != nullptr && *env != '\0' ? env : PHISHAUDIT_DATA_DIR;
}

}  // namespace phishaudit
