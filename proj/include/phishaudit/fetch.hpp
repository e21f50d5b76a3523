#pragma once

#include <string>

namespace phishaudit {

// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);

// HTTP(S) GET into path, following redirects. Throws Error(kIo).
void download(const std::string& url, const std::string& path);

}  // namespace phishaudit
