#include "ifqa/fsutil.hpp"

#include <atomic>
#include <fstream>
#include <string>
#include <unistd.h>

#include "ifqa/errors.hpp"

namespace fs = std::filesystem;

namespace ifqa {
namespace {

fs::path temp_sibling(const fs::path& path) {
  static std::atomic<unsigned> counter{0};
  return path.parent_path() /
         ("." + path.filename().string() + ".tmp." + std::to_string(::getpid()) + "." +
          std::to_string(counter++));
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
}

}  // namespace

void atomic_write_with(const fs::path& path, const std::function<void(const fs::path&)>& writer) {
  ensure_parent(path);
  const fs::path tmp = temp_sibling(path);
  try {
    writer(tmp);
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename onto " + path.string());
  }
}

void atomic_write(const fs::path& path, std::span<const unsigned char> bytes) {
  atomic_write_with(path, [&](const fs::path& tmp) {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  });
}

void atomic_write(const fs::path& path, std::string_view text) {
  atomic_write(path, std::span<const unsigned char>(
                         reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

}  // namespace ifqa
