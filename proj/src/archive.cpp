#include <algorithm>

#include "unispace/error.hpp"
#include "unispace/server/host.hpp"

namespace uni {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kMagic = "UNISNAP1\n";

bool safe_relative(const std::string& p) {
  if (p.empty() || p.front() == '/') return false;
  for (const auto& part : fs::path(p))
    if (part == ".." || part == ".") return false;
  return true;
}

}  // namespace

// Layout: magic line, manifest line, manifest checksum line, then the file
// bytes in manifest order. Paths are sorted so equal trees give equal archives.
std::string pack_tree(const fs::path& root) {
  std::vector<std::string> paths;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    auto rel = fs::relative(e.path(), root).generic_string();
    if (rel.size() > 4 && rel.substr(rel.size() - 4) == ".tmp") continue;
    paths.push_back(rel);
  }
  std::sort(paths.begin(), paths.end());
  Json files = Json::array();
  std::string body;
  for (const auto& p : paths) {
    auto content = fsutil::read_file(root / p);
    files.push_back(Json{{"path", p}, {"size", content.size()}, {"sha256", sha256_hex(content)}});
    body += content;
  }
  auto manifest = Json{{"files", files}, {"format", 1}}.dump();
  return std::string(kMagic) + manifest + "\n" + sha256_hex(manifest) + "\n" + body;
}

void restore_archive(const fs::path& archive, const fs::path& root) {
  if (fs::exists(root) && !fs::is_empty(root)) fail(Errc::InvalidArgument, "restore target is not empty");
  std::string data;
  try {
    data = fsutil::read_file(archive);
  } catch (const Error&) {
    fail(Errc::ArchiveCorrupt, "cannot read archive");
  }
  auto corrupt = [](const std::string& why) { fail(Errc::ArchiveCorrupt, why); };
  if (data.compare(0, kMagic.size(), kMagic) != 0) corrupt("bad header");
  auto p1 = data.find('\n', kMagic.size());
  if (p1 == std::string::npos) corrupt("no manifest");
  auto manifest = data.substr(kMagic.size(), p1 - kMagic.size());
  auto p2 = data.find('\n', p1 + 1);
  if (p2 == std::string::npos) corrupt("no manifest checksum");
  if (data.substr(p1 + 1, p2 - p1 - 1) != sha256_hex(manifest)) corrupt("manifest checksum mismatch");
  Json files;
  try {
    files = Json::parse(manifest).at("files");
  } catch (const std::exception&) {
    corrupt("manifest");
  }
  std::vector<std::pair<std::string, std::string>> contents;
  std::size_t pos = p2 + 1;
  for (const auto& f : files) {
    std::string path;
    std::size_t size = 0;
    std::string digest;
    try {
      path = f.at("path").get<std::string>();
      size = f.at("size").get<std::size_t>();
      digest = f.at("sha256").get<std::string>();
    } catch (const std::exception&) {
      corrupt("manifest entry");
    }
    if (!safe_relative(path)) corrupt("unsafe path " + path);
    if (pos + size > data.size()) corrupt("truncated at " + path);
    auto content = data.substr(pos, size);
    if (sha256_hex(content) != digest) corrupt("checksum mismatch for " + path);
    contents.emplace_back(path, std::move(content));
    pos += size;
  }
  if (pos != data.size()) corrupt("trailing bytes");

  // Build beside the target and rename into place, so a failure leaves nothing.
  auto parent = root.parent_path().empty() ? fs::path(".") : root.parent_path();
  fs::create_directories(parent);
  auto staging = parent / (root.filename().string() + ".restoring");
  fs::remove_all(staging);
  try {
    fs::create_directories(staging);
    for (const auto& [path, content] : contents) {
      fs::create_directories((staging / path).parent_path());
      fsutil::write_atomic(staging / path, content);
    }
    if (fs::exists(root)) fs::remove(root);
    fs::rename(staging, root);
    fsutil::fsync_dir(parent);
  } catch (...) {
    fs::remove_all(staging);
    throw;
  }
}

}  // namespace uni
