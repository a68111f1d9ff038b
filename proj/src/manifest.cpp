#include "iprrn/manifest.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include <openssl/evp.h>

#include "iprrn/data.hpp"
#include "iprrn/errors.hpp"

namespace fs = std::filesystem;

namespace iprrn {

namespace {

class Sha1 {
 public:
  Sha1() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha1(), nullptr) != 1) throw std::runtime_error("SHA-1 init failed");
  }
  void update(std::string_view data) { EVP_DigestUpdate(ctx_.get(), data.data(), data.size()); }
  std::string hex() {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), digest, &len);
    std::ostringstream out;
    for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int{digest[i]};
    return out.str();
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

std::string read_bytes(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw InputError("cannot read " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string git_blob_hash(const fs::path& file) {
  const std::string content = read_bytes(file);
  Sha1 sha;
  const std::string header = "blob " + std::to_string(content.size());
  sha.update(header);
  sha.update(std::string_view("\0", 1));
  sha.update(content);
  return sha.hex();
}

std::string content_hash(const std::vector<fs::path>& inputs) {
  std::vector<std::string> lines;
  for (const auto& input : inputs) {
    if (fs::is_regular_file(input)) {
      lines.push_back(input.filename().string() + " " + git_blob_hash(input));
    } else if (fs::is_directory(input)) {
      for (const auto& entry : fs::recursive_directory_iterator(input)) {
        if (!entry.is_regular_file() || entry.path().filename() == kRunManifest) continue;
        lines.push_back(fs::relative(entry.path(), input).generic_string() + " " + git_blob_hash(entry.path()));
      }
    }
  }
  std::sort(lines.begin(), lines.end());
  Sha1 sha;
  for (const auto& l : lines) {
    sha.update(l);
    sha.update("\n");
  }
  return sha.hex();
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

std::string RunManifest::render() const {
  KvDocument doc;
  doc.set("run", "command", command);
  doc.set("run", "seed", std::to_string(seed));
  doc.set("run", "input_hash", input_hash);
  doc.set("run", "started_at", started_at);
  doc.set("run", "finished_at", finished_at);
  std::string text = doc.render();
  const std::string rest = config.render();
  if (!rest.empty()) text += "\n" + rest;
  return text;
}

void RunManifest::write(const fs::path& out_dir) const {
  fs::create_directories(out_dir);
  std::ofstream out(out_dir / kRunManifest, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write manifest in " + out_dir.string());
  out << render();
}

}  // namespace iprrn
