#include "synaudit/io.hpp"

#include "synaudit/error.hpp"

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <unistd.h>

namespace synaudit {

using nlohmann::json;

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    fail(Errc::IoError, "sha256 failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_file(path)); }

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoError, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) fail(Errc::IoError, "read failed: " + path.string());
  return std::move(buf).str();
}

void write_file(const fs::path& path, std::string_view bytes) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::IoError, "cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(Errc::IoError, "write failed: " + path.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(Errc::IoError, "rename failed for " + path.string());
  }
}

// ---- datasets --------------------------------------------------------------

void save_dataset(const fs::path& path, const std::vector<LabeledExample>& examples) {
  std::string out;
  for (const auto& ex : examples) {
    json line;
    if (ex.is_features()) {
      const auto& x = ex.features();
      line["x"] = std::vector<double>(x.data(), x.data() + x.size());
    } else {
      line["tokens"] = ex.tokens();
      if (!ex.reference.empty()) line["reference"] = ex.reference;
    }
    line["y"] = ex.label;
    out += line.dump();
    out += '\n';
  }
  write_file(path, out);
}

std::vector<LabeledExample> load_dataset(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::vector<LabeledExample> out;
  std::string line;
  std::size_t lineno = 0;
  Eigen::Index width = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = path.string() + ":" + std::to_string(lineno);
    try {
      const json rec = json::parse(line);
      LabeledExample ex;
      ex.label = rec.at("y").get<int>();
      if (rec.contains("x")) {
        const auto values = rec.at("x").get<std::vector<double>>();
        Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
        if (width >= 0 && x.size() != width) fail(Errc::DimensionMismatch, where + ": inconsistent feature width");
        width = x.size();
        ex.input = std::move(x);
      } else {
        auto tokens = rec.at("tokens").get<TokenSeq>();
        if (tokens.empty()) fail(Errc::SchemaError, where + ": empty token sequence");
        ex.input = std::move(tokens);
        if (rec.contains("reference")) ex.reference = rec.at("reference").get<TokenSeq>();
      }
      out.push_back(std::move(ex));
    } catch (const json::exception& e) {
      fail(Errc::SchemaError, where + ": " + e.what());
    }
  }
  return out;
}

// ---- container -------------------------------------------------------------

namespace {

constexpr std::string_view kMagic = "SYNAUDIT";

template <typename T>
void put(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) { put(out, std::bit_cast<std::uint64_t>(v)); }

struct Reader {
  std::string_view bytes;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (bytes.size() - pos < n) fail(Errc::SchemaError, "container truncated at byte " + std::to_string(pos));
  }
  template <typename T>
  T get() {
    need(sizeof(T));
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      value |= static_cast<T>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    pos += sizeof(T);
    return value;
  }
  double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

const Eigen::MatrixXd& Container::matrix(const std::string& name) const {
  auto it = matrices.find(name);
  if (it == matrices.end()) fail(Errc::SchemaError, "container has no matrix '" + name + "'");
  return it->second;
}

const std::string& Container::text(const std::string& name) const {
  auto it = texts.find(name);
  if (it == texts.end()) fail(Errc::SchemaError, "container has no text '" + name + "'");
  return it->second;
}

std::string Container::serialize() const {
  std::string out(kMagic);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(matrices.size() + texts.size()));
  for (const auto& [name, m] : matrices) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint8_t>(out, 0);
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) put_f64(out, m(r, c));
  }
  for (const auto& [name, t] : texts) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint8_t>(out, 1);
    put<std::uint64_t>(out, t.size());
    out += t;
  }
  return out;
}

Container Container::parse(std::string_view bytes) {
  Reader in{bytes};
  if (in.take(kMagic.size()) != kMagic) fail(Errc::SchemaError, "bad container magic");
  const auto version = in.get<std::uint32_t>();
  if (version != kVersion) fail(Errc::SchemaError, "unsupported container version " + std::to_string(version));
  const auto count = in.get<std::uint32_t>();
  Container c;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = in.get<std::uint32_t>();
    std::string name(in.take(name_len));
    const auto kind = in.get<std::uint8_t>();
    if (kind == 0) {
      const auto rows = in.get<std::uint64_t>();
      const auto cols = in.get<std::uint64_t>();
      if (cols != 0 && rows > (bytes.size() / 8) / cols) fail(Errc::SchemaError, "matrix '" + name + "' too large");
      Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index col = 0; col < m.cols(); ++col) m(r, col) = in.get_f64();
      c.matrices.emplace(std::move(name), std::move(m));
    } else if (kind == 1) {
      const auto len = in.get<std::uint64_t>();
      c.texts.emplace(std::move(name), std::string(in.take(len)));
    } else {
      fail(Errc::SchemaError, "unknown entry kind " + std::to_string(kind));
    }
  }
  if (in.pos != bytes.size()) fail(Errc::SchemaError, "trailing bytes after container");
  return c;
}

}  // namespace synaudit
