#pragma once

#include "synaudit/types.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace synaudit {

namespace fs = std::filesystem;

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const fs::path& path);

std::string read_file(const fs::path& path);
/// Writes through a temporary sibling and renames, so readers never see a
/// half-written file.
void write_file(const fs::path& path, std::string_view bytes);

/// One LabeledExample per line: {"x":[...],"y":k} or
/// {"tokens":[...],"reference":[...],"y":k}.
void save_dataset(const fs::path& path, const std::vector<LabeledExample>& examples);
std::vector<LabeledExample> load_dataset(const fs::path& path);

/// Named dense matrices and text blobs in one file.
///
///   "SYNAUDIT" | u32 version | u32 entry count | entries...
///   entry: u32 name length | name | u8 kind
///     kind 0: u64 rows | u64 cols | rows*cols f64, row-major
///     kind 1: u64 length | bytes
///
/// All integers and floats little-endian.
struct Container {
  static constexpr std::uint32_t kVersion = 1;

  std::map<std::string, Eigen::MatrixXd> matrices;
  std::map<std::string, std::string> texts;

  const Eigen::MatrixXd& matrix(const std::string& name) const;
  const std::string& text(const std::string& name) const;

  std::string serialize() const;
  static Container parse(std::string_view bytes);

  void save(const fs::path& path) const { write_file(path, serialize()); }
  static Container load(const fs::path& path) { return parse(read_file(path)); }
};

}  // namespace synaudit
