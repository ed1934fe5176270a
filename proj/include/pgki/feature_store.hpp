#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pgki {

inline constexpr std::size_t kClsDim = 1024;

enum class Label { Real, Fake };
enum class Split { Train, Val, Test };

std::string_view to_string(Label label) noexcept;
std::string_view to_string(Split split) noexcept;
/// Case-insensitive "real" / "fake".
Label parse_label(std::string_view text);
Split parse_split(std::string_view text);

/// Row-major matrix of finite doubles.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t dim, std::vector<double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t dim() const noexcept { return dim_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<const double> row(std::size_t index) const;

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> values_;
};

enum class NpyDtype { Float32, Float64 };

/// Accepts NPY v1.0, little-endian f4/f8, 2-D, C order. Float32 payloads are
/// widened to double. Throws pgki::Error; never returns a partial matrix.
FeatureMatrix parse_npy(std::span<const std::byte> bytes);
FeatureMatrix read_npy(const std::filesystem::path& path);

std::vector<std::byte> serialize_npy(const FeatureMatrix& matrix,
                                     NpyDtype dtype = NpyDtype::Float64);
void write_npy(const std::filesystem::path& path, const FeatureMatrix& matrix,
               NpyDtype dtype = NpyDtype::Float64);

struct ManifestEntry {
  std::string image_id;
  std::size_t row = 0;
  Label label = Label::Real;
  Split split = Split::Train;
  std::optional<std::string> explanation;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;

  std::size_t count(Split split) const noexcept;
  const ManifestEntry* find(std::string_view image_id) const noexcept;
};

/// NDJSON, one record per line with keys image_id, row, label, split and an
/// optional explanation. Blank lines are skipped. Row bounds are checked by
/// join(), not here.
DatasetManifest load_manifest(std::string_view text);
DatasetManifest read_manifest(const std::filesystem::path& path);
std::string dump_manifest(const DatasetManifest& manifest);

struct FeatureRecord {
  std::string image_id;
  std::vector<double> features;
  Label label = Label::Real;
  Split split = Split::Train;
};

std::vector<FeatureRecord> join(const FeatureMatrix& matrix,
                                const DatasetManifest& manifest);

std::vector<FeatureRecord> select_split(const std::vector<FeatureRecord>& records,
                                        Split split);

std::string read_file(const std::filesystem::path& path);

}  // namespace pgki
