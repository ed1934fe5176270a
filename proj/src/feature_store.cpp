#include "pgki/feature_store.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "pgki/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "NPY payloads are decoded assuming a little-endian host");

namespace pgki {
namespace {

constexpr char kMagic[] = "\x93NUMPY";
constexpr std::size_t kMagicLen = 6;
constexpr std::size_t kPreludeLen = kMagicLen + 2 + 2;

std::string lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// Parser for the Python dict literal NPY uses as its header, restricted to
// the three keys the format defines.
class HeaderParser {
 public:
  explicit HeaderParser(std::string_view text) : text_(text) {}

  struct Header {
    std::string descr;
    bool fortran_order = false;
    std::vector<std::size_t> shape;
  };

  Header parse() {
    Header header;
    bool have_descr = false, have_order = false, have_shape = false;
    expect('{');
    while (true) {
      skip_ws();
      if (peek() == '}') break;
      std::string key = parse_string();
      expect(':');
      skip_ws();
      if (key == "descr") {
        header.descr = parse_string();
        have_descr = true;
      } else if (key == "fortran_order") {
        header.fortran_order = parse_bool();
        have_order = true;
      } else if (key == "shape") {
        header.shape = parse_tuple();
        have_shape = true;
      } else {
        fail("unexpected header key '" + key + "'");
      }
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      skip_ws();
      if (peek() != '}') fail("expected ',' or '}'");
    }
    ++pos_;
    skip_ws();
    if (pos_ != text_.size()) fail("trailing bytes after header dict");
    if (!have_descr || !have_order || !have_shape) {
      fail("header must define descr, fortran_order and shape");
    }
    return header;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(Errc::MalformedHeader, "npy header: " + what);
  }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void skip_ws() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
  }

  void expect(char c) {
    skip_ws();
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::string parse_string() {
    skip_ws();
    const char quote = peek();
    if (quote != '\'' && quote != '"') fail("expected quoted string");
    const std::size_t end = text_.find(quote, pos_ + 1);
    if (end == std::string_view::npos) fail("unterminated string");
    std::string out(text_.substr(pos_ + 1, end - pos_ - 1));
    pos_ = end + 1;
    return out;
  }

  bool parse_bool() {
    if (text_.substr(pos_, 4) == "True") {
      pos_ += 4;
      return true;
    }
    if (text_.substr(pos_, 5) == "False") {
      pos_ += 5;
      return false;
    }
    fail("expected True or False");
  }

  std::vector<std::size_t> parse_tuple() {
    std::vector<std::size_t> dims;
    expect('(');
    while (true) {
      skip_ws();
      if (peek() == ')') break;
      if (!std::isdigit(static_cast<unsigned char>(peek()))) fail("bad shape entry");
      std::size_t value = 0;
      while (std::isdigit(static_cast<unsigned char>(peek()))) {
        const std::size_t digit = static_cast<std::size_t>(peek() - '0');
        if (value > (std::numeric_limits<std::size_t>::max() - digit) / 10) {
          fail("shape entry overflows");
        }
        value = value * 10 + digit;
        ++pos_;
      }
      dims.push_back(value);
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      skip_ws();
      if (peek() != ')') fail("expected ',' or ')' in shape");
    }
    ++pos_;
    return dims;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

std::string header_dict(NpyDtype dtype, std::size_t rows, std::size_t dim) {
  std::ostringstream dict;
  dict << "{'descr': '" << (dtype == NpyDtype::Float32 ? "<f4" : "<f8")
       << "', 'fortran_order': False, 'shape': (" << rows << ", " << dim << "), }";
  return dict.str();
}

}  // namespace

std::string_view to_string(Label label) noexcept {
  return label == Label::Fake ? "fake" : "real";
}

std::string_view to_string(Split split) noexcept {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

Label parse_label(std::string_view text) {
  const std::string folded = lower(text);
  if (folded == "real") return Label::Real;
  if (folded == "fake") return Label::Fake;
  throw Error(Errc::UnknownLabel, "unknown label '" + std::string(text) + "'");
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::Train;
  if (text == "val") return Split::Val;
  if (text == "test") return Split::Test;
  throw Error(Errc::UnknownSplit, "unknown split '" + std::string(text) + "'");
}

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t dim,
                             std::vector<double> values)
    : rows_(rows), dim_(dim), values_(std::move(values)) {
  if (rows_ * dim_ != values_.size()) {
    throw Error(Errc::ShapeMismatch, "matrix shape disagrees with value count");
  }
  for (double v : values_) {
    if (!std::isfinite(v)) {
      throw Error(Errc::NonFiniteValue, "feature matrix contains NaN or Inf");
    }
  }
}

std::span<const double> FeatureMatrix::row(std::size_t index) const {
  if (index >= rows_) {
    throw Error(Errc::RowOutOfRange, "row " + std::to_string(index) +
                                         " out of range for " +
                                         std::to_string(rows_) + " rows");
  }
  return std::span<const double>(values_).subspan(index * dim_, dim_);
}

FeatureMatrix parse_npy(std::span<const std::byte> bytes) {
  if (bytes.size() < kPreludeLen ||
      std::memcmp(bytes.data(), kMagic, kMagicLen) != 0) {
    throw Error(Errc::MalformedHeader, "npy: missing magic string");
  }
  const auto major = std::to_integer<unsigned>(bytes[6]);
  const auto minor = std::to_integer<unsigned>(bytes[7]);
  if (major != 1 || minor != 0) {
    throw Error(Errc::MalformedHeader, "npy: unsupported format version " +
                                           std::to_string(major) + "." +
                                           std::to_string(minor));
  }
  const std::size_t header_len = std::to_integer<std::size_t>(bytes[8]) |
                                 (std::to_integer<std::size_t>(bytes[9]) << 8);
  if (kPreludeLen + header_len > bytes.size()) {
    throw Error(Errc::MalformedHeader, "npy: header length exceeds file size");
  }
  const std::string_view header_text(
      reinterpret_cast<const char*>(bytes.data()) + kPreludeLen, header_len);
  const auto header = HeaderParser(header_text).parse();

  std::size_t item_size = 0;
  if (header.descr == "<f4") {
    item_size = 4;
  } else if (header.descr == "<f8") {
    item_size = 8;
  } else {
    throw Error(Errc::UnsupportedDtype, "npy: unsupported dtype '" + header.descr + "'");
  }
  if (header.shape.size() != 2) {
    throw Error(Errc::ShapeMismatch, "npy: expected a 2-D array, got " +
                                         std::to_string(header.shape.size()) + "-D");
  }
  if (header.fortran_order) {
    throw Error(Errc::ShapeMismatch, "npy: fortran-ordered arrays are not supported");
  }
  const std::size_t rows = header.shape[0];
  const std::size_t dim = header.shape[1];
  const std::size_t payload = bytes.size() - kPreludeLen - header_len;
  if (dim != 0 && rows > std::numeric_limits<std::size_t>::max() / dim / item_size) {
    throw Error(Errc::TruncatedPayload, "npy: shape overflows addressable size");
  }
  if (rows * dim * item_size != payload) {
    throw Error(Errc::TruncatedPayload,
                "npy: payload holds " + std::to_string(payload) + " bytes, shape needs " +
                    std::to_string(rows * dim * item_size));
  }

  const std::byte* data = bytes.data() + kPreludeLen + header_len;
  std::vector<double> values(rows * dim);
  if (item_size == 4) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      float f;
      std::memcpy(&f, data + i * 4, 4);
      values[i] = static_cast<double>(f);
    }
  } else {
    std::memcpy(values.data(), data, values.size() * 8);
  }
  return FeatureMatrix(rows, dim, std::move(values));
}

FeatureMatrix read_npy(const std::filesystem::path& path) {
  const std::string raw = read_file(path);
  return parse_npy(std::as_bytes(std::span<const char>(raw.data(), raw.size())));
}

std::vector<std::byte> serialize_npy(const FeatureMatrix& matrix, NpyDtype dtype) {
  std::string dict = header_dict(dtype, matrix.rows(), matrix.dim());
  // Pad with spaces so the payload starts on a 64-byte boundary; the header
  // ends with a newline.
  const std::size_t unpadded = kPreludeLen + dict.size() + 1;
  dict.append((64 - unpadded % 64) % 64, ' ');
  dict.push_back('\n');

  const std::size_t item_size = dtype == NpyDtype::Float32 ? 4 : 8;
  std::vector<std::byte> out(kPreludeLen + dict.size() +
                             matrix.values().size() * item_size);
  std::memcpy(out.data(), kMagic, kMagicLen);
  out[6] = std::byte{1};
  out[7] = std::byte{0};
  out[8] = static_cast<std::byte>(dict.size() & 0xff);
  out[9] = static_cast<std::byte>((dict.size() >> 8) & 0xff);
  std::memcpy(out.data() + kPreludeLen, dict.data(), dict.size());

  std::byte* payload = out.data() + kPreludeLen + dict.size();
  const auto values = matrix.values();
  if (dtype == NpyDtype::Float32) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      const float f = static_cast<float>(values[i]);
      std::memcpy(payload + i * 4, &f, 4);
    }
  } else {
    std::memcpy(payload, values.data(), values.size() * 8);
  }
  return out;
}

void write_npy(const std::filesystem::path& path, const FeatureMatrix& matrix,
               NpyDtype dtype) {
  const auto bytes = serialize_npy(matrix, dtype);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::IoError, "failed writing " + path.string());
}

std::size_t DatasetManifest::count(Split split) const noexcept {
  return static_cast<std::size_t>(std::count_if(
      entries.begin(), entries.end(), [split](const auto& e) { return e.split == split; }));
}

const ManifestEntry* DatasetManifest::find(std::string_view image_id) const noexcept {
  for (const auto& entry : entries) {
    if (entry.image_id == image_id) return &entry;
  }
  return nullptr;
}

DatasetManifest load_manifest(std::string_view text) {
  using nlohmann::json;
  DatasetManifest manifest;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    const std::string where = "manifest line " + std::to_string(line_no) + ": ";
    json record = json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object()) {
      throw Error(Errc::MalformedRecord, where + "not a JSON object");
    }
    for (const auto& [key, _] : record.items()) {
      if (key != "image_id" && key != "row" && key != "label" && key != "split" &&
          key != "explanation") {
        throw Error(Errc::MalformedRecord, where + "unexpected key '" + key + "'");
      }
    }
    const auto field = [&](const char* key) -> const json& {
      auto it = record.find(key);
      if (it == record.end()) {
        throw Error(Errc::MalformedRecord, where + "missing key '" + key + "'");
      }
      return *it;
    };
    const json& id = field("image_id");
    const json& row = field("row");
    const json& label = field("label");
    const json& split = field("split");
    if (!id.is_string() || id.get_ref<const std::string&>().empty()) {
      throw Error(Errc::MalformedRecord, where + "image_id must be a non-empty string");
    }
    if (!row.is_number_unsigned()) {
      throw Error(Errc::MalformedRecord, where + "row must be a non-negative integer");
    }
    if (!label.is_string() || !split.is_string()) {
      throw Error(Errc::MalformedRecord, where + "label and split must be strings");
    }

    ManifestEntry entry;
    entry.image_id = id.get<std::string>();
    entry.row = row.get<std::size_t>();
    entry.label = parse_label(label.get_ref<const std::string&>());
    entry.split = parse_split(split.get_ref<const std::string&>());
    if (auto it = record.find("explanation"); it != record.end() && !it->is_null()) {
      if (!it->is_string()) {
        throw Error(Errc::MalformedRecord, where + "explanation must be a string");
      }
      entry.explanation = it->get<std::string>();
    }
    if (!seen.insert(entry.image_id).second) {
      throw Error(Errc::DuplicateId, where + "duplicate image_id '" + entry.image_id + "'");
    }
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  return load_manifest(read_file(path));
}

std::string dump_manifest(const DatasetManifest& manifest) {
  std::string out;
  for (const auto& entry : manifest.entries) {
    nlohmann::ordered_json record;
    record["image_id"] = entry.image_id;
    record["row"] = entry.row;
    record["label"] = to_string(entry.label);
    record["split"] = to_string(entry.split);
    if (entry.explanation) record["explanation"] = *entry.explanation;
    out += record.dump();
    out += '\n';
  }
  return out;
}

std::vector<FeatureRecord> join(const FeatureMatrix& matrix,
                                const DatasetManifest& manifest) {
  for (const auto& entry : manifest.entries) {
    if (entry.row >= matrix.rows()) {
      throw Error(Errc::RowOutOfRange,
                  "image '" + entry.image_id + "' references row " +
                      std::to_string(entry.row) + " but the matrix has " +
                      std::to_string(matrix.rows()) + " rows");
    }
  }
  std::vector<FeatureRecord> records;
  records.reserve(manifest.entries.size());
  for (const auto& entry : manifest.entries) {
    const auto row = matrix.row(entry.row);
    records.push_back({entry.image_id, std::vector<double>(row.begin(), row.end()),
                       entry.label, entry.split});
  }
  return records;
}

std::vector<FeatureRecord> select_split(const std::vector<FeatureRecord>& records,
                                        Split split) {
  std::vector<FeatureRecord> out;
  std::copy_if(records.begin(), records.end(), std::back_inserter(out),
               [split](const FeatureRecord& r) { return r.split == split; });
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw Error(Errc::NotFound, "file not found: " + path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace pgki
