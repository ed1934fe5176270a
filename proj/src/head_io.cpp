#include "pgki/head_io.hpp"

#include <fstream>

#include <json.hpp>

#include "pgki/error.hpp"

namespace pgki {

void save_head(const std::filesystem::path& dir, const StoredHead& head) {
  const HeadParams& p = head.params;
  p.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::IoError, "cannot create " + dir.string() + ": " + ec.message());

  write_npy(dir / "W1.npy", FeatureMatrix(p.dim, p.hidden, p.w1));
  write_npy(dir / "b1.npy", FeatureMatrix(1, p.hidden, p.b1));
  write_npy(dir / "W2.npy", FeatureMatrix(p.hidden, 1, p.w2));
  write_npy(dir / "b2.npy", FeatureMatrix(1, 1, {p.b2}));

  nlohmann::ordered_json sidecar;
  sidecar["dim"] = p.dim;
  sidecar["hidden"] = p.hidden;
  sidecar["dropout_p"] = head.metadata.dropout_p;
  sidecar["leaky_slope"] = head.metadata.leaky_slope;
  sidecar["seed"] = head.metadata.seed;
  sidecar["val_accuracy"] = head.metadata.val_accuracy;
  sidecar["l2_normalize"] = head.metadata.l2_normalize;
  std::ofstream out(dir / "head.json", std::ios::trunc);
  out << sidecar.dump(2) << '\n';
  if (!out) throw Error(Errc::IoError, "failed writing head.json");
}

StoredHead load_head(const std::filesystem::path& dir) {
  const auto sidecar = nlohmann::json::parse(read_file(dir / "head.json"), nullptr, false);
  if (sidecar.is_discarded() || !sidecar.is_object()) {
    throw Error(Errc::MalformedRecord, "head.json is not a JSON object");
  }
  StoredHead head;
  try {
    head.params.dim = sidecar.at("dim").get<std::size_t>();
    head.params.hidden = sidecar.at("hidden").get<std::size_t>();
    head.metadata.dropout_p = sidecar.at("dropout_p").get<double>();
    head.metadata.leaky_slope = sidecar.at("leaky_slope").get<double>();
    head.metadata.seed = sidecar.at("seed").get<std::uint64_t>();
    head.metadata.val_accuracy = sidecar.at("val_accuracy").get<double>();
    head.metadata.l2_normalize = sidecar.value("l2_normalize", false);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedRecord, std::string("head.json: ") + e.what());
  }

  const auto expect_shape = [](const FeatureMatrix& m, std::size_t rows, std::size_t cols,
                               const char* name) {
    if (m.rows() != rows || m.dim() != cols) {
      throw Error(Errc::ShapeMismatch, std::string(name) + " shape disagrees with head.json");
    }
  };
  const auto w1 = read_npy(dir / "W1.npy");
  const auto b1 = read_npy(dir / "b1.npy");
  const auto w2 = read_npy(dir / "W2.npy");
  const auto b2 = read_npy(dir / "b2.npy");
  HeadParams& p = head.params;
  expect_shape(w1, p.dim, p.hidden, "W1");
  expect_shape(b1, 1, p.hidden, "b1");
  expect_shape(w2, p.hidden, 1, "W2");
  expect_shape(b2, 1, 1, "b2");
  p.w1.assign(w1.values().begin(), w1.values().end());
  p.b1.assign(b1.values().begin(), b1.values().end());
  p.w2.assign(w2.values().begin(), w2.values().end());
  p.b2 = b2.values()[0];
  p.validate();
  return head;
}

}  // namespace pgki
