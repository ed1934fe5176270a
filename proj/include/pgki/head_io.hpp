#pragma once

#include <cstdint>
#include <filesystem>

#include "pgki/linear_head.hpp"

namespace pgki {

struct HeadMetadata {
  double dropout_p = kDefaultDropout;
  double leaky_slope = kDefaultLeakySlope;
  std::uint64_t seed = 0;
  double val_accuracy = 0.0;
  bool l2_normalize = false;
};

struct StoredHead {
  HeadParams params;
  HeadMetadata metadata;
};

/// A head directory holds W1.npy (dim x hidden), b1.npy (1 x hidden),
/// W2.npy (hidden x 1), b2.npy (1 x 1), all little-endian f8, plus head.json
/// with {dim, hidden, dropout_p, leaky_slope, seed, val_accuracy, l2_normalize}.
void save_head(const std::filesystem::path& dir, const StoredHead& head);
StoredHead load_head(const std::filesystem::path& dir);

}  // namespace pgki
