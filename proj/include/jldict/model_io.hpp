#pragma once

#include "jldict/classify.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace jldict::io {

inline constexpr int kFormatVersion = 1;

// FNV-1a, 64-bit. Not cryptographic; detects accidental corruption.
std::uint64_t fnv1a64(const unsigned char* data, std::size_t n);

// Everything a deployment needs: the classifier plus the feature
// standardization statistics and the original label values, so raw queries can
// be preprocessed and predictions reported in the caller's labeling.
struct ModelBundle {
  classify::ClassifierModel classifier;
  VectorXd feature_mean;
  VectorXd feature_std;
  std::vector<long long> label_values;
  int n_classes = 0;
};

// Container layout: text header (key: value lines ending at an "end" line),
// then consecutive row-major little-endian float64 blocks in header order,
// then the FNV-1a checksum of all preceding bytes as 8 little-endian bytes.
// save -> load -> save is byte-identical.
void save_model(const std::string& path, const ModelBundle& bundle);

// Validates the checksum and every declared shape before constructing the
// bundle; any mismatch raises CorruptModel.
ModelBundle load_model(const std::string& path);

}  // namespace jldict::io
