#pragma once

#include <string>

#include "gradid/dataset.hpp"

namespace gradid {

// Parses paired IDX files: big-endian magic 2051 for images (count, rows,
// cols, unsigned bytes) and 2049 for labels (count, bytes). Pixels load as
// value / 255.0. Throws FormatError on a bad magic, truncation or a count
// mismatch between the two files.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// Writes a dataset back out as an IDX pair; pixels quantize to
// round(p * 255). Fixture and stand-in datasets are produced through this.
void write_idx(const std::string& images_path, const std::string& labels_path, const Dataset& ds);

}  // namespace gradid
