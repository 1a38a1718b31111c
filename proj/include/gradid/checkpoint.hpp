#pragma once

#include <string>

#include "gradid/network.hpp"

namespace gradid {

// Model checkpoint layout ("IDSN"):
//   bytes 0..3   magic "IDSN"
//   byte  4      version (1)
//   bytes 5..8   u32le layer count L
//   then         (L + 1) u32le layer widths d0..dL
//   then         f64le parameters, layers in order, each weights row-major
//                then biases
// Hidden layers load as ReLU, the final layer as identity; gradient_scope is
// a runtime setting and is not persisted.
void save_checkpoint(const std::string& path, const Network& net);
Network load_checkpoint(const std::string& path);

}  // namespace gradid
