#pragma once

#include <string>

#include "hdsim/sampler.hpp"

namespace hdsim {

// Chain files: a versioned binary stream of length-prefixed draw records
// (bit-exact round trip) plus a human-readable JSON metadata sidecar at
// <path>.meta.json.
void save_chain(const Chain& chain, const std::string& path);
Chain load_chain(const std::string& path);

}  // namespace hdsim
