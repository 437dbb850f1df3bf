#pragma once

#include <string>

#include "smgan/nets.hpp"

namespace smgan {

/// Serializes the architecture spec, every trainable parameter, and the
/// batch-norm running statistics as a JSON document.
void save_generator(const std::string& path, Generator& g);

/// Rebuilds the generator from a saved document; the result is functionally
/// identical to the saved model in both train and eval mode.
Generator load_generator(const std::string& path);

}  // namespace smgan
