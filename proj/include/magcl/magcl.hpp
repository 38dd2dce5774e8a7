#pragma once

#include "magcl/augment.hpp"
#include "magcl/dataset.hpp"
#include "magcl/embedding_io.hpp"
#include "magcl/encoder.hpp"
#include "magcl/error.hpp"
#include "magcl/evaluation.hpp"
#include "magcl/gradcheck.hpp"
#include "magcl/graph.hpp"
#include "magcl/loss.hpp"
#include "magcl/optim.hpp"
#include "magcl/rng.hpp"
#include "magcl/spectral.hpp"
#include "magcl/tensor.hpp"
#include "magcl/trainer.hpp"

namespace magcl {
inline constexpr const char* kVersion = "0.1.0";
}
