#pragma once

// Umbrella header. scene_json.hpp and container_io.hpp are included here for
// convenience; include individual headers instead if JSON parsing is not
// needed in a translation unit.

#include "flowagg/bench.hpp"
#include "flowagg/container_io.hpp"
#include "flowagg/cost_volume.hpp"
#include "flowagg/errors.hpp"
#include "flowagg/file_bytes.hpp"
#include "flowagg/flow_field.hpp"
#include "flowagg/flow_io.hpp"
#include "flowagg/harness.hpp"
#include "flowagg/local_attention.hpp"
#include "flowagg/lsa.hpp"
#include "flowagg/scene_json.hpp"
#include "flowagg/slsa.hpp"
#include "flowagg/tensor.hpp"
