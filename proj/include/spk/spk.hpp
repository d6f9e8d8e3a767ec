#pragma once

// Umbrella header for the scene-parsing benchmark toolkit.

#include "spk/ade20k.hpp"
#include "spk/cascade.hpp"
#include "spk/common.hpp"
#include "spk/consistency.hpp"
#include "spk/corpus.hpp"
#include "spk/datastats.hpp"
#include "spk/grid.hpp"
#include "spk/inpaint.hpp"
#include "spk/json_out.hpp"
#include "spk/maskio.hpp"
#include "spk/metrics.hpp"
#include "spk/parallel.hpp"
#include "spk/record.hpp"
#include "spk/rng.hpp"
#include "spk/synth.hpp"
#include "spk/taxonomy.hpp"
