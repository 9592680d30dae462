#pragma once

#include "socnav/config.hpp"
#include "socnav/replay.hpp"

namespace socnav {

// Collects transitions from a scripted scene: the main agent wanders on
// gentle velocity profiles through a walled room with a couple of static
// obstacles while a single scripted pedestrian repeatedly crosses its path.
// Used for transition-model training and evaluation runs.
EnvReplay scripted_crossing_dataset(int64_t n_transitions, uint64_t seed,
                                    const AppConfig& cfg);

}  // namespace socnav
