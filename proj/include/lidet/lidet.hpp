#pragma once

// Umbrella header for the whole toolkit.

#include "lidet/attention.hpp"
#include "lidet/augment.hpp"
#include "lidet/config.hpp"
#include "lidet/core.hpp"
#include "lidet/dataset.hpp"
#include "lidet/eval.hpp"
#include "lidet/fusion.hpp"
#include "lidet/geometry.hpp"
#include "lidet/kitti_io.hpp"
#include "lidet/losses.hpp"
#include "lidet/pipeline.hpp"
#include "lidet/postprocess.hpp"
#include "lidet/rng.hpp"
#include "lidet/synth.hpp"
#include "lidet/targets.hpp"
#include "lidet/voxelizer.hpp"
