#pragma once

#include "splatprune/camera_rig.hpp"
#include "splatprune/color_validator.hpp"
#include "splatprune/error.hpp"
#include "splatprune/gaussian_store.hpp"
#include "splatprune/image_io.hpp"
#include "splatprune/mask_provider.hpp"
#include "splatprune/outlier_pruner.hpp"
#include "splatprune/pipeline.hpp"
#include "splatprune/projection.hpp"
#include "splatprune/synth_bench.hpp"
#include "splatprune/whitelist_filter.hpp"
