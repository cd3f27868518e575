#pragma once

// Learned kernel density estimation for photon mapping: scene generation,
// photon tracing, k-NN photon maps, classical + progressive estimators, the
// kernel-prediction network with its from-scratch trainer, and the evaluation
// pipeline.

#include "dpm/autodiff.hpp"
#include "dpm/dataset.hpp"
#include "dpm/estimators.hpp"
#include "dpm/frame.hpp"
#include "dpm/geometry.hpp"
#include "dpm/image.hpp"
#include "dpm/metrics.hpp"
#include "dpm/net.hpp"
#include "dpm/photon.hpp"
#include "dpm/photon_map.hpp"
#include "dpm/rng.hpp"
#include "dpm/sampling.hpp"
#include "dpm/scene.hpp"
#include "dpm/scene_gen.hpp"
#include "dpm/scene_io.hpp"
#include "dpm/tracer.hpp"
#include "dpm/train.hpp"
#include "dpm/vec.hpp"
