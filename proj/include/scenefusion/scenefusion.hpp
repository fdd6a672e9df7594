#pragma once

#include "scenefusion/audio/evolve.hpp"
#include "scenefusion/common/dataset.hpp"
#include "scenefusion/common/error.hpp"
#include "scenefusion/common/parallel.hpp"
#include "scenefusion/common/random.hpp"
#include "scenefusion/data/features.hpp"
#include "scenefusion/data/manifest.hpp"
#include "scenefusion/data/synthetic.hpp"
#include "scenefusion/dsp/mfcc.hpp"
#include "scenefusion/eval/harness.hpp"
#include "scenefusion/fusion/baselines.hpp"
#include "scenefusion/fusion/experiment.hpp"
#include "scenefusion/fusion/fusion.hpp"
#include "scenefusion/io/image_io.hpp"
#include "scenefusion/io/wav.hpp"
#include "scenefusion/nn/head.hpp"
#include "scenefusion/nn/network.hpp"
#include "scenefusion/nn/serialize.hpp"
#include "scenefusion/nn/train.hpp"
#include "scenefusion/vision/backbone.hpp"
#include "scenefusion/vision/conv.hpp"
#include "scenefusion/vision/tensor.hpp"
