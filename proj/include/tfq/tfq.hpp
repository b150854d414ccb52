#pragma once

#include "tfq/error.hpp"
#include "tfq/rng.hpp"
#include "tfq/volume.hpp"
#include "tfq/transfer_function.hpp"
#include "tfq/raycast.hpp"
#include "tfq/image_io.hpp"
#include "tfq/synthetic.hpp"
#include "tfq/nn/tensor.hpp"
#include "tfq/nn/layers.hpp"
#include "tfq/nn/siamese.hpp"
#include "tfq/nn/adam.hpp"
#include "tfq/nn/model_io.hpp"
#include "tfq/nn/train.hpp"
#include "tfq/nn/gradcheck.hpp"
#include "tfq/metric.hpp"
#include "tfq/evo/operators.hpp"
#include "tfq/evo/worker_pool.hpp"
#include "tfq/evo/search.hpp"
#include "tfq/studio/pair_studio.hpp"
