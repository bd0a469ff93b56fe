#pragma once

// Dense-tensor engine: tape, differentiable primitives, optimizer.

#include "arppg/conv.hpp"
#include "arppg/norm.hpp"
#include "arppg/ops.hpp"
#include "arppg/optim.hpp"
#include "arppg/rng.hpp"
#include "arppg/sample.hpp"
#include "arppg/spectral.hpp"
#include "arppg/tensor.hpp"
