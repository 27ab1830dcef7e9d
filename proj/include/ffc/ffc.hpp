#pragma once

#include "ffc/bench.hpp"
#include "ffc/classify.hpp"
#include "ffc/common.hpp"
#include "ffc/cost_model.hpp"
#include "ffc/data.hpp"
#include "ffc/layers.hpp"
#include "ffc/models.hpp"
#include "ffc/tensor.hpp"
#include "ffc/train_eval.hpp"
