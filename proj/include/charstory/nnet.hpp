#pragma once

#include "charstory/nnet/adam.hpp"
#include "charstory/nnet/cells.hpp"
#include "charstory/nnet/gradcheck.hpp"
#include "charstory/nnet/linear.hpp"
#include "charstory/nnet/loss.hpp"
#include "charstory/nnet/tensor.hpp"
