#pragma once

#include "charstory/model/checkpoint.hpp"
#include "charstory/model/config.hpp"
#include "charstory/model/evaluate.hpp"
#include "charstory/model/generate.hpp"
#include "charstory/model/story_model.hpp"
#include "charstory/model/toy.hpp"
#include "charstory/model/train.hpp"
