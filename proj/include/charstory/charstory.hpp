#pragma once

#include "charstory/charex.hpp"
#include "charstory/corpus.hpp"
#include "charstory/error.hpp"
#include "charstory/nnet.hpp"
#include "charstory/postag.hpp"
#include "charstory/storymodel.hpp"
#include "charstory/tokenize.hpp"
#include "charstory/wordnet.hpp"
