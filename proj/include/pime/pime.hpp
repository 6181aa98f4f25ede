#pragma once

#include "pime/common.hpp"
#include "pime/rng.hpp"

#include "pime/envsim/plant.hpp"

#include "pime/control/control.hpp"

#include "pime/nn/adam.hpp"
#include "pime/nn/gaussian.hpp"
#include "pime/nn/modular.hpp"
#include "pime/nn/serialize.hpp"
#include "pime/nn/stack.hpp"
#include "pime/nn/value.hpp"

#include "pime/ppo/gae.hpp"
#include "pime/ppo/types.hpp"
#include "pime/ppo/update.hpp"

#include "pime/harness/config.hpp"
#include "pime/harness/episode.hpp"
#include "pime/harness/evaluate.hpp"
#include "pime/harness/train.hpp"
