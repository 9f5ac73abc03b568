#pragma once

#include "obscert/certify.hpp"
#include "obscert/config.hpp"
#include "obscert/deadzone.hpp"
#include "obscert/errors.hpp"
#include "obscert/estimator.hpp"
#include "obscert/experiment.hpp"
#include "obscert/model.hpp"
#include "obscert/profile.hpp"
#include "obscert/rng.hpp"
#include "obscert/sampling.hpp"
#include "obscert/stats_cache.hpp"
