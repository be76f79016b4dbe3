#pragma once

#include "mixwass/error.hpp"
#include "mixwass/estimators.hpp"
#include "mixwass/inference.hpp"
#include "mixwass/io.hpp"
#include "mixwass/numlin.hpp"
#include "mixwass/parallel.hpp"
#include "mixwass/properties.hpp"
#include "mixwass/rng.hpp"
#include "mixwass/simplex.hpp"
#include "mixwass/simulate.hpp"
#include "mixwass/transport.hpp"
