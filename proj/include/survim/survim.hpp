#pragma once

#include "basis.hpp"
#include "cindex_boost.hpp"
#include "config.hpp"
#include "core_data.hpp"
#include "debias.hpp"
#include "errors.hpp"
#include "inference.hpp"
#include "measures.hpp"
#include "normal.hpp"
#include "nuisance.hpp"
#include "rng.hpp"
#include "simlab.hpp"
