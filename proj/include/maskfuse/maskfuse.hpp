#pragma once

// Convenience header pulling in the whole library.

#include "core.hpp"
#include "energy.hpp"
#include "gmm.hpp"
#include "imgio.hpp"
#include "metrics.hpp"
#include "probmap.hpp"
#include "rng.hpp"
#include "weakloss.hpp"
