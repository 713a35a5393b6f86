#pragma once

#include "srnet/bench.hpp"
#include "srnet/cgp.hpp"
#include "srnet/config.hpp"
#include "srnet/csv.hpp"
#include "srnet/errors.hpp"
#include "srnet/evolve.hpp"
#include "srnet/functions.hpp"
#include "srnet/matrix.hpp"
#include "srnet/mlp.hpp"
#include "srnet/nncgp.hpp"
#include "srnet/optfit.hpp"
#include "srnet/report.hpp"
#include "srnet/sampling.hpp"
#include "srnet/serialize.hpp"
