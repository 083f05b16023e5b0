#pragma once

#include "blcm/bits.hpp"
#include "blcm/error.hpp"
#include "blcm/estimate.hpp"
#include "blcm/experiment.hpp"
#include "blcm/ges.hpp"
#include "blcm/graph.hpp"
#include "blcm/io.hpp"
#include "blcm/model.hpp"
#include "blcm/oracle.hpp"
#include "blcm/parallel.hpp"
#include "blcm/reference.hpp"
#include "blcm/simulate.hpp"
