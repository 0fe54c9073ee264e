#pragma once

#include "metafold/cloth_sim.hpp"
#include "metafold/config.hpp"
#include "metafold/contact.hpp"
#include "metafold/dataset.hpp"
#include "metafold/error.hpp"
#include "metafold/executor.hpp"
#include "metafold/garment.hpp"
#include "metafold/geometry.hpp"
#include "metafold/instruction.hpp"
#include "metafold/metrics.hpp"
#include "metafold/planner.hpp"
#include "metafold/suite.hpp"
