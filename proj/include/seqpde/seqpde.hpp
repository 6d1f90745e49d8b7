#pragma once

// Umbrella header.

#include "seqpde/common.hpp"
#include "seqpde/config.hpp"
#include "seqpde/diagnostics.hpp"
#include "seqpde/dto.hpp"
#include "seqpde/experiment.hpp"
#include "seqpde/gauss_newton.hpp"
#include "seqpde/gradflow.hpp"
#include "seqpde/io.hpp"
#include "seqpde/models.hpp"
#include "seqpde/otd.hpp"
#include "seqpde/pde.hpp"
#include "seqpde/quadrature.hpp"
