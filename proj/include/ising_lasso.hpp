#pragma once

#include "ising_lasso/bethe.hpp"
#include "ising_lasso/error.hpp"
#include "ising_lasso/experiment.hpp"
#include "ising_lasso/graph.hpp"
#include "ising_lasso/lasso.hpp"
#include "ising_lasso/linalg.hpp"
#include "ising_lasso/parallel.hpp"
#include "ising_lasso/rng.hpp"
#include "ising_lasso/sampler.hpp"
#include "ising_lasso/samples.hpp"
#include "ising_lasso/witness.hpp"
