#pragma once

#include "urmc/bernstein.hpp"
#include "urmc/copula_models.hpp"
#include "urmc/copula_nonparametric.hpp"
#include "urmc/curve.hpp"
#include "urmc/distribution_regression.hpp"
#include "urmc/error.hpp"
#include "urmc/inference.hpp"
#include "urmc/normal.hpp"
#include "urmc/parallel.hpp"
#include "urmc/sample.hpp"
#include "urmc/simulation.hpp"
