#pragma once

#include "datapricer/bayes.hpp"
#include "datapricer/experiment.hpp"
#include "datapricer/io.hpp"
#include "datapricer/mechanisms.hpp"
#include "datapricer/valuation.hpp"
#include "datapricer/verification.hpp"
