#pragma once

#include "anovats/core.hpp"
#include "anovats/csv.hpp"
#include "anovats/error.hpp"
#include "anovats/harness.hpp"
#include "anovats/panel.hpp"
#include "anovats/posthoc.hpp"
#include "anovats/preprocess.hpp"
#include "anovats/report.hpp"
#include "anovats/simgen.hpp"
