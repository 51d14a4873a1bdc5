// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "endodemand/buhlmann.hpp"
#include "endodemand/clearing.hpp"
#include "endodemand/closed_forms.hpp"
#include "endodemand/error.hpp"
#include "endodemand/inverse_demand.hpp"
#include "endodemand/risk_profile.hpp"
#include "endodemand/sampling.hpp"
#include "endodemand/scenario.hpp"
#include "endodemand/version.hpp"
