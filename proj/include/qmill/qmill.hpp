#pragma once

#include "qmill/collision.hpp"
#include "qmill/config.hpp"
#include "qmill/csv.hpp"
#include "qmill/dynamics.hpp"
#include "qmill/gme.hpp"
#include "qmill/liouvillian.hpp"
#include "qmill/model.hpp"
#include "qmill/operators.hpp"
#include "qmill/rectify.hpp"
#include "qmill/superop.hpp"
#include "qmill/thermo.hpp"
#include "qmill/types.hpp"
