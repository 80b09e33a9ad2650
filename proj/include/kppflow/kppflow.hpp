#pragma once

#include "kppflow/error.hpp"
#include "kppflow/torus.hpp"
#include "kppflow/field_io.hpp"
#include "kppflow/flows.hpp"
#include "kppflow/krylov.hpp"
#include "kppflow/homogenize.hpp"
#include "kppflow/frontspeed.hpp"
#include "kppflow/criterion.hpp"
#include "kppflow/pde_oracle.hpp"
#include "kppflow/config.hpp"
#include "kppflow/svg.hpp"
#include "kppflow/sweep.hpp"
