#pragma once

#include "woa/error.hpp"
#include "woa/distribution.hpp"
#include "woa/game.hpp"
#include "woa/curve.hpp"
#include "woa/ode.hpp"
#include "woa/odecore.hpp"
#include "woa/equilibrium.hpp"
#include "woa/shooting.hpp"
#include "woa/closedform.hpp"
#include "woa/welfare.hpp"
#include "woa/verify.hpp"
#include "woa/io.hpp"
#include "woa/cli.hpp"
