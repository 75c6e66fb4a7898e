#pragma once

#include "nacert/errors.hpp"
#include "nacert/interval.hpp"
#include "nacert/hyperrectangle.hpp"
#include "nacert/expr.hpp"
#include "nacert/parser.hpp"
#include "nacert/dynamics.hpp"
#include "nacert/systems.hpp"
#include "nacert/taylor.hpp"
#include "nacert/network.hpp"
#include "nacert/crown.hpp"
#include "nacert/verifier.hpp"
#include "nacert/partitioner.hpp"
#include "nacert/report_io.hpp"
#include "nacert/sweep.hpp"
#include "nacert/koopman.hpp"
