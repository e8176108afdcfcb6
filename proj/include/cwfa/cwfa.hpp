#pragma once

#include "cwfa/constraint.hpp"
#include "cwfa/error.hpp"
#include "cwfa/model.hpp"
#include "cwfa/linalg.hpp"
#include "cwfa/density.hpp"
#include "cwfa/eigen_init.hpp"
#include "cwfa/aecm.hpp"
#include "cwfa/init.hpp"
#include "cwfa/selection.hpp"
#include "cwfa/simulate.hpp"
#include "cwfa/io.hpp"
