#pragma once

#include "cwqed/core.hpp"
#include "cwqed/grid.hpp"
#include "cwqed/master_equation.hpp"
#include "cwqed/observables.hpp"
#include "cwqed/smatrix.hpp"
#include "cwqed/three_photon.hpp"
#include "cwqed/transforms.hpp"
#include "cwqed/two_photon.hpp"
