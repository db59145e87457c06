#pragma once

#include "vlift/linalg.hpp"
#include "vlift/kernel_measure.hpp"
#include "vlift/mc_engine.hpp"
#include "vlift/ou_lift.hpp"
#include "vlift/wishart.hpp"
#include "vlift/jump_lift.hpp"
#include "vlift/riccati.hpp"
#include "vlift/heston.hpp"
