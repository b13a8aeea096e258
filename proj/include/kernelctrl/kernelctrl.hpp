#pragma once

#include "kernelctrl/box.hpp"
#include "kernelctrl/control.hpp"
#include "kernelctrl/embedding.hpp"
#include "kernelctrl/errors.hpp"
#include "kernelctrl/kernels.hpp"
#include "kernelctrl/lp.hpp"
#include "kernelctrl/parallel.hpp"
#include "kernelctrl/reach.hpp"
#include "kernelctrl/rng.hpp"
#include "kernelctrl/sampling.hpp"
#include "kernelctrl/systems.hpp"
#include "kernelctrl/validate.hpp"
