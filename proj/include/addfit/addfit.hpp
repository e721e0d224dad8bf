#pragma once

#include "addfit/kernel.hpp"
#include "addfit/smoother.hpp"
#include "addfit/spectral.hpp"
#include "addfit/backfit.hpp"
#include "addfit/simulate.hpp"
#include "addfit/io.hpp"
