#pragma once

#include "strobomech/errors.hpp"
#include "strobomech/gaussian.hpp"
#include "strobomech/strobo_maps.hpp"
#include "strobomech/pulse.hpp"
#include "strobomech/conditioning.hpp"
#include "strobomech/multimode.hpp"
#include "strobomech/retrodiction.hpp"

namespace strobomech {

inline constexpr const char* kVersion = "0.3.0";

}  // namespace strobomech
