#pragma once

#include <cstdint>

#include "guard/bitstring.hpp"

namespace guard {

/// 64-bit node identifier; total order is the routing order.
using NumericalId = std::uint64_t;

/// Membership vector of m bits. Level-i neighbors share an i-bit prefix.
using NameId = BitString;

}  // namespace guard
