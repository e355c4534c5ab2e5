#pragma once

#include <cstddef>

#include "ultrajump/forms.hpp"
#include "ultrajump/kernel.hpp"

namespace ultrajump {

/// Identities re-evaluated in rational arithmetic. Every double is a dyadic
/// rational, so leaf masses and kernel values enter exactly; ball masses and
/// averaged rates are rebuilt from them without rounding.
struct ExactIdentityReport {
  bool isometry = false;        // E^k(u, u) == E(E u, E u)
  bool adjoint = false;         // <Pi v, u>_k == <v, E u>_K
  bool restrict_extend = false; // Pi E u == u
  bool norm_preserved = false;  // <Pi w, Pi w>_k == <w, w>_K for w = E u
};

ExactIdentityReport exact_identities(const JumpKernel& kernel, const LevelFunction& u, const LevelFunction& v_leaf);

}  // namespace ultrajump
