// SPDX-License-Identifier: Apache-2.0
#include "brw/rng.hpp"

namespace brw {

static_assert(VertexKey::root(1).digest != VertexKey::root(2).digest);
static_assert(VertexKey::root(7).child(0).digest != VertexKey::root(7).child(1).digest);

}  // namespace brw
