#pragma once

// Scalar precision for the whole stack. The default build uses f32; the
// gradient-check build compiles the same sources with SVLA_REAL_DOUBLE so
// finite-difference comparisons run at f64.
namespace svla {

#ifdef SVLA_REAL_DOUBLE
using real_t = double;
#else
using real_t = float;
#endif

}  // namespace svla
