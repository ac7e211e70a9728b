#pragma once

// Precision selection. The float build is the default; defining
// COOPSEG_DOUBLE_PRECISION switches every numeric type to double and moves all
// symbols into a separate inline namespace so both builds can coexist.

#if defined(COOPSEG_DOUBLE_PRECISION)
#define COOPSEG_PRECISION_NS f64
#else
#define COOPSEG_PRECISION_NS f32
#endif

#define COOPSEG_NAMESPACE_BEGIN \
  namespace coopseg {           \
  inline namespace COOPSEG_PRECISION_NS {
#define COOPSEG_NAMESPACE_END \
  }                           \
  }

COOPSEG_NAMESPACE_BEGIN

#if defined(COOPSEG_DOUBLE_PRECISION)
using real = double;
#else
using real = float;
#endif

inline constexpr const char* kVersion = "0.3.0";

COOPSEG_NAMESPACE_END
