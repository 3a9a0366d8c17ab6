#pragma once

#if defined(__SSE__) || defined(__x86_64__)
#include <pmmintrin.h>
#include <xmmintrin.h>
#define ANF_HAS_MXCSR 1
#endif

namespace anf {

// Flush denormals to zero for the lifetime of the guard (current thread).
// Adam's second moments decay into the denormal range, where x86 arithmetic
// is slower by orders of magnitude.
class FlushDenormalsGuard {
 public:
  FlushDenormalsGuard() {
#ifdef ANF_HAS_MXCSR
    saved_ = _mm_getcsr();
    _mm_setcsr(saved_ | 0x8040u);  // FTZ | DAZ
#endif
  }
  ~FlushDenormalsGuard() {
#ifdef ANF_HAS_MXCSR
    _mm_setcsr(saved_);
#endif
  }
  FlushDenormalsGuard(const FlushDenormalsGuard&) = delete;
  FlushDenormalsGuard& operator=(const FlushDenormalsGuard&) = delete;

 private:
  unsigned saved_ = 0;
};

}  // namespace anf
