/* Flush-to-zero / denormals-are-zero for the stepping loop.  Far-field tails
   decay super-exponentially and would otherwise run through microcode assists. */
#ifndef DVHJ_FTZ_H
#define DVHJ_FTZ_H

#if defined(__SSE2__) || defined(_M_X64)
#include <xmmintrin.h>
static inline unsigned int dvhj_ftz_on(void) {
    unsigned int old = _mm_getcsr();
    _mm_setcsr(old | 0x8040);
    return old;
}
static inline void dvhj_csr_restore(unsigned int old) { _mm_setcsr(old); }
#else
static inline unsigned int dvhj_ftz_on(void) { return 0; }
static inline void dvhj_csr_restore(unsigned int old) { (void)old; }
#endif

#endif
