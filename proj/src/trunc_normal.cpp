#include "psi/trunc_normal.hpp"

#include <atomic>
#include <cstdio>

namespace psi {

void note_normalizer_clamp() {
    static std::atomic<bool> warned{false};
    if (!warned.exchange(true)) {
        std::fprintf(stderr,
                     "warning: truncated-normal normalizer underflowed below %.0e and was "
                     "clamped (extreme logits)\n",
                     kPsiFloor);
    }
}

} // namespace psi
