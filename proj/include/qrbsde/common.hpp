// Shared plumbing: error types, full-precision number formatting, and a
// deterministic block-parallel runner. Results never depend on the thread
// count: work is cut into fixed-size blocks and any cross-block reduction is
// done by the caller in block order.
#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace qrbsde {

// Invalid configuration or preset input. CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numerical failure (solver breakdown, degenerate batch, ...). Exit code 1.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Full-precision decimal rendering used by every writer, so that identical
// runs produce identical bytes.
inline std::string fmt_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Thread budget: QRBSDE_THREADS when set (even above the core count, so
// thread-invariance is testable anywhere), otherwise the hardware count.
inline int thread_budget() {
    if (const char* env = std::getenv("QRBSDE_THREADS")) {
        char* end = nullptr;
        long n = std::strtol(env, &end, 10);
        if (end != env && n >= 1 && n <= 1024) return static_cast<int>(n);
    }
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    return hw < 1 ? 1 : hw;
}

// Runs fn(block_index, begin, end) over [0, count) cut into fixed blocks of
// `block_size`. The block decomposition is independent of the thread count,
// so per-block outputs (combined by the caller in block index order) are
// bit-reproducible under any parallelism degree.
inline void parallel_blocks(std::size_t count, std::size_t block_size,
                            const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
    if (count == 0) return;
    if (block_size == 0) block_size = 1;
    const std::size_t nblocks = (count + block_size - 1) / block_size;
    const int nthreads = std::min<std::size_t>(thread_budget(), nblocks);
    if (nthreads <= 1) {
        for (std::size_t bi = 0; bi < nblocks; ++bi)
            fn(bi, bi * block_size, std::min(count, (bi + 1) * block_size));
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (int t = 0; t < nthreads; ++t) {
        pool.emplace_back([&, t]() {
            for (std::size_t bi = t; bi < nblocks; bi += nthreads)
                fn(bi, bi * block_size, std::min(count, (bi + 1) * block_size));
        });
    }
    for (auto& th : pool) th.join();
}

inline std::size_t default_block() { return 256; }

}  // namespace qrbsde
