#ifndef CABLE_PARALLEL_HPP
#define CABLE_PARALLEL_HPP

// Work-stealing over fixed-size blocks of sample indices. Each block is reduced
// sequentially into its own accumulator and blocks are returned in index order,
// so any ordered merge of the result is independent of the thread count.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace cable {

inline constexpr std::size_t kDefaultBlockSize = 256;
inline constexpr const char* kThreadsEnv = "CABLE_THREADS";

/// Thread count from CABLE_THREADS, else the hardware concurrency.
inline unsigned default_threads()
{
    if (const char* env = std::getenv(kThreadsEnv)) {
        try {
            const long n = std::stol(env);
            if (n > 0) {
                return static_cast<unsigned>(n);
            }
        } catch (const std::exception&) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

template <class Acc, class MakeWorkspace, class Body>
std::vector<Acc> run_blocks(std::size_t n, unsigned threads, std::size_t block_size, MakeWorkspace make_workspace,
                            Body body)
{
    block_size = std::max<std::size_t>(block_size, 1);
    const std::size_t blocks = (n + block_size - 1) / block_size;
    std::vector<Acc> out(blocks);
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;

    auto worker = [&] {
        try {
            auto ws = make_workspace();
            for (std::size_t b = next++; b < blocks; b = next++) {
                const std::size_t end = std::min(n, (b + 1) * block_size);
                for (std::size_t i = b * block_size; i < end; ++i) {
                    body(ws, out[b], i);
                }
            }
        } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) {
                error = std::current_exception();
            }
            next = blocks;
        }
    };

    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(blocks, 1))));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back(worker);
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    if (error) {
        std::rethrow_exception(error);
    }
    return out;
}

} // namespace cable

#endif
