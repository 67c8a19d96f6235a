#include "splinetrace/parallel.hpp"

#include <tbb/blocked_range.h>
#include <tbb/global_control.h>
#include <tbb/parallel_for.h>
#include <tbb/task_arena.h>

#include <atomic>
#include <memory>
#include <mutex>

namespace splinetrace {

namespace {
std::atomic<std::size_t> g_max_threads{0};
std::mutex g_control_mutex;
/// Lifts TBB's worker limit to an explicit cap, which may exceed the core count.
std::unique_ptr<tbb::global_control> g_control;
}  // namespace

void set_max_threads(std::size_t threads) {
    const std::lock_guard<std::mutex> lock(g_control_mutex);
    g_control.reset();
    if (threads > 1)
        g_control = std::make_unique<tbb::global_control>(tbb::global_control::max_allowed_parallelism, threads);
    g_max_threads.store(threads);
}

std::size_t max_threads() {
    const std::size_t cap = g_max_threads.load();
    return cap == 0 ? static_cast<std::size_t>(tbb::this_task_arena::max_concurrency()) : cap;
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
    if (count == 0) return;
    const std::size_t threads = max_threads();
    if (threads <= 1 || count == 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    tbb::task_arena arena(static_cast<int>(threads));
    arena.execute([&] {
        tbb::parallel_for(tbb::blocked_range<std::size_t>(0, count),
                          [&](const tbb::blocked_range<std::size_t>& r) {
                              for (std::size_t i = r.begin(); i != r.end(); ++i) body(i);
                          });
    });
}

}  // namespace splinetrace
