#include "rwg/parallel.hpp"

#include <atomic>

namespace rwg {

namespace {
std::atomic<int> g_threads{1};
}

void set_num_threads(int n) {
    if (n <= 0) n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    g_threads = n;
}

int num_threads() { return g_threads; }

}  // namespace rwg
