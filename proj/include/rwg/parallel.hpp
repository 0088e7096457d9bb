// parallel.hpp - minimal static-partition parallel loop
#pragma once

#include <algorithm>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace rwg {

void set_num_threads(int n);
int num_threads();

// Runs body(i) for i in [0, n). Each index writes only its own slots, so the
// result does not depend on the thread count.
template <class Body>
void parallel_for(int n, Body&& body) {
    int nt = std::min(num_threads(), n);
    if (nt <= 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::exception_ptr err;
    std::mutex mu;
    std::vector<std::thread> pool;
    pool.reserve(nt);
    for (int t = 0; t < nt; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (int i = t; i < n; i += nt) body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(mu);
                if (!err) err = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace rwg
