#include "waveinv/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace waveinv {

namespace {
int g_threads = 0;

int env_threads() {
    if (const char* s = std::getenv("WAVEINV_THREADS")) {
        int v = std::atoi(s);
        if (v > 0) return v;
    }
    return 0;
}
}  // namespace

void set_threads(int n) { g_threads = n > 0 ? n : 0; }

int threads() {
    if (g_threads > 0) return g_threads;
    int e = env_threads();
    if (e > 0) return e;
    unsigned hc = std::thread::hardware_concurrency();
    return hc ? static_cast<int>(hc) : 1;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    std::size_t nt = std::min<std::size_t>(static_cast<std::size_t>(threads()), n);
    if (nt <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::exception_ptr err;
    std::mutex mu;
    std::size_t block = (n + nt - 1) / nt;
    for (std::size_t t = 0; t < nt; ++t) {
        std::size_t b = t * block, e = std::min(n, b + block);
        if (b >= e) break;
        pool.emplace_back([&, b, e] {
            try {
                for (std::size_t i = b; i < e; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(mu);
                if (!err) err = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace waveinv
