#include "trijoin/parcore.hpp"

#include <algorithm>
#include <atomic>

namespace trijoin {

std::vector<std::pair<size_t, size_t>> partition_ranges(size_t n, size_t parts) {
    std::vector<std::pair<size_t, size_t>> out;
    if (n == 0 || parts == 0) return out;
    parts = std::min(parts, n);
    const size_t base = n / parts, rem = n % parts;
    size_t begin = 0;
    for (size_t p = 0; p < parts; ++p) {
        const size_t len = base + (p < rem ? 1 : 0);
        out.emplace_back(begin, begin + len);
        begin += len;
    }
    return out;
}

ThreadPool::ThreadPool(unsigned workers) {
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    threads_.reserve(workers);
    for (unsigned i = 0; i < workers; ++i) threads_.emplace_back([this] { worker_loop(); });
}

ThreadPool::~ThreadPool() {
    {
        std::lock_guard lk(mu_);
        stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
}

void ThreadPool::worker_loop() {
    for (;;) {
        std::function<void()> task;
        {
            std::unique_lock lk(mu_);
            cv_.wait(lk, [this] { return stop_ || !queue_.empty(); });
            if (queue_.empty()) {
                if (stop_) return;
                continue;
            }
            task = std::move(queue_.front());
            queue_.pop_front();
        }
        task();
    }
}

void ThreadPool::parallel_jobs(size_t jobs, const std::function<void(size_t)>& fn) {
    if (jobs == 0) return;
    if (jobs == 1) {
        fn(0);
        return;
    }
    struct Sync {
        std::mutex mu;
        std::condition_variable done;
        size_t remaining;
        std::exception_ptr error;
    } sync{.mu = {}, .done = {}, .remaining = jobs, .error = nullptr};
    {
        std::lock_guard lk(mu_);
        for (size_t i = 0; i < jobs; ++i) {
            queue_.emplace_back([&fn, &sync, i] {
                std::exception_ptr err;
                try {
                    fn(i);
                } catch (...) {
                    err = std::current_exception();
                }
                std::lock_guard g(sync.mu);
                if (err && !sync.error) sync.error = err;
                if (--sync.remaining == 0) sync.done.notify_one();
            });
        }
    }
    cv_.notify_all();
    std::unique_lock lk(sync.mu);
    sync.done.wait(lk, [&] { return sync.remaining == 0; });
    if (sync.error) std::rethrow_exception(sync.error);
}

void ThreadPool::parallel_ranges(size_t n, const std::function<void(size_t, size_t, size_t)>& fn) {
    auto ranges = partition_ranges(n, size());
    parallel_jobs(ranges.size(), [&](size_t p) { fn(p, ranges[p].first, ranges[p].second); });
}

double block_reduce_min(ThreadPool& pool, std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("block_reduce_min: empty input");
    auto ranges = partition_ranges(values.size(), pool.size());
    std::vector<double> partials(ranges.size());
    pool.parallel_jobs(ranges.size(), [&](size_t p) {
        auto [b, e] = ranges[p];
        double m = values[b];
        for (size_t i = b + 1; i < e; ++i) m = std::min(m, values[i]);
        partials[p] = m;
    });
    double m = partials[0];
    for (size_t p = 1; p < partials.size(); ++p) m = std::min(m, partials[p]);
    return m;
}

} // namespace trijoin
