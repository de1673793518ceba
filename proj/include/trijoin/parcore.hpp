#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <span>
#include <stdexcept>
#include <thread>
#include <utility>
#include <vector>

namespace trijoin {

// Flattened 2D pair space: t <-> (i = t / n_b, j = t % n_b).
struct PairSpace {
    uint64_t n_a = 0;
    uint64_t n_b = 0;
    uint64_t total() const { return n_a * n_b; }
};

inline std::pair<uint64_t, uint64_t> decode_pair(uint64_t t, uint64_t n_b) {
    return {t / n_b, t % n_b};
}

// Contiguous, deterministic split of [0, n) into at most `parts` ranges.
// The first n % parts ranges get one extra element. Empty ranges are omitted.
std::vector<std::pair<size_t, size_t>> partition_ranges(size_t n, size_t parts);

// Fixed-size worker pool. Work items must not themselves call back into the
// pool (no nested parallelism).
class ThreadPool {
public:
    explicit ThreadPool(unsigned workers = 0); // 0 -> hardware_concurrency
    ~ThreadPool();

    ThreadPool(const ThreadPool&) = delete;
    ThreadPool& operator=(const ThreadPool&) = delete;

    unsigned size() const { return static_cast<unsigned>(threads_.size()); }

    // Runs fn(part, begin, end) over partition_ranges(n, size()); blocks until done.
    void parallel_ranges(size_t n, const std::function<void(size_t, size_t, size_t)>& fn);

    // Runs fn(i) for each i in [0, jobs); blocks until done.
    void parallel_jobs(size_t jobs, const std::function<void(size_t)>& fn);

private:
    void worker_loop();

    std::vector<std::thread> threads_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<std::function<void()>> queue_;
    bool stop_ = false;
};

namespace detail {

template <typename T, typename Op>
void scan_partials(ThreadPool& pool, std::span<const T> in, std::vector<T>& out, Op op,
                   std::vector<std::pair<size_t, size_t>>& ranges, std::vector<T>& partials) {
    ranges = partition_ranges(in.size(), pool.size());
    partials.assign(ranges.size(), T{});
    pool.parallel_jobs(ranges.size(), [&](size_t p) {
        auto [b, e] = ranges[p];
        T acc = in[b];
        out[b] = acc;
        for (size_t i = b + 1; i < e; ++i) {
            acc = op(acc, in[i]);
            out[i] = acc;
        }
        partials[p] = acc;
    });
}

} // namespace detail

// Inclusive prefix fold. Matches the sequential left fold for associative op;
// realized as partition-local scans plus a scan of partition totals (the
// round-structured scan's observable behavior).
template <typename T, typename Op>
std::vector<T> inclusive_scan_par(ThreadPool& pool, std::span<const T> in, Op op) {
    std::vector<T> out(in.size());
    if (in.empty()) return out;
    std::vector<std::pair<size_t, size_t>> ranges;
    std::vector<T> partials;
    detail::scan_partials(pool, in, out, op, ranges, partials);
    for (size_t p = 1; p < partials.size(); ++p) partials[p] = op(partials[p - 1], partials[p]);
    pool.parallel_jobs(ranges.size(), [&](size_t p) {
        if (p == 0) return;
        const T offset = partials[p - 1];
        auto [b, e] = ranges[p];
        for (size_t i = b; i < e; ++i) out[i] = op(offset, out[i]);
    });
    return out;
}

// Exclusive variant: position p holds the fold of [0, p), identity at 0.
template <typename T, typename Op>
std::vector<T> exclusive_scan_par(ThreadPool& pool, std::span<const T> in, Op op, T identity) {
    std::vector<T> inc = inclusive_scan_par(pool, in, op);
    std::vector<T> out(in.size());
    if (in.empty()) return out;
    out[0] = identity;
    for (size_t i = 1; i < in.size(); ++i) out[i] = inc[i - 1];
    return out;
}

// Exact min reduction; schedule-independent because min is associative,
// commutative and exact on doubles.
double block_reduce_min(ThreadPool& pool, std::span<const double> values);

// Three-phase stable stream compaction: per-partition count, exclusive scan
// of the counts, then scatter at the computed offsets.
template <typename T, typename Pred>
std::vector<T> compact_par(ThreadPool& pool, std::span<const T> in, Pred pred) {
    if (in.empty()) return {};
    auto ranges = partition_ranges(in.size(), pool.size());
    std::vector<uint8_t> keep(in.size());
    std::vector<uint64_t> counts(ranges.size(), 0);
    pool.parallel_jobs(ranges.size(), [&](size_t p) {
        auto [b, e] = ranges[p];
        uint64_t c = 0;
        for (size_t i = b; i < e; ++i) {
            keep[i] = pred(in[i]) ? 1 : 0;
            c += keep[i];
        }
        counts[p] = c;
    });
    std::vector<uint64_t> offsets(ranges.size());
    uint64_t total = 0;
    for (size_t p = 0; p < ranges.size(); ++p) {
        offsets[p] = total;
        total += counts[p];
    }
    std::vector<T> out(total);
    pool.parallel_jobs(ranges.size(), [&](size_t p) {
        auto [b, e] = ranges[p];
        uint64_t w = offsets[p];
        for (size_t i = b; i < e; ++i)
            if (keep[i]) out[w++] = in[i];
    });
    return out;
}

} // namespace trijoin
