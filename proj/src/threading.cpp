#include "usseg/threading.hpp"

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <thread>
#include <vector>

namespace usseg {

namespace {

// One persistent worker per extra thread. Each job splits [0,n) into
// min(threads, n) contiguous chunks; the caller runs chunk 0 and worker i
// runs chunk i+1. The chunk->worker mapping is fixed, so there is no
// cross-worker hand-off and job state is only read under the mutex.
class Pool {
public:
    static Pool& instance() {
        static Pool p;
        return p;
    }

    void set_threads(int n) { threads_.store(n < 1 ? 1 : n); }
    int threads() const { return threads_.load(); }

    void run(size_t n, const std::function<void(size_t, size_t)>& fn) {
        if (n == 0) return;
        int t = threads_.load();
        if (t == 1 || n == 1) {
            fn(0, n);
            return;
        }
        std::lock_guard<std::mutex> serial(run_mutex_);
        ensure_workers(t - 1);
        size_t chunks = static_cast<size_t>(t) < n ? static_cast<size_t>(t) : n;
        {
            std::lock_guard<std::mutex> g(mx_);
            job_fn_ = &fn;
            job_n_ = n;
            job_chunks_ = chunks;
            remaining_.store(static_cast<int>(chunks));
            ++generation_;
        }
        cv_.notify_all();
        run_chunk(0, n, chunks, fn);
        std::unique_lock<std::mutex> g(mx_);
        done_cv_.wait(g, [&] { return remaining_.load() == 0; });
        job_fn_ = nullptr;
    }

private:
    Pool() = default;
    ~Pool() {
        {
            std::lock_guard<std::mutex> g(mx_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& w : workers_) w.join();
    }

    void ensure_workers(int want) {
        std::lock_guard<std::mutex> g(mx_);
        while (static_cast<int>(workers_.size()) < want) {
            int id = static_cast<int>(workers_.size());
            workers_.emplace_back([this, id] { worker_loop(id); });
        }
    }

    void run_chunk(size_t c, size_t n, size_t chunks, const std::function<void(size_t, size_t)>& fn) {
        size_t b = c * n / chunks;
        size_t e = (c + 1) * n / chunks;
        if (b < e) fn(b, e);
        if (remaining_.fetch_sub(1) == 1) {
            std::lock_guard<std::mutex> g(mx_);
            done_cv_.notify_all();
        }
    }

    void worker_loop(int id) {
        uint64_t seen = 0;
        for (;;) {
            const std::function<void(size_t, size_t)>* fn = nullptr;
            size_t n = 0, chunks = 0;
            {
                std::unique_lock<std::mutex> g(mx_);
                cv_.wait(g, [&] { return stop_ || generation_ != seen; });
                if (stop_) return;
                seen = generation_;
                fn = job_fn_;
                n = job_n_;
                chunks = job_chunks_;
            }
            size_t c = static_cast<size_t>(id) + 1;
            if (fn && c < chunks) run_chunk(c, n, chunks, *fn);
        }
    }

    std::mutex run_mutex_;
    std::mutex mx_;
    std::condition_variable cv_;
    std::condition_variable done_cv_;
    std::vector<std::thread> workers_;
    std::atomic<int> threads_{1};
    bool stop_ = false;
    uint64_t generation_ = 0;
    const std::function<void(size_t, size_t)>* job_fn_ = nullptr;
    size_t job_n_ = 0;
    size_t job_chunks_ = 0;
    std::atomic<int> remaining_{0};
};

} // namespace

void set_thread_count(int n) { Pool::instance().set_threads(n); }

int thread_count() { return Pool::instance().threads(); }

void parallel_for(size_t n, const std::function<void(size_t, size_t)>& fn) {
    Pool::instance().run(n, fn);
}

} // namespace usseg
