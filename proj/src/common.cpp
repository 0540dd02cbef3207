#include "cfdecomp/error.hpp"
#include "cfdecomp/parallel.hpp"
#include "cfdecomp/rng.hpp"
#include "cfdecomp/stats.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>
#include <vector>

namespace cfdecomp {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid_input";
    case ErrorKind::MissingColumn: return "missing_column";
    case ErrorKind::RankDeficient: return "rank_deficient";
    case ErrorKind::UndefinedFunctional: return "undefined_functional";
    case ErrorKind::GridTooShort: return "grid_too_short";
    case ErrorKind::SupportViolation: return "support_violation";
    case ErrorKind::Config: return "config";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// parallel_for

namespace {
std::atomic<int> g_jobs{1};
thread_local bool t_in_worker = false;
}  // namespace

void set_jobs(int n) { g_jobs = std::max(1, n); }
int jobs() { return g_jobs; }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(g_jobs.load()), n);
  if (workers <= 1 || t_in_worker) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run_range = [&](std::size_t begin, std::size_t end) {
    t_in_worker = true;
    try {
      for (std::size_t i = begin; i < end; ++i) body(i);
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
    t_in_worker = false;
  };
  std::vector<std::thread> threads;
  threads.reserve(workers - 1);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t begin = std::min(n, w * chunk);
    const std::size_t end = std::min(n, begin + chunk);
    threads.emplace_back(run_range, begin, end);
  }
  run_range(0, std::min(n, chunk));
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// Random streams

double Stream::normal() { return normal_quantile(uniform()); }

double Stream::exponential() { return -std::log(uniform()); }

}  // namespace cfdecomp
