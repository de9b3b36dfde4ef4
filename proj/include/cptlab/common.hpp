#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace cptlab {

/// Flat parameter vector of a policy. All gradients, scores and Fisher
/// operations live in this space.
using ParamVector = std::vector<double>;

using Token = int;

struct InvalidInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Thrown when an exact (enumeration-based) computation is requested on a
/// response space larger than the configured limit. Callers fall back to
/// Monte Carlo.
struct EnumerationRefused : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Training aborted mid-run (non-finite gradient or similar); the message
/// carries the diagnostic. Partial results are preserved by the caller.
struct TrainAbort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Persisted artifacts disagree with recomputed values (tampered or stale
/// run directory).
struct IntegrityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// small vector helpers
// ---------------------------------------------------------------------------

inline void axpy(double a, const ParamVector& x, ParamVector& y) {
  if (x.size() != y.size()) throw InvalidInput("axpy: dimension mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline double dot(const ParamVector& x, const ParamVector& y) {
  if (x.size() != y.size()) throw InvalidInput("dot: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

inline double l2_norm(const ParamVector& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

inline bool all_finite(const ParamVector& x) {
  for (double v : x)
    if (!std::isfinite(v)) return false;
  return true;
}

/// Neumaier-compensated accumulator. Used wherever sums feed tight identity
/// checks (normalization to 1e-12, theorem residuals to 1e-8).
class KahanSum {
 public:
  void add(double v) {
    double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Sparse view of a score vector: sorted unique indices + values. Tabular
/// scores touch only the visited state blocks, so risk queries stay cheap
/// even when P is large.
struct SparseVec {
  int dim = 0;
  std::vector<int> idx;
  std::vector<double> val;

  void canonicalize() {
    std::vector<std::size_t> order(idx.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return idx[a] < idx[b]; });
    std::vector<int> ni;
    std::vector<double> nv;
    ni.reserve(idx.size());
    nv.reserve(idx.size());
    for (std::size_t k : order) {
      if (!ni.empty() && ni.back() == idx[k]) {
        nv.back() += val[k];
      } else {
        ni.push_back(idx[k]);
        nv.push_back(val[k]);
      }
    }
    idx = std::move(ni);
    val = std::move(nv);
  }

  ParamVector to_dense() const {
    ParamVector out(static_cast<std::size_t>(dim), 0.0);
    for (std::size_t k = 0; k < idx.size(); ++k)
      out[static_cast<std::size_t>(idx[k])] += val[k];
    return out;
  }
};

inline double dot(const SparseVec& s, const ParamVector& g) {
  if (s.dim != static_cast<int>(g.size()))
    throw InvalidInput("dot: sparse/dense dimension mismatch");
  double acc = 0.0;
  for (std::size_t k = 0; k < s.idx.size(); ++k)
    acc += s.val[k] * g[static_cast<std::size_t>(s.idx[k])];
  return acc;
}

/// Merge-based dot of two canonical sparse vectors.
inline double dot(const SparseVec& a, const SparseVec& b) {
  if (a.dim != b.dim) throw InvalidInput("dot: sparse dimension mismatch");
  double acc = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.idx.size() && j < b.idx.size()) {
    if (a.idx[i] == b.idx[j]) {
      acc += a.val[i] * b.val[j];
      ++i;
      ++j;
    } else if (a.idx[i] < b.idx[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return acc;
}

// ---------------------------------------------------------------------------
// formatting
// ---------------------------------------------------------------------------

/// Shortest decimal form that round-trips the double bit-exactly.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw InvalidInput("parse_double: bad literal '" + s + "'");
  return v;
}

// ---------------------------------------------------------------------------
// deterministic fan-out
// ---------------------------------------------------------------------------

/// Runs fn(i) for i in [0, n). Each index must only write to its own slot;
/// the caller reduces in index order, so results do not depend on the worker
/// count. Exceptions are rethrown on the calling thread.
template <typename Fn>
void parallel_for(int n, int workers, Fn&& fn) {
  if (n <= 0) return;
  int w = std::clamp(workers, 1, n);
  if (w == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(w));
  pool.reserve(static_cast<std::size_t>(w));
  for (int t = 0; t < w; ++t) {
    pool.emplace_back([&, t]() {
      int lo = static_cast<int>(static_cast<long long>(n) * t / w);
      int hi = static_cast<int>(static_cast<long long>(n) * (t + 1) / w);
      try {
        for (int i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace cptlab
