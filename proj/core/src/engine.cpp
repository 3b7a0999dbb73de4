#include "qpkr/engine.hpp"

#include <fftw3.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <mutex>
#include <thread>

#include "kernel.hpp"
#include "qpkr/errors.hpp"
#include "qpkr/numerics.hpp"
#include "qpkr/rng.hpp"

namespace qpkr::engine {

namespace {
// FFTW's planner mutates global state; serialize plan creation/destruction.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

std::vector<long> default_record_times(long n_kicks) {
  if (n_kicks < 1) throw ConfigError("record times: n_kicks must be >= 1");
  std::vector<long> times;
  for (long t = 1; t <= std::min<long>(10, n_kicks); ++t) times.push_back(t);
  // Twenty per decade past t = 10.
  for (int k = 1;; ++k) {
    const double t = std::pow(10.0, 1.0 + k / 20.0);
    if (t >= static_cast<double>(n_kicks)) break;
    times.push_back(static_cast<long>(std::llround(t)));
  }
  if (times.empty() || times.back() != n_kicks) times.push_back(n_kicks);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  return times;
}

struct Evolver::Impl {
  model::ParameterSet ps;
  int M = 0;
  int N = 0;
  double omega2 = 0.0;
  double omega3 = 0.0;
  double beta = 0.0;
  double phi2 = 0.0;
  double phi3 = 0.0;
  long kicks = 0;
  fftw_complex* buf = nullptr;
  fftw_plan to_position = nullptr;  // momentum -> position, exp(+i m x)
  fftw_plan to_momentum = nullptr;  // position -> momentum, needs 1/N
  std::vector<double> cos_x;
  std::vector<std::complex<double>> flight;

  ~Impl() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (to_position) fftw_destroy_plan(to_position);
    if (to_momentum) fftw_destroy_plan(to_momentum);
    if (buf) fftw_free(buf);
  }
};

Evolver::Evolver(const model::ParameterSet& ps, int m_lattice)
    : impl_(new Impl) {
  if (m_lattice < 4) throw ConfigError("evolver: lattice too small");
  ps.validate();
  impl_->ps = ps;
  impl_->M = m_lattice;
  impl_->N = num::next_pow2(4 * m_lattice);
  impl_->omega2 = ps.omega2.value();
  impl_->omega3 = ps.omega3.value();
  impl_->phi2 = ps.phi2;
  impl_->phi3 = ps.phi3;
  impl_->cos_x.resize(impl_->N);
  kernel::build_cosine_table(impl_->cos_x.data(), impl_->N);
  impl_->flight.resize(impl_->N);
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    impl_->buf = fftw_alloc_complex(impl_->N);
    // FFTW_ESTIMATE keeps plan selection independent of timing noise, which
    // the byte-for-byte reproducibility contract depends on.
    impl_->to_position = fftw_plan_dft_1d(impl_->N, impl_->buf, impl_->buf,
                                          FFTW_BACKWARD, FFTW_ESTIMATE);
    impl_->to_momentum = fftw_plan_dft_1d(impl_->N, impl_->buf, impl_->buf,
                                          FFTW_FORWARD, FFTW_ESTIMATE);
  }
  reset(0.0);
}

Evolver::~Evolver() = default;

int Evolver::m_lattice() const { return impl_->M; }
int Evolver::grid_size() const { return impl_->N; }
long Evolver::kicks_done() const { return impl_->kicks; }

const std::complex<double>* Evolver::amplitudes() const {
  return reinterpret_cast<const std::complex<double>*>(impl_->buf);
}

void Evolver::reset(double beta) {
  std::memset(impl_->buf, 0, sizeof(fftw_complex) * impl_->N);
  impl_->buf[0][0] = 1.0;
  impl_->beta = beta;
  impl_->kicks = 0;
  kernel::build_flight_phase(impl_->flight.data(), impl_->N, impl_->ps.kbar,
                             beta, 1.0 / impl_->N);
}

void Evolver::set_phases(double phi2, double phi3) {
  impl_->phi2 = phi2;
  impl_->phi3 = phi3;
}

void Evolver::step(double K, double eps) {
  Impl& s = *impl_;
  // The first kick fires at t = 0+, so the modulation is evaluated at the
  // count of kicks already applied.
  const double k_n = model::kick_amplitude(K, eps, s.omega2, s.omega3, s.phi2,
                                           s.phi3, s.kicks);
  auto* z = reinterpret_cast<std::complex<double>*>(s.buf);
  fftw_execute(s.to_position);
  kernel::apply_kick_phase(z, s.cos_x.data(), s.N, k_n / s.ps.kbar);
  fftw_execute(s.to_momentum);
  kernel::apply_phase_table(z, s.flight.data(), s.N);
  ++s.kicks;
}

Moments Evolver::moments() const {
  const auto bm = kernel::compute_moments(amplitudes(), impl_->N, impl_->M);
  return Moments{bm.norm2, bm.m1, bm.m2, bm.pi0, bm.edge};
}

namespace {

void check_record_times(const std::vector<long>& record_at) {
  if (record_at.empty()) throw ConfigError("record times: empty");
  long prev = 0;
  for (long t : record_at) {
    if (t <= prev)
      throw ConfigError("record times: must be strictly increasing and >= 1");
    prev = t;
  }
}

// Drive one evolver through the kick sequence, storing moments at the
// recording times. Returns false from `on_record` to abort early.
template <typename OnRecord>
void evolve_recording(Evolver& ev, double K, double eps,
                      const std::vector<long>& record_at, OnRecord on_record) {
  std::size_t next = 0;
  const long last = record_at.back();
  for (long t = 1; t <= last; ++t) {
    ev.step(K, eps);
    if (t == record_at[next]) {
      on_record(next, ev.moments());
      ++next;
    }
  }
}

}  // namespace

RealizationTrace run_realization(const model::ParameterSet& ps, double K,
                                 double eps, double beta, double phi2,
                                 double phi3,
                                 const std::vector<long>& record_at,
                                 int m_lattice) {
  check_record_times(record_at);
  Evolver ev(ps, m_lattice);
  ev.reset(beta);
  ev.set_phases(phi2, phi3);
  RealizationTrace out;
  out.times = record_at;
  out.m1.resize(record_at.size());
  out.m2.resize(record_at.size());
  out.pi0.resize(record_at.size());
  evolve_recording(ev, K, eps, record_at,
                   [&](std::size_t i, const Moments& mom) {
                     out.m1[i] = mom.m1;
                     out.m2[i] = mom.m2;
                     out.pi0[i] = mom.pi0;
                   });
  return out;
}

EnsembleResult run_ensemble(const model::ParameterSet& ps, double K,
                            double eps, const std::vector<long>& record_at,
                            const EnsembleOptions& opts) {
  check_record_times(record_at);
  if (opts.n_realizations < 2)
    throw ConfigError("ensemble: n_realizations must be >= 2");
  const int n_real = opts.n_realizations;
  const std::size_t n_times = record_at.size();

  // Per-realization slots, filled by whichever worker picks the index and
  // reduced in index order afterwards: the output never depends on the
  // thread count or schedule.
  std::vector<double> slot_m2(static_cast<std::size_t>(n_real) * n_times);
  std::vector<double> slot_pi0(static_cast<std::size_t>(n_real) * n_times);
  std::vector<double> slot_m1(static_cast<std::size_t>(n_real) * n_times);

  int threads = opts.threads;
  if (threads <= 0)
    threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<int>(threads, n_real);

  std::atomic<long> next{0};
  std::mutex fail_mutex;
  std::exception_ptr failure;

  auto worker = [&]() {
    try {
      Evolver ev(ps, opts.m_lattice);
      for (;;) {
        const long r = next.fetch_add(1, std::memory_order_relaxed);
        if (r >= n_real) break;
        {
          std::lock_guard<std::mutex> lock(fail_mutex);
          if (failure) break;
        }
        rng::Stream stream(opts.seed, static_cast<std::uint64_t>(r));
        const double beta = stream.uniform();
        double phi2 = ps.phi2, phi3 = ps.phi3;
        if (opts.phase_average) {
          phi2 = stream.uniform(0.0, 6.283185307179586476925286766559);
          phi3 = stream.uniform(0.0, 6.283185307179586476925286766559);
        }
        ev.reset(beta);
        ev.set_phases(phi2, phi3);
        evolve_recording(
            ev, K, eps, record_at, [&](std::size_t i, const Moments& mom) {
              if (mom.edge > opts.edge_tolerance)
                throw GridOverflowError(K, eps,
                                        static_cast<int>(record_at[i]),
                                        mom.edge);
              slot_m2[r * n_times + i] = mom.m2;
              slot_pi0[r * n_times + i] = mom.pi0;
              slot_m1[r * n_times + i] = mom.m1;
            });
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(fail_mutex);
      if (!failure) failure = std::current_exception();
    }
  };

  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  EnsembleResult out;
  out.times = record_at;
  out.n_realizations = n_real;
  out.m_lattice = opts.m_lattice;
  out.grid_size = num::next_pow2(4 * opts.m_lattice);
  out.p2.resize(n_times);
  out.p2_err.resize(n_times);
  out.pi0.resize(n_times);
  out.pi0_err.resize(n_times);
  out.m1.resize(n_times);
  out.m1_err.resize(n_times);
  auto reduce = [&](const std::vector<double>& slots, std::size_t i,
                    double& mean_out, double& err_out) {
    double sum = 0.0;
    for (int r = 0; r < n_real; ++r)
      sum += slots[static_cast<std::size_t>(r) * n_times + i];
    const double mean = sum / n_real;
    double var = 0.0;
    for (int r = 0; r < n_real; ++r) {
      const double d = slots[static_cast<std::size_t>(r) * n_times + i] - mean;
      var += d * d;
    }
    mean_out = mean;
    err_out = std::sqrt(var / (n_real - 1.0) / n_real);
  };
  for (std::size_t i = 0; i < n_times; ++i) {
    reduce(slot_m2, i, out.p2[i], out.p2_err[i]);
    reduce(slot_pi0, i, out.pi0[i], out.pi0_err[i]);
    reduce(slot_m1, i, out.m1[i], out.m1_err[i]);
  }
  return out;
}

}  // namespace qpkr::engine
