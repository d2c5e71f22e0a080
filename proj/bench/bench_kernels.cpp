// Serial reference vs OpenMP timings for the parallel kernels.
#include <chrono>
#include <cstdio>
#include <memory>

#include "corrpair/filtering.hpp"
#include "corrpair/gft_flow.hpp"
#include "corrpair/model.hpp"
#include "corrpair/parallel.hpp"
#include "corrpair/spectral_stats.hpp"

using namespace corrpair;

namespace {

template <class Fn>
double best_of(int reps, Fn&& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

void report(const char* name, double serial, double omp, bool same) {
  std::printf("%-28s serial %9.4f s   openmp %9.4f s   speedup %5.2fx   identical %s\n", name, serial, omp,
              serial / omp, same ? "yes" : "NO");
}

}  // namespace

int main() {
  std::printf("threads: %d\n", max_threads());

  {
    const int n = 32;
    const Matrix k = power_decay_kernel(n, 3.0, 1.0, 1.0).kernel;
    const Matrix r = sample_gaussian_invariant(n, SymmetryClass::RealSymmetric, 1);
    Matrix a, b;
    const double ts = best_of(3, [&] { a = kernels::convolve_direct(k, r, Backend::Serial); });
    const double to = best_of(3, [&] { b = kernels::convolve_direct(k, r, Backend::OpenMP); });
    report("convolve_direct N=32", ts, to, a == b);
  }

  {
    const int n = 400;
    const auto spec = wigner_pair_spec(n, SymmetryClass::RealSymmetric, 0.2, 0.8);
    const auto entries = std::make_shared<const EntryFlowData>(build_entry_data(spec.profile, spec.symmetry));
    const auto p = sample_pair(spec, 9);
    const FlowState st = make_flow_state(p.w1, p.w2, entries, 9);
    FlowState a, b;
    const double ts = best_of(3, [&] { a = evolve_exact(st, 0.05, Backend::Serial); });
    const double to = best_of(3, [&] { b = evolve_exact(st, 0.05, Backend::OpenMP); });
    report("evolve_exact N=400", ts, to, a.w1 == b.w1 && a.w2 == b.w2);
  }

  {
    const int n = 200, count = 64;
    auto job = [&](std::size_t i) {
      return eigen_spectrum(sample_gaussian_invariant(n, SymmetryClass::RealSymmetric, i), SymmetryClass::RealSymmetric);
    };
    std::vector<RealVector> a, b;
    const double ts = best_of(2, [&] { a = map_indexed<RealVector>(count, job, Backend::Serial); });
    const double to = best_of(2, [&] { b = map_indexed<RealVector>(count, job, Backend::OpenMP); });
    bool same = a.size() == b.size();
    for (std::size_t i = 0; same && i < a.size(); ++i) same = a[i] == b[i];
    report("spectra x64 N=200", ts, to, same);
  }
  return 0;
}
