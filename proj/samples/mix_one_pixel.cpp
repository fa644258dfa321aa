// Mix two adjacent library signatures, add noise, and recover the
// abundances with the coupled solver.

#include <cstdio>

#include "unmix/pcsbl.hpp"
#include "unmix/scene_synth.hpp"

int main() {
  using namespace unmix;
  const EndmemberMatrix A = synth::select_endmembers(synth::bundled_library(), 8, 7);

  AbundanceVector x = AbundanceVector::Zero(8);
  x(3) = 0.35;
  x(4) = 0.65;
  const double sigma2 = 1e-5;
  const PixelSpectrum y = forward_mix(A, x, NoiseModel(sigma2), 42);

  pcsbl::SolverOptions opts;
  opts.noise = pcsbl::KnownNoise{sigma2};
  const SolverResult r = pcsbl::unmix_pixel(A, y, opts);

  std::printf("iterations %d, converged %s\n", r.iterations_used, r.converged ? "yes" : "no");
  std::printf("  j   truth   estimate\n");
  for (Eigen::Index j = 0; j < x.size(); ++j)
    std::printf("%3ld  %6.3f  %9.4f\n", static_cast<long>(j), x(j), r.abundances(j));
  return 0;
}
