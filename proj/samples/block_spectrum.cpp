// Assouad and lower spectra of a block-rule Moran set, by both formula paths.

#include <cstdio>
#include <vector>

#include "moran/formulas.hpp"

int main() {
  using namespace moran;
  // n_k = 3 for 4^j <= k < 2*4^j, otherwise 2; c_k = 1/4.
  const auto spec = SequenceSpec::block_rule({{2, 0.25, 0.0}, {3, 0.25, 0.0}}, {{4, 1, 2, 1}});
  const auto tables = build_prefix_tables(spec, 4096);

  std::vector<double> grid;
  for (int i = 1; i <= 9; ++i) grid.push_back(0.1 * i);
  const auto a = spectrum_curve(tables, grid, SpectrumKind::assouad);
  const auto l = spectrum_curve(tables, grid, SpectrumKind::lower);
  const auto as = spectrum_curve_scalefn(tables, grid, SpectrumKind::assouad);
  const auto ls = spectrum_curve_scalefn(tables, grid, SpectrumKind::lower);

  std::printf("theta   assouad  (scale fn)   lower  (scale fn)\n");
  int bad = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double va = a.points[i].estimate.value;
    const double vl = l.points[i].estimate.value;
    std::printf("%5.2f  %8.5f  %8.5f   %8.5f  %8.5f\n", grid[i], va, as.points[i].estimate.value, vl,
                ls.points[i].estimate.value);
    if (vl > va) ++bad;
  }
  return bad == 0 ? 0 : 1;
}
