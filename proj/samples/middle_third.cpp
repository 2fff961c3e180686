// Formula values and a sampled estimate for the middle-third Cantor set.

#include <cmath>
#include <cstdio>

#include "moran/estimate.hpp"
#include "moran/formulas.hpp"

int main() {
  using namespace moran;
  const auto spec = SequenceSpec::constant({2, 1.0 / 3.0, 0.0}).with_flags({true, true});

  const auto tables = build_prefix_tables(spec, 512);
  const auto dim_a = assouad_dim_formula(tables, 256, 128);
  const auto dim_l = lower_dim_bound_formula(tables, 256, 128);
  std::printf("formula   assouad %.12f  lower bound %.12f  (log2/log3 = %.12f)\n", dim_a.value, dim_l.value,
              std::log(2.0) / std::log(3.0));

  const auto levels = build_levels(spec, 12);
  const auto pairs = pair_grid(5, 5);
  const auto emp = empirical_assouad(levels, pairs, 32);
  std::printf("empirical assouad %.6f  witness x=%.9f R=%.3g r=%.3g N=%lld\n", emp.value, emp.witness.x,
              emp.witness.R, emp.witness.r, emp.witness.count);

  const long long n = covering_number(levels, emp.witness.x, emp.witness.R, emp.witness.r, levels.depth());
  return n == emp.witness.count ? 0 : 1;
}
