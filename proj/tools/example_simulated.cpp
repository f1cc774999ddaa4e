// Plants 18 shifted rows in 100 x 40 normal data and prints what the
// two-stage detector and the classical Mahalanobis rule each find.
#include <cstdio>

#include "pcout/pcout.hpp"

int main() {
  using namespace pcout;
  const auto spec = SimSpec::uniform_shift(100, 40, reference_outlier_indices(), 1.5, 1.0, 7);
  const SimData sim = generate_contaminated(spec);

  const WeightReport rep = detect(sim.data);
  const ConfusionCounts pc = confusion(sim.truth, rep.flags);
  std::printf("prcmpout : p* = %ld, missed %ld of 18 outliers, %ld false alarms\n",
              static_cast<long>(rep.p_star), pc.b, pc.c);

  const DetectionResult cl = classical_detect(sim.data.values, 0.05);
  const ConfusionCounts cc = confusion(sim.truth, cl.flags);
  std::printf("classical: cutoff %.4f, missed %ld of 18 outliers, %ld false alarms\n", cl.cutoff, cc.b, cc.c);
  return 0;
}
