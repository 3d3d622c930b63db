#include "berknash/harness/benchmark.hpp"

namespace berknash::harness {

Benchmark benchmark3(double discount) {
  constexpr int S = 3;
  constexpr int m = 2;
  Kernel p(S, m);
  p.row(0, 0) << 0.9, 0.1, 0.0;
  p.row(1, 0) << 0.0, 0.9, 0.1;
  p.row(2, 0) << 0.1, 0.0, 0.9;
  p.row(0, 1) << 0.0, 0.5, 0.5;
  p.row(1, 1) << 0.5, 0.0, 0.5;
  p.row(2, 1) << 0.5, 0.5, 0.0;

  Table reward(S, m);
  reward << 0.5, 0.0,
            0.5, 0.2,
            0.5, 1.5;

  Benchmark out;
  out.mdp = MdpInstance{std::move(p), std::move(reward), discount, Vector::Constant(S, 1.0 / S)};
  out.family = mixture_family(out.mdp, kBenchmarkEpsilons);
  return out;
}

}  // namespace berknash::harness
