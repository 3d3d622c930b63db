#pragma once

#include <array>

#include "berknash/models.hpp"

namespace berknash::harness {

inline constexpr std::array<double, 4> kBenchmarkEpsilons{0.05, 0.15, 0.30, 0.45};
inline constexpr double kBenchmarkDiscount = 0.95;
inline constexpr double kBenchmarkTemperature = 0.1;
inline constexpr int kBenchmarkHorizon = 1500;

struct Benchmark {
  MdpInstance mdp;
  ConjectureSet family;
};

// Frozen 3-state, 2-action instance.
//
//   a = 0 (conservative): stay with prob 0.9, else step to x+1 (mod 3);
//                         reward 0.5 everywhere.
//   a = 1 (aggressive):   jump uniformly to one of the two other states;
//                         reward (0, 0.2, 1.5) in states (0, 1, 2).
//
// Every deterministic policy induces an irreducible, aperiodic chain (the
// cycle 0 -> 1 -> 2 -> 0 is always present) and a = 1 has the larger reward
// spread. The conjecture family mixes P with uniform noise at eps in
// {0.05, 0.15, 0.30, 0.45}. mu0 is uniform.
Benchmark benchmark3(double discount = kBenchmarkDiscount);

}  // namespace berknash::harness
