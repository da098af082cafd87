#pragma once

#include <array>
#include <vector>

#include "tmq/atom_model.hpp"

namespace tmq {

// Angular-momentum arguments are passed doubled (2j) so half-integers stay exact.
double wigner_3j(int j1x2, int j2x2, int j3x2, int m1x2, int m2x2, int m3x2);
double wigner_6j(int j1x2, int j2x2, int j3x2, int j4x2, int j5x2, int j6x2);

// Manifold-level branching of 1140 nm metastable decay into the ground F levels.
struct DecayBranching {
    double meta3_to_f4 = 0.0;  // F'=3 -> F=4; the remainder goes to F=3
    double meta2_to_f4 = 0.0;  // F'=2 -> F=4; zero for a dipole-type decay

    /// Magnetic-dipole weights (2F+1){J J' 1; F' F I}^2 with J=7/2, J'=5/2, I=1/2.
    static DecayBranching from_angular_momentum();
};

struct DecayChannel {
    int to;         // ground basis index
    double weight;  // sums to 1 over channels of one source
};

/// Ground sublevels reached from a metastable basis state with their
/// probabilities: manifold split from `branching`, mF distribution from the
/// squared 3j symbols over q in {-1, 0, 1}.
std::vector<DecayChannel> decay_channels(int meta_index, const DecayBranching& branching);

}  // namespace tmq
