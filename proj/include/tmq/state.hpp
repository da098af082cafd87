#pragma once

#include <Eigen/Core>
#include <complex>

#include "tmq/atom_model.hpp"
#include "tmq/units.hpp"

namespace tmq {

using Complex = std::complex<double>;
using DensityMatrix = Eigen::Matrix<Complex, kBasisSize, kBasisSize>;
using PopulationVector = Eigen::Matrix<double, kBasisSize, 1>;

// rho is normalised to the initial atom number: trace(rho) is the surviving
// fraction and trace(rho) + lost_fraction == 1.
struct EnsembleState {
    DensityMatrix rho = DensityMatrix::Zero();
    double initial_atoms = 0.0;
    double lost_fraction = 0.0;
    double time = 0.0;  // s since the start of the shot
    MagneticField b_nominal;

    static EnsembleState pure(const SublevelRef& s, double atoms, MagneticField b_nominal);

    double trace() const { return rho.trace().real(); }
    double atom_number() const { return initial_atoms * trace(); }
    double population(const SublevelRef& s) const { return rho(basis_index(s), basis_index(s)).real(); }
    PopulationVector populations() const { return rho.diagonal().real(); }

    /// Sum of diagonal entries in a ground (or metastable) F manifold.
    double manifold_population(Manifold m, int F) const;

    /// Smallest eigenvalue of the Hermitian part of rho.
    double min_eigenvalue() const;
};

}  // namespace tmq
