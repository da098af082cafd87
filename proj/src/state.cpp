#include "tmq/state.hpp"

#include <Eigen/Eigenvalues>

namespace tmq {

EnsembleState EnsembleState::pure(const SublevelRef& s, double atoms, MagneticField b_nominal) {
    EnsembleState st;
    const int i = basis_index(s);
    st.rho(i, i) = 1.0;
    st.initial_atoms = atoms;
    st.b_nominal = b_nominal;
    return st;
}

double EnsembleState::manifold_population(Manifold m, int F) const {
    double sum = 0.0;
    for (int i = 0; i < kBasisSize; ++i) {
        const auto s = basis_state(i);
        if (s.manifold == m && s.F == F) sum += rho(i, i).real();
    }
    return sum;
}

double EnsembleState::min_eigenvalue() const {
    const DensityMatrix h = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<DensityMatrix> solver(h, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
}

}  // namespace tmq
