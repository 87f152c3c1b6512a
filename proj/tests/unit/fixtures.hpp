#pragma once

#include <string>

#include <Eigen/Dense>

#include "crnobs/kinetics.hpp"
#include "crnobs/network.hpp"

namespace crnobs::testing {

inline constexpr const char* kMcKeithan =
    "assume no_boundary_equilibria\n"
    "A + B <-> C [0.5, 3]\n"
    "C -> D [1]\n"
    "D -> A + B [2]\n";

inline constexpr const char* kTwoSpecies =
    "assume no_boundary_equilibria\n"
    "3*X1 + 4*X2 <-> 2*X1 + 5*X2 [1, 4]\n";

inline constexpr const char* kEnzyme =
    "species: S, P, Q, R, E, I\n"
    "complexes: S + E, P + E, Q, Q + I, R\n"
    "assume no_boundary_equilibria\n"
    "S + E <-> Q [1, 2]\n"
    "P + E <-> Q [0.5, 3]\n"
    "Q + I <-> R [1.5, 0.7]\n";

inline ReactionNetwork McKeithan() { return ParseNetwork(kMcKeithan); }
inline ReactionNetwork TwoSpecies() { return ParseNetwork(kTwoSpecies); }
inline ReactionNetwork Enzyme() { return ParseNetwork(kEnzyme); }

// h = (x1 x2^2, x1 x4)
inline OutputMap McKeithanOutput() {
  Eigen::MatrixXd c(2, 4);
  c << 1, 2, 0, 0, 1, 0, 0, 1;
  return OutputMap(c);
}

// h = (S^2 Q, R I^2, E)
inline OutputMap EnzymeOutput() {
  Eigen::MatrixXd c(3, 6);
  c << 2, 0, 1, 0, 0, 0,
       0, 0, 0, 1, 0, 2,
       0, 0, 0, 0, 1, 0;
  return OutputMap(c);
}

// Equilibrium of the McKeithan network in the class of (3, 2, 3, 20).
inline Eigen::VectorXd McKeithanEquilibrium() {
  Eigen::VectorXd x(4);
  x << 9.80668337, 8.80668337, 10.79554442, 5.39777221;
  return x;
}

}  // namespace crnobs::testing
