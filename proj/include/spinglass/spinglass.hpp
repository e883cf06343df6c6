#pragma once

// Numerical toolkit for coupled mixed even-spin models: Parisi functional
// evaluation and minimization, the coupled fixed-point map and u_f, Guerra
// two-system bounds, and exact desk-scale simulation of coupled Gibbs
// measures.

#include "spinglass/chaos.hpp"
#include "spinglass/gg.hpp"
#include "spinglass/grid.hpp"
#include "spinglass/guerra.hpp"
#include "spinglass/minimize.hpp"
#include "spinglass/mixture.hpp"
#include "spinglass/parisi.hpp"
#include "spinglass/quadrature.hpp"
#include "spinglass/roots.hpp"
#include "spinglass/sim.hpp"
