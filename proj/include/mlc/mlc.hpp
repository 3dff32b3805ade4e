#pragma once
// Convenience header pulling in the whole library.

#include "mlc/sparse.hpp"
#include "mlc/dense.hpp"
#include "mlc/mesh.hpp"
#include "mlc/quadrature.hpp"
#include "mlc/fem.hpp"
#include "mlc/multigrid.hpp"
#include "mlc/problem.hpp"
#include "mlc/space.hpp"
#include "mlc/ocp.hpp"
#include "mlc/augmented.hpp"
#include "mlc/correction.hpp"
#include "mlc/study.hpp"
