#ifndef GRADLAB_GRADLAB_HPP
#define GRADLAB_GRADLAB_HPP

#include "gradlab/drift.hpp"
#include "gradlab/errors.hpp"
#include "gradlab/generator.hpp"
#include "gradlab/gradient.hpp"
#include "gradlab/grid.hpp"
#include "gradlab/invariant_measure.hpp"
#include "gradlab/lyapunov.hpp"
#include "gradlab/parabolic.hpp"
#include "gradlab/solver.hpp"
#include "gradlab/test_functions.hpp"
#include "gradlab/verification.hpp"

#endif  // GRADLAB_GRADLAB_HPP
