#pragma once

// Everything in one include.

#include "nschur/analysis.hpp"
#include "nschur/cholesky.hpp"
#include "nschur/dense.hpp"
#include "nschur/errors.hpp"
#include "nschur/gallery.hpp"
#include "nschur/krylov.hpp"
#include "nschur/lanczos.hpp"
#include "nschur/linear_operator.hpp"
#include "nschur/matrix_market.hpp"
#include "nschur/nystrom.hpp"
#include "nschur/partition.hpp"
#include "nschur/precond.hpp"
#include "nschur/random.hpp"
#include "nschur/schur.hpp"
#include "nschur/solve.hpp"
#include "nschur/sparse_matrix.hpp"
