#pragma once

// Umbrella header for the 1-D quantum trajectory engine.

#include "qtraj/grid.hpp"
#include "qtraj/fft.hpp"
#include "qtraj/field.hpp"
#include "qtraj/derivatives.hpp"
#include "qtraj/polar.hpp"
#include "qtraj/potential.hpp"
#include "qtraj/quantum_terms.hpp"
#include "qtraj/propagators.hpp"
#include "qtraj/interp.hpp"
#include "qtraj/velocity.hpp"
#include "qtraj/trajectory.hpp"
#include "qtraj/run_context.hpp"
#include "qtraj/along_curve.hpp"
#include "qtraj/scenario.hpp"
#include "qtraj/io.hpp"
#include "qtraj/checks.hpp"
