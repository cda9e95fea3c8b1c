#pragma once

// Streaming density deconvolution on a finite mixing grid: recursive
// quasi-Bayes updates, pointwise credible intervals, uniform credible bands
// and Monte Carlo calibration of the learning rate.

#include "deconv/calibrate.hpp"
#include "deconv/checkpoint.hpp"
#include "deconv/engine.hpp"
#include "deconv/errors.hpp"
#include "deconv/grid.hpp"
#include "deconv/kernels.hpp"
#include "deconv/math.hpp"
#include "deconv/noise.hpp"
#include "deconv/quadrature.hpp"
#include "deconv/rng.hpp"
#include "deconv/synth.hpp"
#include "deconv/uncertainty.hpp"
