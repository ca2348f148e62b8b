#pragma once

// Umbrella header for the full library.

#include <popgp/baseline.hpp>
#include <popgp/diagnostics.hpp>
#include <popgp/errors.hpp>
#include <popgp/experiment.hpp>
#include <popgp/fit.hpp>
#include <popgp/io.hpp>
#include <popgp/kernel.hpp>
#include <popgp/model.hpp>
#include <popgp/predict.hpp>
#include <popgp/rng.hpp>
#include <popgp/sampler.hpp>
#include <popgp/synthetic.hpp>
