#pragma once

// Decision-fusion toolkit for distributed detection of a non-cooperative
// target: sensing model, BSC reporting channels, fusion statistics,
// locally-optimum detectors, and the Monte Carlo ROC engine.

#include "dfuse/errors.hpp"
#include "dfuse/math.hpp"
#include "dfuse/rng.hpp"
#include "dfuse/model.hpp"
#include "dfuse/channel.hpp"
#include "dfuse/fusion.hpp"
#include "dfuse/lod.hpp"
#include "dfuse/sim.hpp"
#include "dfuse/selftest.hpp"
