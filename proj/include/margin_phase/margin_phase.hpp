#pragma once

#include "margin_phase/core.hpp"
#include "margin_phase/counting.hpp"
#include "margin_phase/distributions.hpp"
#include "margin_phase/errors.hpp"
#include "margin_phase/experiments.hpp"
#include "margin_phase/matrix.hpp"
#include "margin_phase/rng.hpp"
#include "margin_phase/sampling.hpp"
#include "margin_phase/typical.hpp"
#include "margin_phase/version.hpp"
