#pragma once

// Umbrella header.
#include "pobs_sl/data.hpp"
#include "pobs_sl/error.hpp"
#include "pobs_sl/evaluation.hpp"
#include "pobs_sl/learners.hpp"
#include "pobs_sl/nnls.hpp"
#include "pobs_sl/pseudo_obs.hpp"
#include "pobs_sl/rng.hpp"
#include "pobs_sl/simulation.hpp"
#include "pobs_sl/super_learner.hpp"
#include "pobs_sl/survival.hpp"
