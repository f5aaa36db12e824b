#pragma once

#include "ooi/core.hpp"
#include "ooi/envs/dupinput.hpp"
#include "ooi/envs/gathering.hpp"
#include "ooi/envs/treemaze.hpp"
#include "ooi/episode.hpp"
#include "ooi/fsc.hpp"
#include "ooi/harness.hpp"
#include "ooi/learner.hpp"
#include "ooi/policy_net.hpp"
#include "ooi/rng.hpp"
#include "ooi/trajectory.hpp"
