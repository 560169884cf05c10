#pragma once

#include "mwpipe/bag.hpp"
#include "mwpipe/bus.hpp"
#include "mwpipe/config.hpp"
#include "mwpipe/csv.hpp"
#include "mwpipe/features/engine.hpp"
#include "mwpipe/physio.hpp"
#include "mwpipe/publish.hpp"
#include "mwpipe/session.hpp"
#include "mwpipe/sim/run.hpp"
#include "mwpipe/synth.hpp"
#include "mwpipe/topics.hpp"
#include "mwpipe/wire.hpp"
