#pragma once

// Umbrella header.
#include "ppbkws/decoder.hpp"
#include "ppbkws/error.hpp"
#include "ppbkws/fusion.hpp"
#include "ppbkws/hits.hpp"
#include "ppbkws/keyword_fsa.hpp"
#include "ppbkws/lattice.hpp"
#include "ppbkws/lexicon.hpp"
#include "ppbkws/matrix_io.hpp"
#include "ppbkws/phone_set.hpp"
#include "ppbkws/pipeline.hpp"
#include "ppbkws/posteriors.hpp"
#include "ppbkws/scoring.hpp"
#include "ppbkws/search.hpp"
#include "ppbkws/smoothing.hpp"
#include "ppbkws/synth.hpp"
