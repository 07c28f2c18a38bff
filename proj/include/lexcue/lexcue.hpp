#pragma once

#include "lexcue/conjecture.hpp"
#include "lexcue/corpus.hpp"
#include "lexcue/cues.hpp"
#include "lexcue/detect.hpp"
#include "lexcue/error.hpp"
#include "lexcue/evalx.hpp"
#include "lexcue/gateway.hpp"
#include "lexcue/hash.hpp"
#include "lexcue/label.hpp"
#include "lexcue/linmodel.hpp"
#include "lexcue/lm.hpp"
#include "lexcue/metrics.hpp"
#include "lexcue/mock_responder.hpp"
#include "lexcue/phenomscore.hpp"
#include "lexcue/stoplist.hpp"
#include "lexcue/textpipe.hpp"
