#pragma once

// Umbrella header. The remote scorer lives in remote_scorer.hpp and is not
// pulled in here; it drags a full HTTP client along.

#include "thinkdex/corpus.hpp"
#include "thinkdex/decoder.hpp"
#include "thinkdex/errors.hpp"
#include "thinkdex/eval.hpp"
#include "thinkdex/fm_index.hpp"
#include "thinkdex/objectives.hpp"
#include "thinkdex/scorer.hpp"
#include "thinkdex/tokenizer.hpp"
#include "thinkdex/toy_policy.hpp"
#include "thinkdex/unicode.hpp"
