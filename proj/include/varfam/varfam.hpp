#pragma once

#include "varfam/annotation.hpp"
#include "varfam/bench.hpp"
#include "varfam/config.hpp"
#include "varfam/corpus.hpp"
#include "varfam/embedding.hpp"
#include "varfam/error.hpp"
#include "varfam/family_id.hpp"
#include "varfam/induction.hpp"
#include "varfam/log.hpp"
#include "varfam/model_io.hpp"
#include "varfam/ngrams.hpp"
#include "varfam/output.hpp"
#include "varfam/pipeline.hpp"
#include "varfam/scoring.hpp"
#include "varfam/sgns.hpp"
#include "varfam/trainer.hpp"
#include "varfam/unicode.hpp"
