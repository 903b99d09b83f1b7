#pragma once
// Convenience umbrella: the whole toolkit.

#include "medlink/abbrev.hpp"
#include "medlink/candidates.hpp"
#include "medlink/common.hpp"
#include "medlink/config.hpp"
#include "medlink/corpus.hpp"
#include "medlink/embed.hpp"
#include "medlink/eval.hpp"
#include "medlink/jsonl.hpp"
#include "medlink/kb.hpp"
#include "medlink/pipeline.hpp"
#include "medlink/postprocess.hpp"
#include "medlink/rerank.hpp"
#include "medlink/sequence.hpp"
#include "medlink/special_tokens.hpp"
#include "medlink/text.hpp"
