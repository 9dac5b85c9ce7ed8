#pragma once

#include "longdoc/aggregator.hpp"
#include "longdoc/chunker.hpp"
#include "longdoc/commands.hpp"
#include "longdoc/config.hpp"
#include "longdoc/corpus.hpp"
#include "longdoc/embedder.hpp"
#include "longdoc/eval.hpp"
#include "longdoc/metrics.hpp"
#include "longdoc/svm.hpp"
