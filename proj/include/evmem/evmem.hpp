#pragma once

#include "evmem/config.hpp"
#include "evmem/construction/construction.hpp"
#include "evmem/construction/ingest.hpp"
#include "evmem/core/embedding.hpp"
#include "evmem/core/event_store.hpp"
#include "evmem/core/memory.hpp"
#include "evmem/error.hpp"
#include "evmem/harness/benchmark.hpp"
#include "evmem/harness/metrics.hpp"
#include "evmem/harness/stats.hpp"
#include "evmem/llm/call.hpp"
#include "evmem/llm/parsers.hpp"
#include "evmem/llm/provider.hpp"
#include "evmem/llm/templates.hpp"
#include "evmem/search/search.hpp"
#include "evmem/topics/kmeans.hpp"
#include "evmem/topics/topic_layer.hpp"
