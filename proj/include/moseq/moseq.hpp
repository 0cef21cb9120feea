#pragma once

#include "moseq/bench.hpp"
#include "moseq/chunk.hpp"
#include "moseq/config.hpp"
#include "moseq/corpus.hpp"
#include "moseq/decoder.hpp"
#include "moseq/error.hpp"
#include "moseq/labelspace.hpp"
#include "moseq/metrics.hpp"
#include "moseq/nn.hpp"
#include "moseq/synthetic.hpp"
#include "moseq/tagger.hpp"
