#pragma once

#include "opseq/classify/classifier.hpp"
#include "opseq/corpus.hpp"
#include "opseq/embed.hpp"
#include "opseq/features.hpp"
#include "opseq/harness/experiment.hpp"
#include "opseq/harness/families.hpp"
#include "opseq/harness/presets.hpp"
#include "opseq/harness/report.hpp"
#include "opseq/harness/split.hpp"
#include "opseq/hmm.hpp"
#include "opseq/io.hpp"
#include "opseq/synthetic.hpp"
