#pragma once

#include "spoofprint/audio.hpp"
#include "spoofprint/classify.hpp"
#include "spoofprint/corpus.hpp"
#include "spoofprint/error.hpp"
#include "spoofprint/eval.hpp"
#include "spoofprint/features.hpp"
#include "spoofprint/fft.hpp"
#include "spoofprint/lld.hpp"
#include "spoofprint/pipeline.hpp"
#include "spoofprint/report.hpp"
#include "spoofprint/rng.hpp"
#include "spoofprint/synth.hpp"
