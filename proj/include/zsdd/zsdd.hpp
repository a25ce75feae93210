#pragma once

#include "zsdd/classifier.hpp"
#include "zsdd/decoupling.hpp"
#include "zsdd/embedding_store.hpp"
#include "zsdd/metrics.hpp"
#include "zsdd/pipeline.hpp"
#include "zsdd/synth.hpp"
