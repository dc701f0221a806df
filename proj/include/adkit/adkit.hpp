#pragma once

#include "adkit/bench.hpp"
#include "adkit/config.hpp"
#include "adkit/embedding.hpp"
#include "adkit/error.hpp"
#include "adkit/gmm.hpp"
#include "adkit/kde.hpp"
#include "adkit/knowledge.hpp"
#include "adkit/localization.hpp"
#include "adkit/metrics.hpp"
#include "adkit/pgm.hpp"
#include "adkit/retrieval.hpp"
#include "adkit/rng.hpp"
#include "adkit/similarity.hpp"
#include "adkit/sparse.hpp"
#include "adkit/synthetic.hpp"
