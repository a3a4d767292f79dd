#ifndef LABEL_REMEDY_LABEL_REMEDY_HPP
#define LABEL_REMEDY_LABEL_REMEDY_HPP

// Convenience header pulling in the whole library.

#include "classifiers.hpp"
#include "core_types.hpp"
#include "datasets_io.hpp"
#include "error.hpp"
#include "eval_cli.hpp"
#include "mat_v5.hpp"
#include "metrics.hpp"
#include "normalize.hpp"
#include "pipeline.hpp"
#include "prep.hpp"
#include "random.hpp"
#include "tsrp_remedy.hpp"
#include "uda_adapters.hpp"
#include "utsp.hpp"

#endif
