#pragma once

#include "reftraj/core.hpp"
#include "reftraj/csv.hpp"
#include "reftraj/error.hpp"
#include "reftraj/geo.hpp"
#include "reftraj/hash.hpp"
#include "reftraj/ingest.hpp"
#include "reftraj/kmeans.hpp"
#include "reftraj/metrics.hpp"
#include "reftraj/models.hpp"
#include "reftraj/prediction.hpp"
#include "reftraj/projection.hpp"
#include "reftraj/reference.hpp"
#include "reftraj/similarity.hpp"
#include "reftraj/synthetic.hpp"
#include "reftraj/trajectory.hpp"
