#pragma once

#include "dataset.hpp"
#include "error.hpp"
#include "features.hpp"
#include "lmo.hpp"
#include "pipeline.hpp"
#include "random.hpp"
#include "resources.hpp"
#include "ridge.hpp"
#include "sparse_matrix.hpp"
#include "sweep.hpp"
#include "text.hpp"
#include "worker_pool.hpp"
