#pragma once

#include "rht/bandit_tree.hpp"
#include "rht/checkpoint.hpp"
#include "rht/config.hpp"
#include "rht/context_partition.hpp"
#include "rht/course_space.hpp"
#include "rht/distributed_forest.hpp"
#include "rht/engine.hpp"
#include "rht/environment.hpp"
#include "rht/error.hpp"
#include "rht/harness.hpp"
#include "rht/invariants.hpp"
#include "rht/items_io.hpp"
#include "rht/random.hpp"
