#pragma once

#include "madcn/baselines.hpp"
#include "madcn/dataset.hpp"
#include "madcn/errors.hpp"
#include "madcn/explain.hpp"
#include "madcn/gradcheck.hpp"
#include "madcn/matrix.hpp"
#include "madcn/metrics.hpp"
#include "madcn/model.hpp"
#include "madcn/rng.hpp"
#include "madcn/schema.hpp"
#include "madcn/serialize.hpp"
#include "madcn/split.hpp"
#include "madcn/standardize.hpp"
#include "madcn/train.hpp"
