#pragma once

#include "decaug/errors.hpp"
#include "decaug/ids.hpp"
#include "decaug/bitmask.hpp"
#include "decaug/morphology.hpp"
#include "decaug/rle.hpp"
#include "decaug/image.hpp"
#include "decaug/rng.hpp"
#include "decaug/annotations.hpp"
#include "decaug/mask_algebra.hpp"
#include "decaug/candidate_selection.hpp"
#include "decaug/compositing.hpp"
#include "decaug/pose.hpp"
#include "decaug/kmeans.hpp"
#include "decaug/gmm.hpp"
#include "decaug/spatial_prior.hpp"
#include "decaug/pipeline.hpp"
