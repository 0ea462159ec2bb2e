#pragma once

#include "qslam/config.hpp"
#include "qslam/errors.hpp"
#include "qslam/evaluate.hpp"
#include "qslam/geohash.hpp"
#include "qslam/io.hpp"
#include "qslam/localization.hpp"
#include "qslam/map.hpp"
#include "qslam/map_io.hpp"
#include "qslam/moments.hpp"
#include "qslam/patch.hpp"
#include "qslam/pipeline.hpp"
#include "qslam/plot.hpp"
#include "qslam/quadric.hpp"
#include "qslam/registration.hpp"
#include "qslam/se3.hpp"
#include "qslam/segmentation.hpp"
