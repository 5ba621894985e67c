#pragma once

#include "nlos_calib/bfgs.hpp"
#include "nlos_calib/calibrate.hpp"
#include "nlos_calib/eval.hpp"
#include "nlos_calib/geometry.hpp"
#include "nlos_calib/homography.hpp"
#include "nlos_calib/ingest.hpp"
#include "nlos_calib/io.hpp"
#include "nlos_calib/measurement.hpp"
#include "nlos_calib/objective.hpp"
#include "nlos_calib/param.hpp"
#include "nlos_calib/random.hpp"
#include "nlos_calib/rigid.hpp"
#include "nlos_calib/sweep.hpp"
#include "nlos_calib/synth.hpp"
#include "nlos_calib/types.hpp"
